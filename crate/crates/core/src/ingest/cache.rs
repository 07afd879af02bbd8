use std::fs::{self, File};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::SystemTime;

use super::plugin::IngestError;
use super::provenance::content_hash;

pub const DEFAULT_CACHE_CAP_BYTES: u64 = 1 << 30;

/// Content-addressed store of raw dataset bytes at
/// `<root>/<first two hex digits>/<hash>.csv`. Access time is tracked through
/// file mtimes; when the total size exceeds the cap, least recently used
/// entries are deleted.
#[derive(Debug)]
pub struct DatasetCache {
    root: PathBuf,
    cap_bytes: u64,
    lock: Mutex<()>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachePut {
    pub hash: String,
    /// The entry was already present.
    pub hit: bool,
}

fn cache_err(e: impl ToString) -> IngestError {
    IngestError::Cache(e.to_string())
}

fn valid_hash(h: &str) -> bool {
    h.len() >= 2 && h.bytes().all(|b| b.is_ascii_hexdigit())
}

impl DatasetCache {
    pub fn new(root: impl Into<PathBuf>, cap_bytes: u64) -> Self {
        DatasetCache {
            root: root.into(),
            cap_bytes,
            lock: Mutex::new(()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, hash: &str) -> PathBuf {
        self.root.join(&hash[..2]).join(format!("{hash}.csv"))
    }

    pub fn contains(&self, hash: &str) -> bool {
        valid_hash(hash) && self.path_for(hash).is_file()
    }

    fn touch(path: &Path) {
        if let Ok(f) = File::options().write(true).open(path) {
            let _ = f.set_modified(SystemTime::now());
        }
    }

    /// Stores `bytes` under their SHA-256 and evicts down to the cap.
    pub fn put(&self, bytes: &[u8]) -> Result<CachePut, IngestError> {
        let hash = content_hash(bytes);
        let path = self.path_for(&hash);
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let hit = path.is_file();
        if hit {
            Self::touch(&path);
        } else {
            let dir = path.parent().expect("cache path has a parent");
            fs::create_dir_all(dir).map_err(cache_err)?;
            let tmp = dir.join(format!(".{hash}.{}.tmp", std::process::id()));
            let mut f = File::create(&tmp).map_err(cache_err)?;
            f.write_all(bytes)
                .and_then(|_| f.sync_all())
                .map_err(cache_err)?;
            drop(f);
            fs::rename(&tmp, &path).map_err(cache_err)?;
        }
        self.evict_locked(Some(&hash))?;
        Ok(CachePut { hash, hit })
    }

    /// Returns the cached bytes if present and intact. A corrupted entry is
    /// removed and reported as a miss.
    pub fn get(&self, hash: &str) -> Result<Option<Vec<u8>>, IngestError> {
        if !valid_hash(hash) {
            return Ok(None);
        }
        let path = self.path_for(hash);
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        match fs::read(&path) {
            Ok(bytes) if content_hash(&bytes) == hash => {
                Self::touch(&path);
                Ok(Some(bytes))
            }
            Ok(_) => {
                log::warn!("cache entry {hash} is corrupt, removing");
                let _ = fs::remove_file(&path);
                Ok(None)
            }
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(cache_err(e)),
        }
    }

    pub fn remove(&self, hash: &str) -> Result<bool, IngestError> {
        if !valid_hash(hash) {
            return Ok(false);
        }
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        match fs::remove_file(self.path_for(hash)) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(false),
            Err(e) => Err(cache_err(e)),
        }
    }

    fn entries(&self) -> Result<Vec<(PathBuf, u64, SystemTime)>, IngestError> {
        let mut out = Vec::new();
        let top = match fs::read_dir(&self.root) {
            Ok(d) => d,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(cache_err(e)),
        };
        for shard in top {
            let shard = shard.map_err(cache_err)?.path();
            if !shard.is_dir() {
                continue;
            }
            for entry in fs::read_dir(&shard).map_err(cache_err)? {
                let path = entry.map_err(cache_err)?.path();
                if path.extension().is_some_and(|e| e == "csv") {
                    let meta = fs::metadata(&path).map_err(cache_err)?;
                    let mtime = meta.modified().unwrap_or(SystemTime::UNIX_EPOCH);
                    out.push((path, meta.len(), mtime));
                }
            }
        }
        Ok(out)
    }

    pub fn total_bytes(&self) -> Result<u64, IngestError> {
        Ok(self.entries()?.iter().map(|e| e.1).sum())
    }

    fn evict_locked(&self, keep: Option<&str>) -> Result<Vec<String>, IngestError> {
        let mut entries = self.entries()?;
        let mut total: u64 = entries.iter().map(|e| e.1).sum();
        let mut evicted = Vec::new();
        if total <= self.cap_bytes {
            return Ok(evicted);
        }
        entries.sort_by(|a, b| a.2.cmp(&b.2).then_with(|| a.0.cmp(&b.0)));
        for (path, size, _) in entries {
            if total <= self.cap_bytes {
                break;
            }
            let hash = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            if Some(hash.as_str()) == keep {
                continue;
            }
            if fs::remove_file(&path).is_ok() {
                total -= size;
                evicted.push(hash);
            }
        }
        Ok(evicted)
    }

    /// Deletes least recently used entries until the cache fits its cap.
    pub fn evict(&self) -> Result<Vec<String>, IngestError> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        self.evict_locked(None)
    }
}
