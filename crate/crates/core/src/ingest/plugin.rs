use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("plugin '{plugin}' unavailable: {reason}")]
    PluginUnavailable {
        plugin: String,
        reason: String,
        /// Seconds the source asked us to wait, from the last Retry-After.
        retry_after_secs: Option<u64>,
    },
    #[error("malformed listing from '{plugin}': {reason}")]
    MalformedListing { plugin: String, reason: String },
    #[error("content hash mismatch for {locator}: expected {expected}, found {found}")]
    HashMismatch {
        locator: String,
        expected: String,
        found: String,
    },
    #[error("source no longer has {0}")]
    SourceGone(String),
    #[error("no plugin named '{0}'")]
    UnknownPlugin(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("{0}")]
    Table(String),
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::PluginUnavailable { .. } => "PluginUnavailable",
            IngestError::MalformedListing { .. } => "MalformedListing",
            IngestError::HashMismatch { .. } => "HashMismatch",
            IngestError::SourceGone(_) => "SourceGone",
            IngestError::UnknownPlugin(_) => "UnknownPlugin",
            IngestError::Cache(_) => "CacheError",
            IngestError::Table(_) => "InvalidTable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ListingEntry {
    pub locator: String,
    pub title: String,
    pub description: String,
    /// Declared payload format (file extension or catalog type), if known.
    pub format: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ListingPage {
    pub entries: Vec<ListingEntry>,
    /// Total entries across all pages, when the source reports it.
    pub total: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchedDataset {
    pub bytes: Vec<u8>,
    pub content_type: Option<String>,
    pub name: Option<String>,
    pub description: Option<String>,
}

/// A source of datasets. Listing is paged by offset so that large catalogs
/// can be walked incrementally.
pub trait DiscoveryPlugin: Send + Sync {
    fn name(&self) -> &str;

    fn list_page(&self, offset: usize, limit: usize) -> Result<ListingPage, IngestError>;

    fn fetch(&self, locator: &str) -> Result<FetchedDataset, IngestError>;

    /// Walks pages until `limit` entries are collected or the listing ends.
    fn list(&self, limit: Option<usize>) -> Result<Vec<ListingEntry>, IngestError> {
        let page_size = 100;
        let mut out = Vec::new();
        loop {
            let want = limit.map_or(page_size, |l| (l - out.len()).min(page_size));
            if want == 0 {
                break;
            }
            let page = self.list_page(out.len(), want)?;
            let n = page.entries.len();
            out.extend(page.entries);
            if n == 0 || page.total.is_some_and(|t| out.len() >= t) {
                break;
            }
        }
        Ok(out)
    }
}

/// True when a listing entry or payload looks like CSV.
pub fn is_csv(format: Option<&str>, content_type: Option<&str>) -> bool {
    let format_ok = format.is_none_or(|f| f.eq_ignore_ascii_case("csv"));
    let type_ok = content_type.is_none_or(|t| {
        let t = t.to_ascii_lowercase();
        t.contains("csv")
            || t.starts_with("text/plain")
            || t.starts_with("application/octet-stream")
    });
    format_ok && type_ok
}

#[derive(Debug, Deserialize, Default)]
struct Sidecar {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
}

pub const SIDECAR_SUFFIX: &str = ".meta.json";

/// Serves files from one directory (non-recursive, sorted by file name).
/// A `<file>.meta.json` next to a file may supply `name` and `description`.
#[derive(Debug, Clone)]
pub struct LocalDirPlugin {
    name: String,
    root: PathBuf,
}

impl LocalDirPlugin {
    pub fn new(name: &str, root: impl Into<PathBuf>) -> Self {
        LocalDirPlugin {
            name: name.to_string(),
            root: root.into(),
        }
    }

    fn unavailable(&self, reason: impl ToString) -> IngestError {
        IngestError::PluginUnavailable {
            plugin: self.name.clone(),
            reason: reason.to_string(),
            retry_after_secs: None,
        }
    }

    fn files(&self) -> Result<Vec<PathBuf>, IngestError> {
        let mut files = Vec::new();
        let dir = fs::read_dir(&self.root)
            .map_err(|e| self.unavailable(format!("{}: {e}", self.root.display())))?;
        for entry in dir {
            let path = entry.map_err(|e| self.unavailable(e))?.path();
            let is_sidecar = path.to_string_lossy().ends_with(SIDECAR_SUFFIX);
            if path.is_file() && !is_sidecar {
                files.push(path);
            }
        }
        files.sort();
        Ok(files)
    }

    fn sidecar(path: &Path) -> Sidecar {
        let mut p = path.as_os_str().to_owned();
        p.push(SIDECAR_SUFFIX);
        fs::read(PathBuf::from(p))
            .ok()
            .and_then(|b| serde_json::from_slice(&b).ok())
            .unwrap_or_default()
    }
}

impl DiscoveryPlugin for LocalDirPlugin {
    fn name(&self) -> &str {
        &self.name
    }

    fn list_page(&self, offset: usize, limit: usize) -> Result<ListingPage, IngestError> {
        let files = self.files()?;
        let total = files.len();
        let entries = files
            .into_iter()
            .skip(offset)
            .take(limit)
            .map(|path| {
                let side = Self::sidecar(&path);
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                ListingEntry {
                    locator: path.to_string_lossy().into_owned(),
                    title: side.name.unwrap_or(stem),
                    description: side.description.unwrap_or_default(),
                    format: Some(
                        path.extension()
                            .map(|e| e.to_string_lossy().to_ascii_lowercase())
                            .unwrap_or_default(),
                    ),
                }
            })
            .collect();
        Ok(ListingPage {
            entries,
            total: Some(total),
        })
    }

    fn fetch(&self, locator: &str) -> Result<FetchedDataset, IngestError> {
        let path = Path::new(locator);
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            ErrorKind::NotFound => IngestError::SourceGone(locator.to_string()),
            _ => self.unavailable(format!("{locator}: {e}")),
        })?;
        let side = Self::sidecar(path);
        Ok(FetchedDataset {
            bytes,
            content_type: None,
            name: side
                .name
                .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned())),
            description: side.description,
        })
    }
}
