//! On-disk index directory.
//!
//! ```text
//! <dir>/manifest.json   format version, generation, sha256 + size per file
//! <dir>/profiles.jsonl  one DatasetProfile JSON document per line
//! <dir>/keyword.bin     doc lengths and postings
//! <dir>/ranges.bin      numeric then temporal interval lists
//! <dir>/spatial.bin     box lists per latitude/longitude pair
//! <dir>/lsh.bin         band parameters, sketches and band buckets
//! ```
//!
//! Binary files start with the magic `ADSI1`, a kind byte and a `u16`
//! version; all integers and floats are little-endian. Every file is written
//! to a temporary name and renamed; the manifest goes last.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::keyword::DocEntry;
use super::lsh::{LshIndex, LshParams};
use super::ranges::{ColumnKey, RangeIndex, SpatialIndex};
use super::{IndexError, IndexShard, KeywordIndex};
use crate::profiler::{DatasetProfile, Resolution};
use crate::sketches::{CategoricalSketch, GeoBox, RangeSummary, SpatialSummary, ValueRange};

pub const INDEX_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 5] = b"ADSI1";
const BIN_VERSION: u16 = 1;

const KIND_KEYWORD: u8 = 1;
const KIND_RANGES: u8 = 2;
const KIND_SPATIAL: u8 = 3;
const KIND_LSH: u8 = 4;

const MANIFEST: &str = "manifest.json";
const PROFILES: &str = "profiles.jsonl";
const KEYWORD: &str = "keyword.bin";
const RANGES: &str = "ranges.bin";
const SPATIAL: &str = "spatial.bin";
const LSH: &str = "lsh.bin";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FileEntry {
    sha256: String,
    bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    generation: u64,
    dataset_count: usize,
    files: BTreeMap<String, FileEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, dir.join(name))
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(kind: u8) -> Self {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.0.push(kind);
        w.0.write_u16::<LittleEndian>(BIN_VERSION)
            .expect("vec write");
        w
    }

    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.0.write_u32::<LittleEndian>(v).expect("vec write");
    }

    fn u64(&mut self, v: u64) {
        self.0.write_u64::<LittleEndian>(v).expect("vec write");
    }

    fn f64(&mut self, v: f64) {
        self.0.write_f64::<LittleEndian>(v).expect("vec write");
    }

    fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("length fits u32"));
    }

    fn str(&mut self, s: &str) {
        self.len(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    file: &'static str,
    cur: Cursor<&'a [u8]>,
}

impl<'a> Reader<'a> {
    fn open(file: &'static str, bytes: &'a [u8], kind: u8) -> Result<Self, IndexError> {
        let mut r = Reader {
            file,
            cur: Cursor::new(bytes),
        };
        let mut magic = [0u8; 5];
        r.cur
            .read_exact(&mut magic)
            .map_err(|_| r.corrupt("short header"))?;
        if &magic != MAGIC {
            return Err(r.corrupt("bad magic"));
        }
        if r.u8()? != kind {
            return Err(r.corrupt("wrong file kind"));
        }
        let version = r
            .cur
            .read_u16::<LittleEndian>()
            .map_err(|_| r.corrupt("short header"))?;
        if version != BIN_VERSION {
            return Err(IndexError::VersionUnsupported(u32::from(version)));
        }
        Ok(r)
    }

    fn corrupt(&self, reason: &str) -> IndexError {
        IndexError::Corrupt {
            file: self.file.to_string(),
            reason: reason.to_string(),
        }
    }

    fn u8(&mut self) -> Result<u8, IndexError> {
        self.cur
            .read_u8()
            .map_err(|_| self.corrupt("unexpected end"))
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        self.cur
            .read_u32::<LittleEndian>()
            .map_err(|_| self.corrupt("unexpected end"))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        self.cur
            .read_u64::<LittleEndian>()
            .map_err(|_| self.corrupt("unexpected end"))
    }

    fn f64(&mut self) -> Result<f64, IndexError> {
        self.cur
            .read_f64::<LittleEndian>()
            .map_err(|_| self.corrupt("unexpected end"))
    }

    fn count(&mut self) -> Result<usize, IndexError> {
        Ok(self.u32()? as usize)
    }

    fn str(&mut self) -> Result<String, IndexError> {
        let n = self.u32()? as usize;
        let remaining = self.cur.get_ref().len() - self.cur.position() as usize;
        if n > remaining {
            return Err(self.corrupt("length exceeds file size"));
        }
        let mut buf = vec![0u8; n];
        self.cur
            .read_exact(&mut buf)
            .map_err(|_| self.corrupt("unexpected end"))?;
        String::from_utf8(buf).map_err(|_| self.corrupt("invalid utf-8"))
    }

    fn finish(&self) -> Result<(), IndexError> {
        if (self.cur.position() as usize) != self.cur.get_ref().len() {
            return Err(self.corrupt("trailing bytes"));
        }
        Ok(())
    }
}

fn resolution_code(r: Option<Resolution>) -> u8 {
    match r {
        None => 0,
        Some(r) => {
            1 + Resolution::ALL
                .iter()
                .position(|x| *x == r)
                .expect("listed") as u8
        }
    }
}

fn resolution_from_code(code: u8) -> Option<Option<Resolution>> {
    match code {
        0 => Some(None),
        c => Resolution::ALL.get(c as usize - 1).map(|r| Some(*r)),
    }
}

fn encode_keyword(k: &KeywordIndex) -> Vec<u8> {
    let mut w = Writer::new(KIND_KEYWORD);
    w.len(k.docs.len());
    for (id, doc) in &k.docs {
        w.str(id);
        w.f64(doc.length);
    }
    let mut terms: Vec<(&String, &BTreeMap<String, f64>)> = k.postings.iter().collect();
    terms.sort_by(|a, b| a.0.cmp(b.0));
    w.len(terms.len());
    for (term, posting) in terms {
        w.str(term);
        w.len(posting.len());
        for (id, tf) in posting {
            w.str(id);
            w.f64(*tf);
        }
    }
    w.0
}

fn decode_keyword(bytes: &[u8]) -> Result<KeywordIndex, IndexError> {
    let mut r = Reader::open(KEYWORD, bytes, KIND_KEYWORD)?;
    let mut k = KeywordIndex::default();
    for _ in 0..r.count()? {
        let id = r.str()?;
        let length = r.f64()?;
        k.total_length += length;
        k.docs.insert(
            id,
            DocEntry {
                length,
                terms: Vec::new(),
            },
        );
    }
    for _ in 0..r.count()? {
        let term = r.str()?;
        let mut posting = BTreeMap::new();
        for _ in 0..r.count()? {
            let id = r.str()?;
            let tf = r.f64()?;
            let doc = k
                .docs
                .get_mut(&id)
                .ok_or_else(|| r.corrupt("posting for unknown document"))?;
            doc.terms.push((term.clone(), tf));
            posting.insert(id, tf);
        }
        k.postings.insert(term, posting);
    }
    r.finish()?;
    for doc in k.docs.values_mut() {
        doc.terms.sort_by(|a, b| a.0.cmp(&b.0));
    }
    Ok(k)
}

fn encode_range_index(w: &mut Writer, idx: &RangeIndex) {
    w.len(idx.columns.len());
    for ((id, col), entry) in &idx.columns {
        w.str(id);
        w.str(col);
        w.u8(resolution_code(entry.resolution));
        w.u64(entry.summary.total_count);
        w.len(entry.summary.ranges.len());
        for r in &entry.summary.ranges {
            w.f64(r.lo);
            w.f64(r.hi);
            w.u64(r.count);
        }
    }
}

fn decode_range_index(r: &mut Reader<'_>) -> Result<RangeIndex, IndexError> {
    let mut idx = RangeIndex::default();
    for _ in 0..r.count()? {
        let id = r.str()?;
        let col = r.str()?;
        let resolution =
            resolution_from_code(r.u8()?).ok_or_else(|| r.corrupt("bad resolution code"))?;
        let total_count = r.u64()?;
        let mut ranges = Vec::new();
        for _ in 0..r.count()? {
            ranges.push(ValueRange {
                lo: r.f64()?,
                hi: r.f64()?,
                count: r.u64()?,
            });
        }
        idx.insert(
            &id,
            &col,
            RangeSummary {
                ranges,
                total_count,
            },
            resolution,
        );
    }
    Ok(idx)
}

fn encode_spatial(idx: &SpatialIndex) -> Vec<u8> {
    let mut w = Writer::new(KIND_SPATIAL);
    w.len(idx.columns.len());
    for ((id, lat), entry) in &idx.columns {
        w.str(id);
        w.str(lat);
        w.str(&entry.longitude);
        w.u64(entry.summary.total_count);
        w.len(entry.summary.boxes.len());
        for b in &entry.summary.boxes {
            w.f64(b.lat_min);
            w.f64(b.lat_max);
            w.f64(b.lon_min);
            w.f64(b.lon_max);
            w.u64(b.count);
        }
    }
    w.0
}

fn decode_spatial(bytes: &[u8]) -> Result<SpatialIndex, IndexError> {
    let mut r = Reader::open(SPATIAL, bytes, KIND_SPATIAL)?;
    let mut idx = SpatialIndex::default();
    for _ in 0..r.count()? {
        let id = r.str()?;
        let lat = r.str()?;
        let lon = r.str()?;
        let total_count = r.u64()?;
        let mut boxes = Vec::new();
        for _ in 0..r.count()? {
            boxes.push(GeoBox {
                lat_min: r.f64()?,
                lat_max: r.f64()?,
                lon_min: r.f64()?,
                lon_max: r.f64()?,
                count: r.u64()?,
            });
        }
        idx.insert(&id, &lat, &lon, SpatialSummary { boxes, total_count });
    }
    r.finish()?;
    Ok(idx)
}

fn encode_lsh(idx: &LshIndex) -> Vec<u8> {
    let mut w = Writer::new(KIND_LSH);
    w.len(idx.params.bands);
    w.len(idx.params.rows);
    w.len(idx.sketches.len());
    for ((id, col), s) in &idx.sketches {
        w.str(id);
        w.str(col);
        w.u64(s.cardinality);
        w.len(s.signature.len());
        for h in &s.signature {
            w.u64(*h);
        }
    }
    let mut buckets: Vec<(&u64, &BTreeSet<ColumnKey>)> = idx.buckets.iter().collect();
    buckets.sort_by_key(|b| *b.0);
    w.len(buckets.len());
    for (key, members) in buckets {
        w.u64(*key);
        w.len(members.len());
        for (id, col) in members {
            w.str(id);
            w.str(col);
        }
    }
    w.0
}

fn decode_lsh(bytes: &[u8]) -> Result<LshIndex, IndexError> {
    let mut r = Reader::open(LSH, bytes, KIND_LSH)?;
    let params = LshParams {
        bands: r.count()?,
        rows: r.count()?,
    };
    let mut idx = LshIndex::new(params);
    for _ in 0..r.count()? {
        let key = (r.str()?, r.str()?);
        let cardinality = r.u64()?;
        let mut signature = Vec::new();
        for _ in 0..r.count()? {
            signature.push(r.u64()?);
        }
        if signature.len() != params.signature_len() {
            return Err(r.corrupt("signature length disagrees with band parameters"));
        }
        idx.sketches.insert(
            key,
            CategoricalSketch {
                signature,
                cardinality,
            },
        );
    }
    for _ in 0..r.count()? {
        let bucket = r.u64()?;
        let mut members = BTreeSet::new();
        for _ in 0..r.count()? {
            let key = (r.str()?, r.str()?);
            if !idx.sketches.contains_key(&key) {
                return Err(r.corrupt("bucket references unknown column"));
            }
            members.insert(key);
        }
        idx.buckets.insert(bucket, members);
    }
    r.finish()?;
    Ok(idx)
}

/// Writes `shard` into `dir`, creating it when missing.
pub fn persist(shard: &IndexShard, dir: &Path) -> Result<(), IndexError> {
    fs::create_dir_all(dir)?;
    let mut profiles = Vec::new();
    for p in shard.profiles.values() {
        profiles.extend_from_slice(
            serde_json::to_string(p)
                .expect("profile serializes")
                .as_bytes(),
        );
        profiles.push(b'\n');
    }
    let mut ranges = Writer::new(KIND_RANGES);
    encode_range_index(&mut ranges, &shard.numeric);
    encode_range_index(&mut ranges, &shard.temporal);
    let files: Vec<(&str, Vec<u8>)> = vec![
        (PROFILES, profiles),
        (KEYWORD, encode_keyword(&shard.keyword)),
        (RANGES, ranges.0),
        (SPATIAL, encode_spatial(&shard.spatial)),
        (LSH, encode_lsh(&shard.lsh)),
    ];
    let mut manifest = Manifest {
        format_version: INDEX_FORMAT_VERSION,
        generation: shard.generation,
        dataset_count: shard.profiles.len(),
        files: BTreeMap::new(),
    };
    for (name, bytes) in &files {
        write_atomic(dir, name, bytes)?;
        manifest.files.insert(
            name.to_string(),
            FileEntry {
                sha256: sha256_hex(bytes),
                bytes: bytes.len() as u64,
            },
        );
    }
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic(dir, MANIFEST, &json)?;
    Ok(())
}

fn read_checked(
    dir: &Path,
    manifest: &Manifest,
    name: &'static str,
) -> Result<Vec<u8>, IndexError> {
    let entry = manifest
        .files
        .get(name)
        .ok_or_else(|| IndexError::Corrupt {
            file: MANIFEST.to_string(),
            reason: format!("no entry for {name}"),
        })?;
    let bytes = match fs::read(dir.join(name)) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(IndexError::ChecksumMismatch(name.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    if bytes.len() as u64 != entry.bytes || sha256_hex(&bytes) != entry.sha256 {
        return Err(IndexError::ChecksumMismatch(name.to_string()));
    }
    Ok(bytes)
}

/// Loads an index directory written by [`persist`], verifying every file
/// against the manifest.
pub fn load(dir: &Path) -> Result<IndexShard, IndexError> {
    let manifest_path = dir.join(MANIFEST);
    if !manifest_path.exists() {
        return Err(IndexError::EmptyIndex(dir.display().to_string()));
    }
    let manifest: Manifest =
        serde_json::from_slice(&fs::read(&manifest_path)?).map_err(|e| IndexError::Corrupt {
            file: MANIFEST.to_string(),
            reason: e.to_string(),
        })?;
    if manifest.format_version != INDEX_FORMAT_VERSION {
        return Err(IndexError::VersionUnsupported(manifest.format_version));
    }

    let profiles_bytes = read_checked(dir, &manifest, PROFILES)?;
    let mut profiles = BTreeMap::new();
    for (i, line) in profiles_bytes.split(|b| *b == b'\n').enumerate() {
        if line.is_empty() {
            continue;
        }
        let p: DatasetProfile = serde_json::from_slice(line).map_err(|e| IndexError::Corrupt {
            file: PROFILES.to_string(),
            reason: format!("line {}: {e}", i + 1),
        })?;
        profiles.insert(p.id.clone(), p);
    }
    if profiles.len() != manifest.dataset_count {
        return Err(IndexError::Corrupt {
            file: PROFILES.to_string(),
            reason: format!(
                "{} profiles, manifest lists {}",
                profiles.len(),
                manifest.dataset_count
            ),
        });
    }

    let keyword = decode_keyword(&read_checked(dir, &manifest, KEYWORD)?)?;
    let ranges_bytes = read_checked(dir, &manifest, RANGES)?;
    let mut r = Reader::open(RANGES, &ranges_bytes, KIND_RANGES)?;
    let numeric = decode_range_index(&mut r)?;
    let temporal = decode_range_index(&mut r)?;
    r.finish()?;
    let spatial = decode_spatial(&read_checked(dir, &manifest, SPATIAL)?)?;
    let lsh = decode_lsh(&read_checked(dir, &manifest, LSH)?)?;

    let known = |id: &str| profiles.contains_key(id);
    let dangling = keyword
        .docs
        .keys()
        .find(|id| !known(id))
        .cloned()
        .or_else(|| {
            numeric
                .columns
                .keys()
                .chain(temporal.columns.keys())
                .chain(spatial.columns.keys())
                .chain(lsh.sketches.keys())
                .find(|(id, _)| !known(id))
                .map(|(id, _)| id.clone())
        });
    if let Some(id) = dangling {
        return Err(IndexError::Corrupt {
            file: dir.display().to_string(),
            reason: format!("entry references unregistered dataset {id}"),
        });
    }

    Ok(IndexShard {
        profiles,
        keyword,
        numeric,
        temporal,
        spatial,
        lsh,
        generation: manifest.generation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_codes_round_trip() {
        assert_eq!(resolution_from_code(resolution_code(None)), Some(None));
        for r in Resolution::ALL {
            assert_eq!(
                resolution_from_code(resolution_code(Some(r))),
                Some(Some(r))
            );
        }
        assert_eq!(resolution_from_code(200), None);
    }

    #[test]
    fn header_checks() {
        let w = Writer::new(KIND_LSH);
        assert!(matches!(
            Reader::open(LSH, &w.0, KIND_KEYWORD),
            Err(IndexError::Corrupt { .. })
        ));
        let mut bad = w.0.clone();
        bad[6] = 9;
        assert!(matches!(
            Reader::open(LSH, &bad, KIND_LSH),
            Err(IndexError::VersionUnsupported(9))
        ));
    }
}
