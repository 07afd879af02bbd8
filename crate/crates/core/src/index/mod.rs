//! In-process indices over dataset profiles.
//!
//! One [`IndexShard`] holds the registered profiles together with a BM25
//! keyword index, interval lists for numeric and temporal summaries, a box
//! list for spatial coverage, and LSH band tables for categorical sketches.
//! Callers wanting concurrent access wrap the shard in a reader-writer lock.

pub mod keyword;
pub mod lsh;
pub mod persist;
pub mod ranges;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::profiler::{ColumnType, DatasetProfile};
use crate::sketches::{
    estimate_range_overlap, estimate_spatial_overlap, CategoricalSketch, ColumnSummary, GeoBox,
    RangeSummary, SpatialSummary, ValueRange,
};

pub use keyword::{tokenize, KeywordIndex};
pub use lsh::{LshIndex, LshParams};
pub use persist::{load, persist, INDEX_FORMAT_VERSION};
pub use ranges::{ColumnKey, RangeColumn, RangeIndex, SpatialColumn, SpatialIndex};

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("sketch on column '{column}' has {found} positions, index expects {expected}")]
    SignatureLengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("checksum mismatch in {0}")]
    ChecksumMismatch(String),
    #[error("unsupported index format version {0}")]
    VersionUnsupported(u32),
    #[error("no index found at {0}")]
    EmptyIndex(String),
    #[error("corrupt index file {file}: {reason}")]
    Corrupt { file: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A column whose range summary intersects a probe window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeHit {
    pub dataset_id: String,
    pub column: String,
    /// Share of the column's rows estimated to fall inside the window.
    pub overlap_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialHit {
    pub dataset_id: String,
    pub latitude: String,
    pub longitude: String,
    pub overlap_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexShard {
    pub(crate) profiles: BTreeMap<String, DatasetProfile>,
    pub(crate) keyword: KeywordIndex,
    pub(crate) numeric: RangeIndex,
    pub(crate) temporal: RangeIndex,
    pub(crate) spatial: SpatialIndex,
    pub(crate) lsh: LshIndex,
    pub(crate) generation: u64,
}

impl Default for IndexShard {
    fn default() -> Self {
        IndexShard::new(LshParams::default())
    }
}

fn window(lo: f64, hi: f64) -> RangeSummary<f64> {
    RangeSummary {
        ranges: vec![ValueRange { lo, hi, count: 1 }],
        total_count: 1,
    }
}

impl IndexShard {
    pub fn new(params: LshParams) -> Self {
        IndexShard {
            profiles: BTreeMap::new(),
            keyword: KeywordIndex::default(),
            numeric: RangeIndex::default(),
            temporal: RangeIndex::default(),
            spatial: SpatialIndex::default(),
            lsh: LshIndex::new(params),
            generation: 0,
        }
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn lsh_params(&self) -> LshParams {
        self.lsh.params()
    }

    pub fn get(&self, id: &str) -> Option<&DatasetProfile> {
        self.profiles.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.profiles.contains_key(id)
    }

    pub fn profiles(&self) -> impl Iterator<Item = &DatasetProfile> {
        self.profiles.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }

    /// Registers `profile`, replacing any dataset with the same id. Returns
    /// the new generation.
    pub fn add_dataset(&mut self, profile: DatasetProfile) -> Result<u64, IndexError> {
        let expected = self.lsh.params().signature_len();
        for c in &profile.columns {
            if let ColumnSummary::Categorical(s) = &c.summary {
                if !s.is_empty() && s.len() != expected {
                    return Err(IndexError::SignatureLengthMismatch {
                        column: c.name.clone(),
                        expected,
                        found: s.len(),
                    });
                }
            }
        }
        if self.profiles.contains_key(&profile.id) {
            self.unregister(&profile.id);
        }
        let id = profile.id.clone();
        let column_names: Vec<&str> = profile.columns.iter().map(|c| c.name.as_str()).collect();
        self.keyword
            .add(&id, &profile.name, &profile.description, &column_names);
        for c in &profile.columns {
            match (&c.summary, c.effective_type()) {
                (ColumnSummary::Numeric(s), ColumnType::Numerical) => {
                    self.numeric.insert(&id, &c.name, s.clone(), None);
                }
                (ColumnSummary::Temporal(t), _) => {
                    self.temporal
                        .insert(&id, &c.name, t.summary.clone(), Some(t.resolution));
                }
                (ColumnSummary::Categorical(s), _) => self.lsh.insert(&id, &c.name, s.clone()),
                _ => {}
            }
        }
        for cov in &profile.spatial_coverage {
            self.spatial
                .insert(&id, &cov.latitude, &cov.longitude, cov.summary.clone());
        }
        self.profiles.insert(id, profile);
        self.generation += 1;
        Ok(self.generation)
    }

    /// Removes every entry of `id`; returns the new generation when the id
    /// was registered.
    pub fn remove_dataset(&mut self, id: &str) -> Option<u64> {
        if !self.profiles.contains_key(id) {
            return None;
        }
        self.unregister(id);
        self.generation += 1;
        Some(self.generation)
    }

    fn unregister(&mut self, id: &str) {
        self.profiles.remove(id);
        self.keyword.remove(id);
        self.numeric.remove_dataset(id);
        self.temporal.remove_dataset(id);
        self.spatial.remove_dataset(id);
        self.lsh.remove_dataset(id);
    }

    pub fn query_keyword(&self, tokens: &[String]) -> Vec<(String, f64)> {
        self.keyword.query(tokens)
    }

    fn range_hits(index: &RangeIndex, lo: f64, hi: f64) -> Vec<RangeHit> {
        let w = window(lo, hi);
        index
            .probe(lo, hi)
            .into_iter()
            .map(|key| {
                let col = &index.columns[key];
                RangeHit {
                    dataset_id: key.0.clone(),
                    column: key.1.clone(),
                    overlap_fraction: estimate_range_overlap(&col.summary, &w),
                }
            })
            .collect()
    }

    /// Temporal columns whose summary intersects the closed window
    /// `[t0, t1]` (epoch seconds).
    pub fn query_temporal(&self, t0: i64, t1: i64) -> Vec<RangeHit> {
        Self::range_hits(&self.temporal, t0 as f64, t1 as f64)
    }

    pub fn query_numeric(&self, lo: f64, hi: f64) -> Vec<RangeHit> {
        Self::range_hits(&self.numeric, lo, hi)
    }

    pub fn query_spatial(&self, area: &GeoBox<f64>) -> Vec<SpatialHit> {
        let q = SpatialSummary {
            boxes: vec![GeoBox { count: 1, ..*area }],
            total_count: 1,
        };
        self.spatial
            .probe(area)
            .into_iter()
            .map(|key| {
                let col = &self.spatial.columns[key];
                SpatialHit {
                    dataset_id: key.0.clone(),
                    latitude: key.1.clone(),
                    longitude: col.longitude.clone(),
                    overlap_fraction: estimate_spatial_overlap(&col.summary, &q),
                }
            })
            .collect()
    }

    /// Candidate `(dataset_id, column)` pairs sharing at least one LSH band
    /// with `sketch`.
    pub fn query_lsh(&self, sketch: &CategoricalSketch) -> Vec<ColumnKey> {
        self.lsh.query(sketch)
    }

    pub fn numeric_index(&self) -> &RangeIndex {
        &self.numeric
    }

    pub fn temporal_index(&self) -> &RangeIndex {
        &self.temporal
    }

    pub fn spatial_index(&self) -> &SpatialIndex {
        &self.spatial
    }

    pub fn lsh_index(&self) -> &LshIndex {
        &self.lsh
    }
}
