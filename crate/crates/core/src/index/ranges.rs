//! Sorted interval lists over range and box summaries.
//!
//! Every range of every indexed summary becomes one entry sorted by its lower
//! bound; a probe binary-searches the entries whose lower bound is at most
//! the probe's upper bound and filters on the upper bound. All intervals are
//! closed. The sorted view is rebuilt lazily after mutations.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use crate::profiler::Resolution;
use crate::sketches::{GeoBox, RangeSummary, SpatialSummary};

/// `(dataset_id, column)`; for spatial entries the column is the latitude
/// column and the longitude column is stored alongside.
pub type ColumnKey = (String, String);

#[derive(Debug, Clone, PartialEq)]
pub struct RangeColumn {
    pub summary: RangeSummary<f64>,
    pub resolution: Option<Resolution>,
}

#[derive(Debug, Default)]
struct SortedRanges {
    /// `(lo, hi, key index)` sorted by `lo`.
    entries: Vec<(f64, f64, u32)>,
    keys: Vec<ColumnKey>,
}

#[derive(Debug, Default)]
pub struct RangeIndex {
    pub(crate) columns: BTreeMap<ColumnKey, RangeColumn>,
    sorted: OnceLock<SortedRanges>,
}

impl Clone for RangeIndex {
    fn clone(&self) -> Self {
        RangeIndex {
            columns: self.columns.clone(),
            sorted: OnceLock::new(),
        }
    }
}

impl PartialEq for RangeIndex {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns
    }
}

impl RangeIndex {
    pub fn insert(
        &mut self,
        dataset_id: &str,
        column: &str,
        summary: RangeSummary<f64>,
        resolution: Option<Resolution>,
    ) {
        if summary.is_empty() {
            return;
        }
        self.columns.insert(
            (dataset_id.to_string(), column.to_string()),
            RangeColumn {
                summary,
                resolution,
            },
        );
        self.sorted = OnceLock::new();
    }

    pub fn remove_dataset(&mut self, dataset_id: &str) {
        let before = self.columns.len();
        self.columns.retain(|(id, _), _| id != dataset_id);
        if self.columns.len() != before {
            self.sorted = OnceLock::new();
        }
    }

    pub fn get(&self, dataset_id: &str, column: &str) -> Option<&RangeColumn> {
        self.columns
            .get(&(dataset_id.to_string(), column.to_string()))
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    fn sorted(&self) -> &SortedRanges {
        self.sorted.get_or_init(|| {
            let mut s = SortedRanges::default();
            for (i, (key, col)) in self.columns.iter().enumerate() {
                s.keys.push(key.clone());
                for r in &col.summary.ranges {
                    s.entries.push((r.lo, r.hi, i as u32));
                }
            }
            s.entries
                .sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
            s
        })
    }

    /// Columns with at least one summary range intersecting `[lo, hi]`.
    pub fn probe(&self, lo: f64, hi: f64) -> Vec<&ColumnKey> {
        let s = self.sorted();
        let end = s.entries.partition_point(|e| e.0 <= hi);
        let hits: BTreeSet<u32> = s.entries[..end]
            .iter()
            .filter(|e| e.1 >= lo)
            .map(|e| e.2)
            .collect();
        hits.into_iter().map(|i| &s.keys[i as usize]).collect()
    }

    /// Columns intersecting any range of `summary`.
    pub fn probe_summary(&self, summary: &RangeSummary<f64>) -> Vec<&ColumnKey> {
        let mut seen: BTreeSet<&ColumnKey> = BTreeSet::new();
        for r in &summary.ranges {
            seen.extend(self.probe(r.lo, r.hi));
        }
        seen.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialColumn {
    pub longitude: String,
    pub summary: SpatialSummary<f64>,
}

#[derive(Debug, Default)]
struct SortedBoxes {
    entries: Vec<(GeoBox<f64>, u32)>,
    keys: Vec<ColumnKey>,
}

#[derive(Debug, Default)]
pub struct SpatialIndex {
    pub(crate) columns: BTreeMap<ColumnKey, SpatialColumn>,
    sorted: OnceLock<SortedBoxes>,
}

impl Clone for SpatialIndex {
    fn clone(&self) -> Self {
        SpatialIndex {
            columns: self.columns.clone(),
            sorted: OnceLock::new(),
        }
    }
}

impl PartialEq for SpatialIndex {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns
    }
}

impl SpatialIndex {
    pub fn insert(
        &mut self,
        dataset_id: &str,
        latitude: &str,
        longitude: &str,
        summary: SpatialSummary<f64>,
    ) {
        if summary.is_empty() {
            return;
        }
        self.columns.insert(
            (dataset_id.to_string(), latitude.to_string()),
            SpatialColumn {
                longitude: longitude.to_string(),
                summary,
            },
        );
        self.sorted = OnceLock::new();
    }

    pub fn remove_dataset(&mut self, dataset_id: &str) {
        let before = self.columns.len();
        self.columns.retain(|(id, _), _| id != dataset_id);
        if self.columns.len() != before {
            self.sorted = OnceLock::new();
        }
    }

    pub fn get(&self, dataset_id: &str, latitude: &str) -> Option<&SpatialColumn> {
        self.columns
            .get(&(dataset_id.to_string(), latitude.to_string()))
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    fn sorted(&self) -> &SortedBoxes {
        self.sorted.get_or_init(|| {
            let mut s = SortedBoxes::default();
            for (i, (key, col)) in self.columns.iter().enumerate() {
                s.keys.push(key.clone());
                for b in &col.summary.boxes {
                    s.entries.push((*b, i as u32));
                }
            }
            s.entries
                .sort_by(|a, b| a.0.lat_min.total_cmp(&b.0.lat_min).then(a.1.cmp(&b.1)));
            s
        })
    }

    /// Spatial columns with at least one box intersecting `query`.
    pub fn probe(&self, query: &GeoBox<f64>) -> Vec<&ColumnKey> {
        let s = self.sorted();
        let end = s.entries.partition_point(|e| e.0.lat_min <= query.lat_max);
        let hits: BTreeSet<u32> = s.entries[..end]
            .iter()
            .filter(|e| e.0.intersects(query))
            .map(|e| e.1)
            .collect();
        hits.into_iter().map(|i| &s.keys[i as usize]).collect()
    }
}
