//! Column typing, statistics and summaries for one tabular dataset.

pub mod detect;
pub mod profile;
pub mod stats;
pub mod table;
pub mod temporal;
pub mod types;

use serde::{Deserialize, Serialize};

pub use detect::{detect_column_type, is_null, parse_number, DetectedColumn, ParsedValues};
pub use profile::{
    detect_spatial_pairs, profile_table, profile_table_with_overrides, ColumnProfile, DatasetMeta,
    DatasetProfile, ProfileError, SpatialCoverage, TopValue, PROFILE_VERSION,
};
pub use stats::NumericStats;
pub use table::{Column, TableData, TableError};
pub use temporal::{detect_temporal_resolution, parse_timestamp};
pub use types::{ColumnType, Resolution};

use crate::sketches::{DEFAULT_PERMUTATIONS, DEFAULT_SUMMARY_K};

fn default_null_literals() -> Vec<String> {
    ["", "na", "n/a", "null", "none", "-"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfilerConfig {
    /// Case-insensitive cell values treated as missing.
    pub null_literals: Vec<String>,
    /// Minimum share of non-null cells that must parse for a typed column.
    pub type_threshold: f64,
    /// Ranges (or boxes) per summary.
    pub summary_k: usize,
    /// MinHash signature length.
    pub permutations: usize,
    pub sample_rows: usize,
    pub top_values: usize,
}

impl Default for ProfilerConfig {
    fn default() -> Self {
        ProfilerConfig {
            null_literals: default_null_literals(),
            type_threshold: 0.90,
            summary_k: DEFAULT_SUMMARY_K,
            permutations: DEFAULT_PERMUTATIONS,
            sample_rows: 20,
            top_values: 10,
        }
    }
}
