//! Column summaries and the overlap estimators used by join search.

pub mod hash;
pub mod kmeans;
pub mod minhash;
pub mod range;
pub mod spatial;

use serde::{Deserialize, Serialize};

use crate::profiler::Resolution;

pub use minhash::{
    estimate_cardinality, estimate_containment, estimate_jaccard, CategoricalSketch,
    DEFAULT_PERMUTATIONS,
};
pub use range::{estimate_range_overlap, RangeSummary, ValueRange};
pub use spatial::{estimate_spatial_overlap, GeoBox, SpatialSummary};

/// Default number of ranges/boxes per column.
pub const DEFAULT_SUMMARY_K: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SketchError {
    #[error("non-finite value in summary input")]
    NonFiniteValue,
    #[error("summary input is empty")]
    EmptyInput,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("coordinate outside [-90, 90] x [-180, 180]")]
    CoordinateOutOfRange,
    #[error("signature lengths differ ({left} vs {right})")]
    SignatureLengthMismatch { left: usize, right: usize },
}

/// Range summary over epoch seconds, tagged with the column's resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalSummary {
    pub summary: RangeSummary<f64>,
    pub resolution: Resolution,
}

impl TemporalSummary {
    pub fn build(
        timestamps: &[i64],
        k: usize,
        resolution: Resolution,
    ) -> Result<Self, SketchError> {
        let values: Vec<f64> = timestamps.iter().map(|&t| t as f64).collect();
        Ok(TemporalSummary {
            summary: RangeSummary::build(&values, k)?,
            resolution,
        })
    }
}

/// Per-column summary stored in a profile. Latitude/longitude pairs
/// additionally carry a [`SpatialSummary`] on the profile's spatial coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnSummary {
    Numeric(RangeSummary<f64>),
    Temporal(TemporalSummary),
    Categorical(CategoricalSketch),
}
