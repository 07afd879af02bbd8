//! Dataset search engine: profiles CSV tables into compact summaries,
//! indexes them, answers keyword, temporal, spatial, join and union
//! discovery queries, and materializes join/union augmentations.

pub mod augment;
pub mod config;
pub mod demo;
pub mod index;
pub mod ingest;
pub mod num;
pub mod profiler;
pub mod search;
pub mod sketches;

/// Range summary of a numeric column.
pub type NumericSummary = sketches::RangeSummary<f64>;
pub type NumericRange = sketches::ValueRange<f64>;
pub type GeoBox = sketches::GeoBox<f64>;
pub type GeoSummary = sketches::SpatialSummary<f64>;

/// Single-precision variants.
pub type NumericSummaryF32 = sketches::RangeSummary<f32>;
pub type GeoSummaryF32 = sketches::SpatialSummary<f32>;
