use serde::{Deserialize, Serialize};

use super::query::{BoundingBox, Timestamp};
use crate::profiler::{ColumnType, DatasetProfile, TopValue};
use crate::sketches::ColumnSummary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnippetColumn {
    pub name: String,
    #[serde(rename = "type")]
    pub column_type: ColumnType,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub top_values: Vec<TopValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalExtent {
    pub start: Timestamp,
    pub end: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snippet {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub source: String,
    pub row_count: usize,
    pub columns: Vec<SnippetColumn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal_extent: Option<TemporalExtent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial_extent: Option<BoundingBox>,
    pub sample: Vec<Vec<String>>,
}

pub fn make_snippet(profile: &DatasetProfile) -> Snippet {
    let mut temporal: Option<(f64, f64)> = None;
    for c in &profile.columns {
        if let ColumnSummary::Temporal(t) = &c.summary {
            if let Some((lo, hi)) = t.summary.extent() {
                temporal = Some(match temporal {
                    None => (lo, hi),
                    Some((a, b)) => (a.min(lo), b.max(hi)),
                });
            }
        }
    }
    let mut spatial: Option<BoundingBox> = None;
    for cov in &profile.spatial_coverage {
        if let Some(e) = cov.summary.extent() {
            let b = BoundingBox::from_geo(&e);
            spatial = Some(match spatial {
                None => b,
                Some(s) => BoundingBox {
                    min: [s.min[0].min(b.min[0]), s.min[1].min(b.min[1])],
                    max: [s.max[0].max(b.max[0]), s.max[1].max(b.max[1])],
                },
            });
        }
    }
    Snippet {
        name: profile.name.clone(),
        description: profile.description.clone(),
        source: profile.source.clone(),
        row_count: profile.row_count,
        columns: profile
            .columns
            .iter()
            .map(|c| SnippetColumn {
                name: c.name.clone(),
                column_type: c.effective_type(),
                top_values: c.top_values.iter().take(10).cloned().collect(),
            })
            .collect(),
        temporal_extent: temporal.map(|(lo, hi)| TemporalExtent {
            start: Timestamp(lo as i64),
            end: Timestamp(hi as i64),
        }),
        spatial_extent: spatial,
        sample: profile.sample.iter().take(20).cloned().collect(),
    }
}
