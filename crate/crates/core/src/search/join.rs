use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::index::IndexShard;
use crate::profiler::{ColumnType, DatasetProfile};
use crate::sketches::{
    estimate_containment, estimate_range_overlap, estimate_spatial_overlap, ColumnSummary,
};

/// Pairs scoring below this are treated as noise.
pub const JOIN_PAIR_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Categorical,
    Numeric,
    Temporal,
    Spatial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinPair {
    /// For spatial pairs, the latitude column.
    pub query_column: String,
    pub candidate_column: String,
    pub kind: PairKind,
    pub containment_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_longitude: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_longitude: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinCandidate {
    pub dataset_id: String,
    pub pairs: Vec<JoinPair>,
    pub join_score: f64,
}

fn push(by_dataset: &mut BTreeMap<String, Vec<JoinPair>>, dataset_id: &str, pair: JoinPair) {
    if pair.containment_score >= JOIN_PAIR_FLOOR {
        by_dataset
            .entry(dataset_id.to_string())
            .or_default()
            .push(pair);
    }
}

/// Every indexed dataset (other than the query itself) with at least one
/// column whose summary intersects a query column's summary and whose
/// estimated containment reaches [`JOIN_PAIR_FLOOR`].
pub fn join_search(query: &DatasetProfile, index: &IndexShard) -> Vec<JoinCandidate> {
    let mut by_dataset: BTreeMap<String, Vec<JoinPair>> = BTreeMap::new();
    for col in &query.columns {
        match (&col.summary, col.effective_type()) {
            (ColumnSummary::Categorical(sk), _) => {
                for (id, cand_col) in index.query_lsh(sk) {
                    let Some(cand) = index.lsh_index().sketch(&id, &cand_col) else {
                        continue;
                    };
                    let Ok(score) = estimate_containment(sk, cand) else {
                        continue;
                    };
                    let pair = JoinPair {
                        query_column: col.name.clone(),
                        candidate_column: cand_col,
                        kind: PairKind::Categorical,
                        containment_score: score,
                        query_longitude: None,
                        candidate_longitude: None,
                    };
                    push(&mut by_dataset, &id, pair);
                }
            }
            (ColumnSummary::Numeric(s), ColumnType::Numerical) => {
                let idx = index.numeric_index();
                for (id, cand_col) in idx.probe_summary(s) {
                    let cand = &idx
                        .get(id, cand_col)
                        .expect("probe returns indexed keys")
                        .summary;
                    let pair = JoinPair {
                        query_column: col.name.clone(),
                        candidate_column: cand_col.clone(),
                        kind: PairKind::Numeric,
                        containment_score: estimate_range_overlap(s, cand),
                        query_longitude: None,
                        candidate_longitude: None,
                    };
                    push(&mut by_dataset, id, pair);
                }
            }
            (ColumnSummary::Temporal(t), _) => {
                let idx = index.temporal_index();
                for (id, cand_col) in idx.probe_summary(&t.summary) {
                    let cand = &idx
                        .get(id, cand_col)
                        .expect("probe returns indexed keys")
                        .summary;
                    let pair = JoinPair {
                        query_column: col.name.clone(),
                        candidate_column: cand_col.clone(),
                        kind: PairKind::Temporal,
                        containment_score: estimate_range_overlap(&t.summary, cand),
                        query_longitude: None,
                        candidate_longitude: None,
                    };
                    push(&mut by_dataset, id, pair);
                }
            }
            _ => {}
        }
    }
    let spatial = index.spatial_index();
    for cov in &query.spatial_coverage {
        let mut seen = std::collections::BTreeSet::new();
        for b in &cov.summary.boxes {
            seen.extend(spatial.probe(b));
        }
        for (id, lat) in seen {
            let cand = spatial.get(id, lat).expect("probe returns indexed keys");
            let pair = JoinPair {
                query_column: cov.latitude.clone(),
                candidate_column: lat.clone(),
                kind: PairKind::Spatial,
                containment_score: estimate_spatial_overlap(&cov.summary, &cand.summary),
                query_longitude: Some(cov.longitude.clone()),
                candidate_longitude: Some(cand.longitude.clone()),
            };
            push(&mut by_dataset, id, pair);
        }
    }

    let mut out: Vec<JoinCandidate> = by_dataset
        .into_iter()
        .filter(|(id, _)| *id != query.id)
        .map(|(dataset_id, mut pairs)| {
            pairs.sort_by(|a, b| {
                b.containment_score
                    .total_cmp(&a.containment_score)
                    .then_with(|| a.query_column.cmp(&b.query_column))
                    .then_with(|| a.candidate_column.cmp(&b.candidate_column))
            });
            let join_score = pairs[0].containment_score;
            JoinCandidate {
                dataset_id,
                pairs,
                join_score,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.join_score
            .total_cmp(&a.join_score)
            .then_with(|| a.dataset_id.cmp(&b.dataset_id))
    });
    out
}
