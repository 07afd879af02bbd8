//! Multi-constraint dataset search.
//!
//! A query's active constraints each produce a hit set; the candidates are
//! their intersection. Candidates are then scored as
//!
//! ```text
//! total = (wk * keyword + wf * filter_overlap + wr * related) / (sum of weights of present parts)
//! ```
//!
//! where `keyword` is BM25 divided by the highest BM25 among all candidates,
//! `filter_overlap` is the mean over temporal/spatial/source/type filters
//! (temporal and spatial contribute the estimated share of the dataset's
//! rows inside the window; source and type contribute 1), and `related` is
//! the join or union score. Results are ordered by total descending, then
//! dataset id ascending.

pub mod gazetteer;
pub mod join;
pub mod query;
pub mod snippet;
pub mod union;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::index::IndexShard;
use crate::sketches::GeoBox;

pub use gazetteer::{Gazetteer, NamedArea};
pub use join::{join_search, JoinCandidate, JoinPair, PairKind, JOIN_PAIR_FLOOR};
pub use query::{
    BoundingBox, Page, Query, RelatedMode, RelatedQuery, SpatialFilter, TemporalFilter, Timestamp,
};
pub use snippet::{make_snippet, Snippet, SnippetColumn, TemporalExtent};
pub use union::{
    fold_name, levenshtein, match_columns, name_similarity, union_candidate, union_search,
    ColumnPair, UnionCandidate, NAME_SIMILARITY_THRESHOLD,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("query has no keywords, filters or related dataset")]
    EmptyQuery,
    #[error("unknown named area '{0}'")]
    UnknownNamedArea(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

impl SearchError {
    pub fn code(&self) -> &'static str {
        match self {
            SearchError::EmptyQuery => "EmptyQuery",
            SearchError::UnknownNamedArea(_) => "UnknownNamedArea",
            SearchError::InvalidQuery(_) => "InvalidQuery",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchWeights {
    pub keyword: f64,
    pub filters: f64,
    pub related: f64,
}

impl Default for SearchWeights {
    fn default() -> Self {
        SearchWeights {
            keyword: 0.5,
            filters: 0.2,
            related: 0.3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    /// BM25 divided by the best BM25 among candidates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyword: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyword_bm25: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_overlap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub join: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub union: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Augmentation {
    Join(JoinCandidate),
    Union(UnionCandidate),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub dataset_id: String,
    pub total_score: f64,
    pub score_breakdown: ScoreBreakdown,
    pub snippet: Snippet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<Augmentation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPage {
    pub results: Vec<SearchResult>,
    /// Number of matching datasets across all pages.
    pub total: usize,
}

/// Resolves the query's spatial filter to a box.
pub fn resolve_spatial(
    filter: &SpatialFilter,
    gazetteer: &Gazetteer,
) -> Result<GeoBox<f64>, SearchError> {
    let b = match filter {
        SpatialFilter::Bbox(b) => b.to_geo(),
        SpatialFilter::NamedArea(name) => gazetteer
            .lookup(name)
            .ok_or_else(|| SearchError::UnknownNamedArea(name.clone()))?
            .bbox
            .to_geo(),
    };
    if !b.is_valid() || b.lat_min > b.lat_max || b.lon_min > b.lon_max {
        return Err(SearchError::InvalidQuery(
            "bounding box must satisfy min <= max within [-90, 90] x [-180, 180]".into(),
        ));
    }
    Ok(b)
}

fn intersect(acc: &mut Option<BTreeSet<String>>, hits: BTreeSet<String>) {
    *acc = Some(match acc.take() {
        None => hits,
        Some(prev) => prev.intersection(&hits).cloned().collect(),
    });
}

fn max_by_dataset(hits: impl IntoIterator<Item = (String, f64)>) -> HashMap<String, f64> {
    let mut m: HashMap<String, f64> = HashMap::new();
    for (id, v) in hits {
        let e = m.entry(id).or_insert(v);
        *e = e.max(v);
    }
    m
}

/// Evaluates `q` against `index` and returns the requested page.
pub fn execute_query(
    q: &Query,
    index: &IndexShard,
    weights: &SearchWeights,
    gazetteer: &Gazetteer,
) -> Result<SearchPage, SearchError> {
    if q.is_empty() {
        return Err(SearchError::EmptyQuery);
    }
    let mut candidates: Option<BTreeSet<String>> = None;
    // Per filter: dataset id -> overlap contribution.
    let mut filter_scores: Vec<HashMap<String, f64>> = Vec::new();

    let tokens = q.keyword_tokens();
    let keyword_scores: HashMap<String, f64> = if tokens.is_empty() {
        HashMap::new()
    } else {
        let hits = index.query_keyword(&tokens);
        intersect(&mut candidates, hits.iter().map(|h| h.0.clone()).collect());
        hits.into_iter().collect()
    };

    if let Some(t) = &q.temporal {
        if t.start > t.end {
            return Err(SearchError::InvalidQuery(
                "temporal start is after end".into(),
            ));
        }
        let hits = index
            .query_temporal(t.start.0, t.end.0)
            .into_iter()
            .filter(|h| match t.resolution {
                None => true,
                Some(want) => index
                    .temporal_index()
                    .get(&h.dataset_id, &h.column)
                    .and_then(|c| c.resolution)
                    .is_some_and(|r| r <= want),
            });
        let m = max_by_dataset(hits.map(|h| (h.dataset_id, h.overlap_fraction)));
        intersect(&mut candidates, m.keys().cloned().collect());
        filter_scores.push(m);
    }

    if let Some(s) = &q.spatial {
        let b = resolve_spatial(s, gazetteer)?;
        let m = max_by_dataset(
            index
                .query_spatial(&b)
                .into_iter()
                .map(|h| (h.dataset_id, h.overlap_fraction)),
        );
        intersect(&mut candidates, m.keys().cloned().collect());
        filter_scores.push(m);
    }

    if let Some(sources) = q.active_sources() {
        let m: HashMap<String, f64> = index
            .profiles()
            .filter(|p| sources.contains(&p.source))
            .map(|p| (p.id.clone(), 1.0))
            .collect();
        intersect(&mut candidates, m.keys().cloned().collect());
        filter_scores.push(m);
    }

    if let Some(types) = q.active_types() {
        let m: HashMap<String, f64> = index
            .profiles()
            .filter(|p| types.iter().all(|t| p.has_type(*t)))
            .map(|p| (p.id.clone(), 1.0))
            .collect();
        intersect(&mut candidates, m.keys().cloned().collect());
        filter_scores.push(m);
    }

    let mut joins: BTreeMap<String, JoinCandidate> = BTreeMap::new();
    let mut unions: BTreeMap<String, UnionCandidate> = BTreeMap::new();
    if let Some(rel) = &q.related {
        if rel.profile.columns.is_empty() {
            return Err(SearchError::InvalidQuery(
                "related dataset has no columns".into(),
            ));
        }
        if matches!(rel.mode, RelatedMode::Join | RelatedMode::Either) {
            joins = join_search(&rel.profile, index)
                .into_iter()
                .map(|c| (c.dataset_id.clone(), c))
                .collect();
        }
        if matches!(rel.mode, RelatedMode::Union | RelatedMode::Either) {
            unions = union_search(&rel.profile, index)
                .into_iter()
                .map(|c| (c.dataset_id.clone(), c))
                .collect();
        }
        let mut ids: BTreeSet<String> = joins.keys().cloned().collect();
        ids.extend(unions.keys().cloned());
        ids.remove(&rel.profile.id);
        intersect(&mut candidates, ids);
    }

    let candidates = candidates.unwrap_or_default();
    let best_bm25 = candidates
        .iter()
        .filter_map(|id| keyword_scores.get(id))
        .fold(0.0f64, |a, b| a.max(*b));

    let mut results: Vec<SearchResult> = Vec::with_capacity(candidates.len());
    for id in candidates {
        let Some(profile) = index.get(&id) else {
            continue;
        };
        let mut breakdown = ScoreBreakdown::default();
        let mut weighted = 0.0;
        let mut weight_sum = 0.0;
        if !tokens.is_empty() {
            let raw = keyword_scores.get(&id).copied().unwrap_or(0.0);
            let norm = if best_bm25 > 0.0 {
                raw / best_bm25
            } else {
                0.0
            };
            breakdown.keyword = Some(norm);
            breakdown.keyword_bm25 = Some(raw);
            weighted += weights.keyword * norm;
            weight_sum += weights.keyword;
        }
        if !filter_scores.is_empty() {
            let mean = filter_scores
                .iter()
                .map(|m| m.get(&id).copied().unwrap_or(0.0))
                .sum::<f64>()
                / filter_scores.len() as f64;
            breakdown.filter_overlap = Some(mean);
            weighted += weights.filters * mean;
            weight_sum += weights.filters;
        }
        let mut augmentation = None;
        if let Some(rel) = &q.related {
            let j = joins.get(&id);
            let u = unions.get(&id);
            breakdown.join = j.map(|c| c.join_score);
            breakdown.union = u.map(|c| c.union_score);
            let js = breakdown.join.unwrap_or(0.0);
            let us = breakdown.union.unwrap_or(0.0);
            augmentation = match (j, u, rel.mode) {
                (Some(j), _, RelatedMode::Join) => Some(Augmentation::Join(j.clone())),
                (_, Some(u), RelatedMode::Union) => Some(Augmentation::Union(u.clone())),
                (Some(j), Some(u), RelatedMode::Either) => Some(if js >= us {
                    Augmentation::Join(j.clone())
                } else {
                    Augmentation::Union(u.clone())
                }),
                (Some(j), None, _) => Some(Augmentation::Join(j.clone())),
                (None, Some(u), _) => Some(Augmentation::Union(u.clone())),
                (None, None, _) => None,
            };
            weighted += weights.related * js.max(us);
            weight_sum += weights.related;
        }
        let total_score = if weight_sum > 0.0 {
            weighted / weight_sum
        } else {
            0.0
        };
        results.push(SearchResult {
            dataset_id: id,
            total_score,
            score_breakdown: breakdown,
            snippet: make_snippet(profile),
            augmentation,
        });
    }
    results.sort_by(|a, b| {
        b.total_score
            .total_cmp(&a.total_score)
            .then_with(|| a.dataset_id.cmp(&b.dataset_id))
    });
    let total = results.len();
    let limit = q.page.limit.min(query::MAX_PAGE_LIMIT);
    let results = results
        .into_iter()
        .skip(q.page.offset)
        .take(limit)
        .collect();
    Ok(SearchPage { results, total })
}

/// [`execute_query`] with default weights and the bundled gazetteer.
pub fn search(q: &Query, index: &IndexShard) -> Result<SearchPage, SearchError> {
    execute_query(q, index, &SearchWeights::default(), Gazetteer::bundled())
}
