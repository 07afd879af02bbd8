use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::index::IndexShard;
use crate::profiler::{ColumnType, DatasetProfile};

/// Minimum name similarity for two same-typed columns to be paired.
pub const NAME_SIMILARITY_THRESHOLD: f64 = 0.4;

/// Lowercase, trim, and collapse runs of whitespace, `_` and `-` into one `_`.
pub fn fold_name(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_sep = false;
    for c in s.trim().chars() {
        if c.is_whitespace() || c == '_' || c == '-' {
            pending_sep = true;
            continue;
        }
        if pending_sep && !out.is_empty() {
            out.push('_');
        }
        pending_sep = false;
        out.extend(c.to_lowercase());
    }
    out
}

/// Edit distance over Unicode scalar values (insert, delete, substitute).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - lev(fold(a), fold(b)) / max(|fold(a)|, |fold(b)|)`; two names that
/// fold to empty are identical.
pub fn name_similarity(a: &str, b: &str) -> f64 {
    let (fa, fb) = (fold_name(a), fold_name(b));
    let longest = fa.chars().count().max(fb.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&fa, &fb) as f64 / longest as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnPair {
    pub query_column: String,
    pub candidate_column: String,
    pub column_type: ColumnType,
    pub name_similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionCandidate {
    pub dataset_id: String,
    pub column_pairs: Vec<ColumnPair>,
    pub union_score: f64,
    pub matched_fraction: f64,
}

/// Greedy one-to-one matching of same-typed columns by descending name
/// similarity (ties: query column name, then candidate column name).
pub fn match_columns(query: &DatasetProfile, candidate: &DatasetProfile) -> Vec<ColumnPair> {
    let mut edges = Vec::new();
    for q in &query.columns {
        for c in &candidate.columns {
            let ty = q.effective_type();
            if ty != c.effective_type() {
                continue;
            }
            let sim = name_similarity(&q.name, &c.name);
            if sim >= NAME_SIMILARITY_THRESHOLD {
                edges.push(ColumnPair {
                    query_column: q.name.clone(),
                    candidate_column: c.name.clone(),
                    column_type: ty,
                    name_similarity: sim,
                });
            }
        }
    }
    edges.sort_by(|a, b| {
        b.name_similarity
            .total_cmp(&a.name_similarity)
            .then_with(|| a.query_column.cmp(&b.query_column))
            .then_with(|| a.candidate_column.cmp(&b.candidate_column))
    });
    let mut used_q = BTreeSet::new();
    let mut used_c = BTreeSet::new();
    let mut pairs = Vec::new();
    for e in edges {
        if used_q.contains(&e.query_column) || used_c.contains(&e.candidate_column) {
            continue;
        }
        used_q.insert(e.query_column.clone());
        used_c.insert(e.candidate_column.clone());
        pairs.push(e);
    }
    pairs
}

pub fn union_candidate(
    query: &DatasetProfile,
    candidate: &DatasetProfile,
) -> Option<UnionCandidate> {
    let column_pairs = match_columns(query, candidate);
    if column_pairs.is_empty() || query.columns.is_empty() {
        return None;
    }
    let n = column_pairs.len() as f64;
    // Unmatched query columns count as similarity 0, so a candidate covering
    // more of the query's schema ranks higher.
    Some(UnionCandidate {
        dataset_id: candidate.id.clone(),
        union_score: column_pairs.iter().map(|p| p.name_similarity).sum::<f64>()
            / query.columns.len() as f64,
        matched_fraction: n / query.columns.len() as f64,
        column_pairs,
    })
}

/// Indexed datasets (other than the query itself) with at least one
/// matched column, by descending union score then id.
pub fn union_search(query: &DatasetProfile, index: &IndexShard) -> Vec<UnionCandidate> {
    let mut out: Vec<UnionCandidate> = index
        .profiles()
        .filter(|p| p.id != query.id)
        .filter_map(|p| union_candidate(query, p))
        .collect();
    out.sort_by(|a, b| {
        b.union_score
            .total_cmp(&a.union_score)
            .then_with(|| a.dataset_id.cmp(&b.dataset_id))
    });
    out
}
