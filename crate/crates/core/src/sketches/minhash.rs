//! MinHash signatures for categorical columns and the overlap estimators
//! built on them.

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::hash::{fmix64, hash_bytes, splitmix64};
use super::SketchError;

pub const DEFAULT_PERMUTATIONS: usize = 128;

/// Above this many distinct values the cardinality is estimated from the
/// signature instead of counted.
pub const EXACT_DISTINCT_LIMIT: usize = 100_000;

const SEED_ROOT: u64 = 0x5eed_da7a_5e7_c0de;

fn global_seeds() -> &'static [u64] {
    static SEEDS: OnceLock<Vec<u64>> = OnceLock::new();
    SEEDS.get_or_init(|| {
        let mut state = SEED_ROOT;
        (0..1024).map(|_| splitmix64(&mut state)).collect()
    })
}

/// Fixed per-position seeds; identical across datasets and processes.
pub fn permutation_seeds(n: usize) -> Vec<u64> {
    let seeds = global_seeds();
    if n <= seeds.len() {
        return seeds[..n].to_vec();
    }
    let mut state = SEED_ROOT ^ 0xffff;
    seeds
        .iter()
        .copied()
        .chain(std::iter::repeat_with(move || splitmix64(&mut state)))
        .take(n)
        .collect()
}

/// Case-fold and trim, the normalization applied before hashing.
pub fn normalize_value(v: &str) -> String {
    v.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalSketch {
    #[serde(with = "u64_strings")]
    pub signature: Vec<u64>,
    pub cardinality: u64,
}

impl CategoricalSketch {
    /// Builds a signature over the normalized distinct values. Order and
    /// multiplicity of the input do not matter.
    pub fn from_values<I, S>(values: I, permutations: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let seeds = permutation_seeds(permutations);
        let mut signature = vec![u64::MAX; permutations];
        let mut distinct: HashSet<u64> = HashSet::new();
        let mut overflowed = false;
        for v in values {
            let base = hash_bytes(normalize_value(v.as_ref()).as_bytes());
            if !overflowed {
                if !distinct.insert(base) {
                    continue;
                }
                if distinct.len() > EXACT_DISTINCT_LIMIT {
                    overflowed = true;
                    distinct = HashSet::new();
                }
            }
            for (slot, seed) in signature.iter_mut().zip(&seeds) {
                let h = fmix64(base ^ seed);
                if h < *slot {
                    *slot = h;
                }
            }
        }
        let cardinality = if overflowed {
            estimate_cardinality(&signature)
        } else {
            distinct.len() as u64
        };
        CategoricalSketch {
            signature,
            cardinality,
        }
    }

    pub fn len(&self) -> usize {
        self.signature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cardinality == 0
    }
}

/// Distinct-count estimate from the mean of normalized minima.
pub fn estimate_cardinality(signature: &[u64]) -> u64 {
    if signature.is_empty() || signature.iter().all(|&h| h == u64::MAX) {
        return 0;
    }
    let sum: f64 = signature
        .iter()
        .map(|&h| h as f64 / 18_446_744_073_709_551_616.0)
        .sum();
    if sum <= 0.0 {
        return u64::MAX;
    }
    let n = signature.len() as f64 / sum - 1.0;
    n.max(1.0).round() as u64
}

/// Fraction of signature positions holding the same minimum.
pub fn estimate_jaccard(a: &CategoricalSketch, b: &CategoricalSketch) -> Result<f64, SketchError> {
    if a.signature.len() != b.signature.len() {
        return Err(SketchError::SignatureLengthMismatch {
            left: a.signature.len(),
            right: b.signature.len(),
        });
    }
    if a.signature.is_empty() {
        return Ok(0.0);
    }
    let same = a
        .signature
        .iter()
        .zip(&b.signature)
        .filter(|(x, y)| x == y)
        .count();
    Ok(same as f64 / a.signature.len() as f64)
}

/// Share of the query's distinct values expected in the candidate, derived
/// from the Jaccard estimate and both cardinalities:
/// `|A ∩ B| ≈ J (|A| + |B|) / (1 + J)`, divided by `|A|` and clamped.
pub fn estimate_containment(
    query: &CategoricalSketch,
    candidate: &CategoricalSketch,
) -> Result<f64, SketchError> {
    let j = estimate_jaccard(query, candidate)?;
    if query.cardinality == 0 || candidate.cardinality == 0 {
        return Ok(0.0);
    }
    let a = query.cardinality as f64;
    let b = candidate.cardinality as f64;
    let intersection = j * (a + b) / (1.0 + j);
    Ok(crate::num::clamp_unit(intersection / a))
}

mod u64_strings {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u64>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(d)?;
        raw.iter()
            .map(|s| s.parse::<u64>().map_err(D::Error::custom))
            .collect()
    }
}
