use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::ranges::ColumnKey;
use crate::sketches::hash::hash_u64s;
use crate::sketches::CategoricalSketch;

/// Banding of a MinHash signature: `bands * rows` positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LshParams {
    pub bands: usize,
    pub rows: usize,
}

impl Default for LshParams {
    fn default() -> Self {
        LshParams { bands: 32, rows: 4 }
    }
}

impl LshParams {
    /// 32 bands over a signature of `len` positions.
    pub fn for_signature_len(len: usize) -> Option<Self> {
        (len >= 32 && len % 32 == 0).then_some(LshParams {
            bands: 32,
            rows: len / 32,
        })
    }

    pub fn signature_len(&self) -> usize {
        self.bands * self.rows
    }

    /// Probability that a pair with Jaccard `s` shares at least one bucket.
    pub fn collision_probability(&self, s: f64) -> f64 {
        1.0 - (1.0 - s.powi(self.rows as i32)).powi(self.bands as i32)
    }

    pub fn band_keys(&self, signature: &[u64]) -> Vec<u64> {
        signature
            .chunks(self.rows)
            .take(self.bands)
            .enumerate()
            .map(|(band, rows)| {
                let mut words = Vec::with_capacity(rows.len() + 1);
                words.push(band as u64);
                words.extend_from_slice(rows);
                hash_u64s(&words)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LshIndex {
    pub(crate) params: LshParams,
    pub(crate) buckets: HashMap<u64, BTreeSet<ColumnKey>>,
    pub(crate) sketches: BTreeMap<ColumnKey, CategoricalSketch>,
}

impl LshIndex {
    pub fn new(params: LshParams) -> Self {
        LshIndex {
            params,
            ..Default::default()
        }
    }

    pub fn params(&self) -> LshParams {
        self.params
    }

    /// Empty sketches are not bucketed: they would all collide.
    pub fn insert(&mut self, dataset_id: &str, column: &str, sketch: CategoricalSketch) {
        if sketch.is_empty() {
            return;
        }
        let key = (dataset_id.to_string(), column.to_string());
        for b in self.params.band_keys(&sketch.signature) {
            self.buckets.entry(b).or_default().insert(key.clone());
        }
        self.sketches.insert(key, sketch);
    }

    pub fn remove_dataset(&mut self, dataset_id: &str) {
        let keys: Vec<ColumnKey> = self
            .sketches
            .keys()
            .filter(|(id, _)| id == dataset_id)
            .cloned()
            .collect();
        for key in keys {
            let sketch = self.sketches.remove(&key).expect("present");
            for b in self.params.band_keys(&sketch.signature) {
                if let Some(set) = self.buckets.get_mut(&b) {
                    set.remove(&key);
                    if set.is_empty() {
                        self.buckets.remove(&b);
                    }
                }
            }
        }
    }

    pub fn sketch(&self, dataset_id: &str, column: &str) -> Option<&CategoricalSketch> {
        self.sketches
            .get(&(dataset_id.to_string(), column.to_string()))
    }

    /// Union of all band-bucket collisions, unscored.
    pub fn query(&self, sketch: &CategoricalSketch) -> Vec<ColumnKey> {
        if sketch.is_empty() || sketch.signature.len() != self.params.signature_len() {
            return Vec::new();
        }
        let mut out: BTreeSet<&ColumnKey> = BTreeSet::new();
        for b in self.params.band_keys(&sketch.signature) {
            if let Some(set) = self.buckets.get(&b) {
                out.extend(set.iter());
            }
        }
        out.into_iter().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.sketches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sketches.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_curve_values() {
        let p = LshParams::default();
        assert_eq!(p.signature_len(), 128);
        assert!(p.collision_probability(0.8) > 0.999);
        assert!(p.collision_probability(0.05) < 3e-4);
        let mid = (1.0f64 / 32.0).powf(0.25);
        assert!((mid - 0.42).abs() < 0.01);
    }

    #[test]
    fn identical_sets_collide_in_every_band() {
        let mut idx = LshIndex::new(LshParams::default());
        let s = CategoricalSketch::from_values(["a", "b", "c"], 128);
        idx.insert("d1", "k", s.clone());
        idx.insert("d2", "key", s.clone());
        let hits = idx.query(&s);
        assert_eq!(hits.len(), 2);
        let keys = idx.params.band_keys(&s.signature);
        assert!(keys.iter().all(|k| idx.buckets[k].len() == 2));
        idx.remove_dataset("d1");
        assert_eq!(idx.query(&s), vec![("d2".to_string(), "key".to_string())]);
    }

    #[test]
    fn empty_sketch_not_indexed() {
        let mut idx = LshIndex::new(LshParams::default());
        idx.insert(
            "d",
            "c",
            CategoricalSketch::from_values(Vec::<String>::new(), 128),
        );
        assert!(idx.is_empty());
    }
}
