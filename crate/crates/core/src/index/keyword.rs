//! BM25 over weighted dataset fields.
//!
//! ```text
//! score(D, Q) = sum_q idf(q) * tf(q, D) * (k1 + 1) / (tf(q, D) + k1 * (1 - b + b * |D| / avgdl))
//! idf(q)      = ln(1 + (N - df + 0.5) / (df + 0.5))
//! ```
//!
//! `tf` and `|D|` are field-weighted: a token in the name counts 3, in a
//! column name 2, in the description 1.

use std::collections::{BTreeMap, HashMap};

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;
pub const NAME_WEIGHT: f64 = 3.0;
pub const DESCRIPTION_WEIGHT: f64 = 1.0;
pub const COLUMN_WEIGHT: f64 = 2.0;

/// Lowercased runs of ASCII alphanumerics; everything else separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DocEntry {
    pub length: f64,
    /// Weighted term frequencies.
    pub terms: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeywordIndex {
    pub(crate) docs: BTreeMap<String, DocEntry>,
    pub(crate) postings: HashMap<String, BTreeMap<String, f64>>,
    pub(crate) total_length: f64,
}

impl KeywordIndex {
    pub fn add(&mut self, id: &str, name: &str, description: &str, column_names: &[&str]) {
        self.remove(id);
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        let mut length = 0.0;
        let mut feed = |text: &str, w: f64| {
            for t in tokenize(text) {
                *tf.entry(t).or_insert(0.0) += w;
                length += w;
            }
        };
        feed(name, NAME_WEIGHT);
        feed(description, DESCRIPTION_WEIGHT);
        for c in column_names {
            feed(c, COLUMN_WEIGHT);
        }
        for (t, f) in &tf {
            self.postings
                .entry(t.clone())
                .or_default()
                .insert(id.to_string(), *f);
        }
        self.total_length += length;
        self.docs.insert(
            id.to_string(),
            DocEntry {
                length,
                terms: tf.into_iter().collect(),
            },
        );
    }

    pub fn remove(&mut self, id: &str) {
        let Some(doc) = self.docs.remove(id) else {
            return;
        };
        self.total_length -= doc.length;
        for (t, _) in doc.terms {
            if let Some(p) = self.postings.get_mut(&t) {
                p.remove(id);
                if p.is_empty() {
                    self.postings.remove(&t);
                }
            }
        }
        if self.docs.is_empty() {
            self.total_length = 0.0;
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Documents containing any query token, by descending score then id.
    pub fn query(&self, tokens: &[String]) -> Vec<(String, f64)> {
        let mut terms: Vec<String> = tokens.iter().flat_map(|t| tokenize(t)).collect();
        terms.sort();
        terms.dedup();
        if terms.is_empty() || self.docs.is_empty() {
            return Vec::new();
        }
        let n = self.docs.len() as f64;
        let avgdl = (self.total_length / n).max(f64::MIN_POSITIVE);
        let mut scores: HashMap<&str, f64> = HashMap::new();
        for t in &terms {
            let Some(posting) = self.postings.get(t) else {
                continue;
            };
            let df = posting.len() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            for (id, tf) in posting {
                let dl = self.docs[id].length;
                let s = idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * dl / avgdl));
                *scores.entry(id.as_str()).or_insert(0.0) += s;
            }
        }
        let mut out: Vec<(String, f64)> = scores
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }
}
