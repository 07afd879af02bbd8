use serde::{Deserialize, Serialize};

use crate::num::Scalar;

/// Mean, population variance and extremes of a numeric column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericStats<T> {
    pub mean: T,
    pub variance: T,
    pub min: T,
    pub max: T,
    pub count: usize,
}

impl<T: Scalar> NumericStats<T> {
    /// Single-pass (Welford) accumulation. Returns `None` for an empty input.
    pub fn from_values<I: IntoIterator<Item = T>>(values: I) -> Option<Self> {
        let mut count = 0usize;
        let mut mean = T::zero();
        let mut m2 = T::zero();
        let mut min = T::infinity();
        let mut max = T::neg_infinity();
        for v in values {
            count += 1;
            let delta = v - mean;
            mean += delta / T::from_usize_lossy(count);
            m2 += delta * (v - mean);
            min = min.min(v);
            max = max.max(v);
        }
        if count == 0 {
            return None;
        }
        Some(NumericStats {
            mean: mean.max(min).min(max),
            variance: (m2 / T::from_usize_lossy(count)).max(T::zero()),
            min,
            max,
            count,
        })
    }
}
