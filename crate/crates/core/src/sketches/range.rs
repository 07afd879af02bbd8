use serde::{Deserialize, Serialize};

use super::kmeans::{distinct_weighted, optimal_segments};
use super::SketchError;
use crate::num::{clamp_unit, Scalar};

/// Closed interval `[lo, hi]` holding `count` of the summarized values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRange<T> {
    pub lo: T,
    pub hi: T,
    pub count: u64,
}

impl<T: Scalar> ValueRange<T> {
    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    /// Closed-interval intersection test; touching endpoints intersect.
    pub fn intersects(&self, lo: T, hi: T) -> bool {
        self.lo <= hi && lo <= self.hi
    }

    pub fn contains(&self, v: T) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn intersection_len(&self, other: &ValueRange<T>) -> T {
        (self.hi.min(other.hi) - self.lo.max(other.lo)).max(T::zero())
    }
}

/// Sorted, pairwise disjoint value ranges covering every summarized value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeSummary<T> {
    pub ranges: Vec<ValueRange<T>>,
    pub total_count: u64,
}

impl<T: Scalar> RangeSummary<T> {
    pub fn empty() -> Self {
        RangeSummary {
            ranges: Vec::new(),
            total_count: 0,
        }
    }

    /// Clusters the values into at most `k` ranges (fewer when there are
    /// fewer distinct values). Each cluster becomes `[min, max]` of its members.
    pub fn build(values: &[T], k: usize) -> Result<Self, SketchError> {
        if k == 0 {
            return Err(SketchError::InvalidK);
        }
        if values.is_empty() {
            return Err(SketchError::EmptyInput);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SketchError::NonFiniteValue);
        }
        let (distinct, counts) = distinct_weighted(values);
        let weights: Vec<T> = counts
            .iter()
            .map(|&c| T::from_u64(c).unwrap_or_else(T::one))
            .collect();
        let ranges = optimal_segments(&distinct, &weights, k)
            .into_iter()
            .map(|s| ValueRange {
                lo: distinct[s.start],
                hi: distinct[s.end],
                count: counts[s.start..=s.end].iter().sum(),
            })
            .collect();
        Ok(RangeSummary {
            ranges,
            total_count: values.len() as u64,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty() || self.total_count == 0
    }

    /// `(min lo, max hi)` over all ranges.
    pub fn extent(&self) -> Option<(T, T)> {
        Some((self.ranges.first()?.lo, self.ranges.last()?.hi))
    }

    pub fn intersects(&self, lo: T, hi: T) -> bool {
        self.ranges.iter().any(|r| r.intersects(lo, hi))
    }

    pub fn contains(&self, v: T) -> bool {
        self.ranges.iter().any(|r| r.contains(v))
    }

    pub fn convert<U: Scalar>(&self) -> RangeSummary<U> {
        RangeSummary {
            ranges: self
                .ranges
                .iter()
                .map(|r| ValueRange {
                    lo: U::from_f64_lossy(r.lo.to_f64_lossy()),
                    hi: U::from_f64_lossy(r.hi.to_f64_lossy()),
                    count: r.count,
                })
                .collect(),
            total_count: self.total_count,
        }
    }
}

/// Weighted share of the query's ranges covered by the candidate's ranges.
///
/// Each query range contributes `count / total` times the fraction of its
/// length covered by candidate ranges; point ranges count as fully covered
/// when they fall inside any candidate range. The measure is asymmetric.
pub fn estimate_range_overlap<T: Scalar>(
    query: &RangeSummary<T>,
    candidate: &RangeSummary<T>,
) -> T {
    if query.is_empty() || candidate.is_empty() {
        return T::zero();
    }
    let total = T::from_u64(query.total_count).unwrap_or_else(T::one);
    let mut acc = T::zero();
    for r in &query.ranges {
        let weight = T::from_u64(r.count).unwrap_or_else(T::one) / total;
        let coverage = if r.width() <= T::zero() {
            if candidate.contains(r.lo) {
                T::one()
            } else {
                T::zero()
            }
        } else {
            let covered = candidate
                .ranges
                .iter()
                .fold(T::zero(), |s, c| s + r.intersection_len(c));
            clamp_unit(covered / r.width())
        };
        acc += weight * coverage;
    }
    clamp_unit(acc)
}
