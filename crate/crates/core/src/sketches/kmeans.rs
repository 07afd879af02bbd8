//! Deterministic k-means used to carve columns into value ranges and boxes.
//!
//! One dimension is solved exactly: the optimal partition of sorted values
//! into contiguous groups is found by dynamic programming with the
//! divide-and-conquer split-point optimization (valid because optimal split
//! points are monotone for the squared-error cost). Two dimensions use
//! Lloyd iterations from a deterministic quantile initialization.

use crate::num::Scalar;

pub const MAX_LLOYD_ITERATIONS: usize = 100;

/// A contiguous run `[start, end]` (inclusive) of the sorted distinct values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

/// Weighted prefix sums over centered values, giving O(1) segment costs.
struct PrefixCost<T> {
    w: Vec<T>,
    s1: Vec<T>,
    s2: Vec<T>,
}

impl<T: Scalar> PrefixCost<T> {
    fn new(values: &[T], weights: &[T]) -> Self {
        let center = values[values.len() / 2];
        let n = values.len();
        let (mut w, mut s1, mut s2) = (
            vec![T::zero(); n + 1],
            vec![T::zero(); n + 1],
            vec![T::zero(); n + 1],
        );
        for i in 0..n {
            let x = values[i] - center;
            w[i + 1] = w[i] + weights[i];
            s1[i + 1] = s1[i] + weights[i] * x;
            s2[i + 1] = s2[i] + weights[i] * x * x;
        }
        PrefixCost { w, s1, s2 }
    }

    /// Within-segment sum of squared deviations for `[i, j]`.
    fn cost(&self, i: usize, j: usize) -> T {
        let w = self.w[j + 1] - self.w[i];
        if w <= T::zero() {
            return T::zero();
        }
        let s1 = self.s1[j + 1] - self.s1[i];
        let s2 = self.s2[j + 1] - self.s2[i];
        (s2 - s1 * s1 / w).max(T::zero())
    }
}

/// Optimal partition of `values` (sorted ascending, distinct) with positive
/// `weights` into exactly `min(k, values.len())` contiguous segments.
pub fn optimal_segments<T: Scalar>(values: &[T], weights: &[T], k: usize) -> Vec<Segment> {
    assert_eq!(values.len(), weights.len());
    let n = values.len();
    if n == 0 || k == 0 {
        return Vec::new();
    }
    let k = k.min(n);
    let cost = PrefixCost::new(values, weights);
    let mut prev: Vec<T> = (0..n).map(|j| cost.cost(0, j)).collect();
    // split[m][j]: first index of the last segment when covering [0, j] with m+1 segments.
    let mut split: Vec<Vec<usize>> = vec![vec![0; n]];
    for m in 1..k {
        let mut cur = vec![T::infinity(); n];
        let mut opt = vec![0usize; n];
        solve_layer(&cost, &prev, &mut cur, &mut opt, m, m, n - 1, m, n - 1);
        prev = cur;
        split.push(opt);
    }
    let mut segments = Vec::with_capacity(k);
    let mut end = n - 1;
    for m in (0..k).rev() {
        let start = if m == 0 { 0 } else { split[m][end] };
        segments.push(Segment { start, end });
        if m > 0 {
            end = start - 1;
        }
    }
    segments.reverse();
    segments
}

#[allow(clippy::too_many_arguments)]
fn solve_layer<T: Scalar>(
    cost: &PrefixCost<T>,
    prev: &[T],
    cur: &mut [T],
    opt: &mut [usize],
    m: usize,
    lo: usize,
    hi: usize,
    opt_lo: usize,
    opt_hi: usize,
) {
    if lo > hi {
        return;
    }
    let mid = lo + (hi - lo) / 2;
    let mut best = T::infinity();
    let mut best_i = opt_lo.max(m);
    let upper = opt_hi.min(mid);
    for i in opt_lo.max(m)..=upper {
        let c = prev[i - 1] + cost.cost(i, mid);
        if c < best {
            best = c;
            best_i = i;
        }
    }
    cur[mid] = best;
    opt[mid] = best_i;
    if mid > lo {
        solve_layer(cost, prev, cur, opt, m, lo, mid - 1, opt_lo, best_i);
    }
    solve_layer(cost, prev, cur, opt, m, mid + 1, hi, best_i, opt_hi);
}

/// Sorted distinct values with multiplicities.
pub fn distinct_weighted<T: Scalar>(values: &[T]) -> (Vec<T>, Vec<u64>) {
    let mut sorted: Vec<T> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mut distinct: Vec<T> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    for v in sorted {
        match distinct.last() {
            Some(last) if *last == v => *counts.last_mut().unwrap() += 1,
            _ => {
                distinct.push(v);
                counts.push(1);
            }
        }
    }
    (distinct, counts)
}

/// Result of 2-D clustering: member indices into the distinct points.
pub struct PointClusters<T> {
    pub points: Vec<(T, T)>,
    pub weights: Vec<u64>,
    pub assignment: Vec<usize>,
    pub clusters: usize,
}

/// Lloyd's algorithm on distinct 2-D points. Initial centroids are the
/// points at evenly spaced quantiles of the lexicographic order; ties in
/// assignment go to the lowest centroid index; empty clusters keep their
/// previous centroid.
pub fn lloyd_2d<T: Scalar>(points: &[(T, T)], k: usize) -> PointClusters<T> {
    let mut sorted: Vec<(T, T)> = points.to_vec();
    sorted.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite")
            .then(a.1.partial_cmp(&b.1).expect("finite"))
    });
    let mut distinct: Vec<(T, T)> = Vec::new();
    let mut weights: Vec<u64> = Vec::new();
    for p in sorted {
        match distinct.last() {
            Some(last) if *last == p => *weights.last_mut().unwrap() += 1,
            _ => {
                distinct.push(p);
                weights.push(1);
            }
        }
    }
    let d = distinct.len();
    let k = k.min(d);
    if k == 0 {
        return PointClusters {
            points: distinct,
            weights,
            assignment: Vec::new(),
            clusters: 0,
        };
    }
    let mut centroids: Vec<(T, T)> = (0..k)
        .map(|i| distinct[((2 * i + 1) * d) / (2 * k)])
        .collect();
    let mut assignment = vec![usize::MAX; d];
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        for (p, slot) in distinct.iter().zip(assignment.iter_mut()) {
            let mut best = 0usize;
            let mut best_d = T::infinity();
            for (ci, c) in centroids.iter().enumerate() {
                let dl = p.0 - c.0;
                let dn = p.1 - c.1;
                let dist = dl * dl + dn * dn;
                if dist < best_d {
                    best_d = dist;
                    best = ci;
                }
            }
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![(T::zero(), T::zero(), T::zero()); k];
        for ((p, w), &a) in distinct.iter().zip(&weights).zip(&assignment) {
            let w = T::from_u64(*w).unwrap_or_else(T::one);
            sums[a].0 += p.0 * w;
            sums[a].1 += p.1 * w;
            sums[a].2 += w;
        }
        for (c, s) in centroids.iter_mut().zip(&sums) {
            if s.2 > T::zero() {
                *c = (s.0 / s.2, s.1 / s.2);
            }
        }
    }
    PointClusters {
        points: distinct,
        weights,
        assignment,
        clusters: k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sse(values: &[f64], weights: &[f64], segs: &[Segment]) -> f64 {
        segs.iter()
            .map(|s| {
                let w: f64 = weights[s.start..=s.end].iter().sum();
                let mean = (s.start..=s.end)
                    .map(|i| values[i] * weights[i])
                    .sum::<f64>()
                    / w;
                (s.start..=s.end)
                    .map(|i| weights[i] * (values[i] - mean).powi(2))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Brute force over every way to cut `n` sorted values into `k` runs.
    fn brute_best(values: &[f64], weights: &[f64], k: usize) -> f64 {
        let n = values.len();
        let k = k.min(n);
        let mut best = f64::INFINITY;
        let mut cuts = Vec::new();
        fn rec(
            start: usize,
            left: usize,
            n: usize,
            cuts: &mut Vec<usize>,
            f: &mut dyn FnMut(&[usize]),
        ) {
            if left == 1 {
                f(cuts);
                return;
            }
            for c in start + 1..n {
                if n - c >= left - 1 {
                    cuts.push(c);
                    rec(c, left - 1, n, cuts, f);
                    cuts.pop();
                }
            }
        }
        rec(0, k, n, &mut cuts, &mut |cuts: &[usize]| {
            let mut segs = Vec::new();
            let mut s = 0;
            for &c in cuts {
                segs.push(Segment {
                    start: s,
                    end: c - 1,
                });
                s = c;
            }
            segs.push(Segment {
                start: s,
                end: n - 1,
            });
            best = best.min(sse(values, weights, &segs));
        });
        best
    }

    #[test]
    fn two_obvious_groups() {
        let v = [1.0, 2.0, 3.0, 100.0, 101.0, 102.0];
        let w = [1.0; 6];
        let segs = optimal_segments(&v, &w, 2);
        assert_eq!(
            segs,
            vec![Segment { start: 0, end: 2 }, Segment { start: 3, end: 5 }]
        );
    }

    #[test]
    fn k_larger_than_n() {
        let segs = optimal_segments(&[5.0f64], &[3.0], 4);
        assert_eq!(segs, vec![Segment { start: 0, end: 0 }]);
    }

    #[test]
    fn lloyd_two_cities() {
        let mut pts = Vec::new();
        for i in 0..20 {
            let e = i as f64 * 0.001;
            pts.push((40.7 + e, -74.0 - e));
            pts.push((34.05 - e, -118.24 + e));
        }
        let c = lloyd_2d(&pts, 2);
        assert_eq!(c.clusters, 2);
        for (p, &a) in c.points.iter().zip(&c.assignment) {
            let expected = if p.0 > 37.0 {
                c.assignment[c.points.len() - 1]
            } else {
                c.assignment[0]
            };
            assert_eq!(a, expected);
        }
        assert_ne!(c.assignment[0], c.assignment[c.points.len() - 1]);
    }

    proptest! {
        #[test]
        fn dp_matches_brute_force(
            raw in prop::collection::btree_map(-50i32..50, 1u32..4, 1..=12),
            k in 1usize..=3,
        ) {
            let values: Vec<f64> = raw.keys().map(|&v| v as f64).collect();
            let weights: Vec<f64> = raw.values().map(|&w| w as f64).collect();
            let segs = optimal_segments(&values, &weights, k);
            prop_assert_eq!(segs.len(), k.min(values.len()));
            let got = sse(&values, &weights, &segs);
            let best = brute_best(&values, &weights, k);
            prop_assert!((got - best).abs() <= 1e-9 * best.max(1.0), "got {} best {}", got, best);
        }

        #[test]
        fn dp_larger_k_matches_quadratic_dp(
            raw in prop::collection::btree_set(-1000i32..1000, 1..80),
            k in 1usize..10,
        ) {
            let values: Vec<f64> = raw.iter().map(|&v| v as f64).collect();
            let weights = vec![1.0; values.len()];
            let segs = optimal_segments(&values, &weights, k);
            // Plain O(k n^2) dynamic program as the reference.
            let n = values.len();
            let kk = k.min(n);
            let cost = |i: usize, j: usize| sse(&values, &weights, &[Segment { start: i, end: j }]);
            let mut dp: Vec<f64> = (0..n).map(|j| cost(0, j)).collect();
            for m in 1..kk {
                let mut next = vec![f64::INFINITY; n];
                for j in m..n {
                    for i in m..=j {
                        next[j] = next[j].min(dp[i - 1] + cost(i, j));
                    }
                }
                dp = next;
            }
            let got = sse(&values, &weights, &segs);
            prop_assert!((got - dp[n - 1]).abs() <= 1e-6 * dp[n - 1].max(1.0));
        }
    }
}
