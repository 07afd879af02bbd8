use serde::{Deserialize, Serialize};

use super::kmeans::lloyd_2d;
use super::SketchError;
use crate::num::{clamp_unit, Scalar};

/// Axis-aligned latitude/longitude box (closed on all sides).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBox<T> {
    pub lat_min: T,
    pub lat_max: T,
    pub lon_min: T,
    pub lon_max: T,
    #[serde(default)]
    pub count: u64,
}

impl<T: Scalar> GeoBox<T> {
    pub fn new(lat_min: T, lat_max: T, lon_min: T, lon_max: T) -> Self {
        GeoBox {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
            count: 0,
        }
    }

    pub fn area(&self) -> T {
        (self.lat_max - self.lat_min) * (self.lon_max - self.lon_min)
    }

    pub fn is_degenerate(&self) -> bool {
        self.area() <= T::zero()
    }

    pub fn intersects(&self, other: &GeoBox<T>) -> bool {
        self.lat_min <= other.lat_max
            && other.lat_min <= self.lat_max
            && self.lon_min <= other.lon_max
            && other.lon_min <= self.lon_max
    }

    pub fn contains_point(&self, lat: T, lon: T) -> bool {
        self.lat_min <= lat && lat <= self.lat_max && self.lon_min <= lon && lon <= self.lon_max
    }

    fn intersection_area(&self, other: &GeoBox<T>) -> T {
        let dl = (self.lat_max.min(other.lat_max) - self.lat_min.max(other.lat_min)).max(T::zero());
        let dn = (self.lon_max.min(other.lon_max) - self.lon_min.max(other.lon_min)).max(T::zero());
        dl * dn
    }

    pub fn is_valid(&self) -> bool {
        let lat = T::from_f64_lossy(90.0);
        let lon = T::from_f64_lossy(180.0);
        self.lat_min <= self.lat_max
            && self.lon_min <= self.lon_max
            && self.lat_min >= -lat
            && self.lat_max <= lat
            && self.lon_min >= -lon
            && self.lon_max <= lon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialSummary<T> {
    pub boxes: Vec<GeoBox<T>>,
    pub total_count: u64,
}

impl<T: Scalar> SpatialSummary<T> {
    /// Clusters `(lat, lon)` points into at most `k` bounding boxes.
    pub fn build(points: &[(T, T)], k: usize) -> Result<Self, SketchError> {
        if k == 0 {
            return Err(SketchError::InvalidK);
        }
        if points.is_empty() {
            return Err(SketchError::EmptyInput);
        }
        let lat_lim = T::from_f64_lossy(90.0);
        let lon_lim = T::from_f64_lossy(180.0);
        for &(lat, lon) in points {
            if !lat.is_finite() || !lon.is_finite() {
                return Err(SketchError::NonFiniteValue);
            }
            if lat.abs() > lat_lim || lon.abs() > lon_lim {
                return Err(SketchError::CoordinateOutOfRange);
            }
        }
        let clusters = lloyd_2d(points, k);
        let mut boxes: Vec<Option<GeoBox<T>>> = vec![None; clusters.clusters];
        for ((p, &w), &a) in clusters
            .points
            .iter()
            .zip(&clusters.weights)
            .zip(&clusters.assignment)
        {
            let b = boxes[a].get_or_insert(GeoBox {
                lat_min: p.0,
                lat_max: p.0,
                lon_min: p.1,
                lon_max: p.1,
                count: 0,
            });
            b.lat_min = b.lat_min.min(p.0);
            b.lat_max = b.lat_max.max(p.0);
            b.lon_min = b.lon_min.min(p.1);
            b.lon_max = b.lon_max.max(p.1);
            b.count += w;
        }
        let mut boxes: Vec<GeoBox<T>> = boxes.into_iter().flatten().collect();
        boxes.sort_by(|a, b| {
            a.lat_min
                .partial_cmp(&b.lat_min)
                .expect("finite")
                .then(a.lon_min.partial_cmp(&b.lon_min).expect("finite"))
        });
        Ok(SpatialSummary {
            boxes,
            total_count: points.len() as u64,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty() || self.total_count == 0
    }

    /// Bounding box of all boxes.
    pub fn extent(&self) -> Option<GeoBox<T>> {
        let first = self.boxes.first()?;
        let mut e = GeoBox {
            count: self.total_count,
            ..*first
        };
        for b in &self.boxes[1..] {
            e.lat_min = e.lat_min.min(b.lat_min);
            e.lat_max = e.lat_max.max(b.lat_max);
            e.lon_min = e.lon_min.min(b.lon_min);
            e.lon_max = e.lon_max.max(b.lon_max);
        }
        Some(e)
    }

    pub fn intersects(&self, other: &GeoBox<T>) -> bool {
        self.boxes.iter().any(|b| b.intersects(other))
    }
}

/// Weighted share of the query's boxes covered (by area) by the candidate's
/// boxes. Zero-area query boxes count as fully covered when they touch any
/// candidate box, otherwise not at all.
pub fn estimate_spatial_overlap<T: Scalar>(
    query: &SpatialSummary<T>,
    candidate: &SpatialSummary<T>,
) -> T {
    if query.is_empty() || candidate.is_empty() {
        return T::zero();
    }
    let total = T::from_u64(query.total_count).unwrap_or_else(T::one);
    let mut acc = T::zero();
    for q in &query.boxes {
        let weight = T::from_u64(q.count).unwrap_or_else(T::one) / total;
        let coverage = if q.is_degenerate() {
            if candidate.boxes.iter().any(|c| c.intersects(q)) {
                T::one()
            } else {
                T::zero()
            }
        } else {
            let covered = candidate
                .boxes
                .iter()
                .fold(T::zero(), |s, c| s + q.intersection_area(c));
            clamp_unit(covered / q.area())
        };
        acc += weight * coverage;
    }
    clamp_unit(acc)
}
