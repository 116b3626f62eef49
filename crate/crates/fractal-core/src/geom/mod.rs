//! Metric measurements on sampled curves and finite point sets.
//!
//! The central object is [`PolyCurve`]: an ordered list of points in R^d with
//! optional strictly increasing time stamps. Measurements include the
//! bounded-turning constant and its refinement profile, quasisymmetric triple
//! distortion, box-counting dimension fits, doubling (covering) counts, and
//! raster-resolution self-intersection checks for planar polylines.

mod distortion;
mod intersect;
mod scaling;
mod turning;
pub mod unionfind;

pub use distortion::{qs_triple_distortion, EnvelopeBin, TripleDistortion};
pub use intersect::{
    hull_diameter, point_seg_distance, polyline_self_crossings, proper_crossing, seg_seg_distance,
};
pub use scaling::{box_counting_dimension, doubling_count, ScalingFit};
pub use turning::{
    closed_turning_constant, closed_turning_profile, turning_constant, turning_profile,
    TurningReport, MAX_CLOSED_TURNING_POINTS, MAX_TURNING_POINTS,
};

use crate::error::{CoreError, Result};

/// An ordered polyline in R^d, optionally time-stamped.
///
/// Invariants (enforced at construction): at least one point, all points of
/// equal dimension >= 1, and times — when present — strictly increasing with
/// one stamp per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCurve {
    dim: usize,
    points: Vec<f64>,
    times: Option<Vec<f64>>,
}

impl PolyCurve {
    /// Build from a flat coordinate buffer (`points.len() = len * dim`).
    pub fn new(dim: usize, points: Vec<f64>, times: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(CoreError::invalid("curve dimension must be at least 1"));
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(CoreError::invalid(format!(
                "point buffer length {} is not a positive multiple of dim {dim}",
                points.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("curve coordinates must be finite"));
        }
        if let Some(ts) = &times {
            if ts.len() * dim != points.len() {
                return Err(CoreError::invalid("one time stamp per point required"));
            }
            if ts.windows(2).any(|w| !(w[1] > w[0])) || ts.iter().any(|t| !t.is_finite()) {
                return Err(CoreError::invalid("times must be finite and strictly increasing"));
            }
        }
        Ok(PolyCurve { dim, points, times })
    }

    /// Build a planar curve from `[x, y]` points.
    pub fn from_points2(points: &[[f64; 2]], times: Option<Vec<f64>>) -> Result<Self> {
        let flat: Vec<f64> = points.iter().flat_map(|p| [p[0], p[1]]).collect();
        PolyCurve::new(2, flat, times)
    }

    /// Build a one-dimensional curve from scalar values.
    pub fn from_values1(values: &[f64], times: Option<Vec<f64>>) -> Result<Self> {
        PolyCurve::new(1, values.to_vec(), times)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        false // at least one point by construction
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn times(&self) -> Option<&[f64]> {
        self.times.as_deref()
    }

    pub fn coords(&self) -> &[f64] {
        &self.points
    }

    /// Euclidean distance between points `i` and `j`.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        let a = i * self.dim;
        let b = j * self.dim;
        let mut s = 0.0;
        for k in 0..self.dim {
            let d = self.points[a + k] - self.points[b + k];
            s += d * d;
        }
        s.sqrt()
    }

    /// The sub-polyline on `indices` (must be strictly increasing, non-empty).
    pub fn subsample(&self, indices: &[usize]) -> Result<PolyCurve> {
        if indices.is_empty() {
            return Err(CoreError::invalid("empty subsample"));
        }
        let mut pts = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(CoreError::invalid("subsample index out of bounds"));
            }
            pts.extend_from_slice(self.point(i));
        }
        let times = self
            .times
            .as_ref()
            .map(|ts| indices.iter().map(|&i| ts[i]).collect());
        PolyCurve::new(self.dim, pts, times)
    }

    /// Indices `0, stride, 2*stride, ...` with the final point always included.
    pub fn stride_indices(&self, stride: usize) -> Vec<usize> {
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).step_by(stride.max(1)).collect();
        if *idx.last().unwrap() != n - 1 {
            idx.push(n - 1);
        }
        idx
    }

    /// Max pairwise distance over the index range (inclusive bounds).
    ///
    /// Brute force over the sampled points; errors on an empty or out-of-range
    /// window.
    pub fn diameter(&self, lo: usize, hi: usize) -> Result<f64> {
        if lo > hi || hi >= self.len() {
            return Err(CoreError::invalid(format!(
                "diameter range [{lo}, {hi}] out of bounds for {} points",
                self.len()
            )));
        }
        let mut d = 0.0f64;
        for i in lo..=hi {
            for j in (i + 1)..=hi {
                let dij = self.dist(i, j);
                if dij > d {
                    d = dij;
                }
            }
        }
        Ok(d)
    }
}

/// Free-function form of [`PolyCurve::diameter`] (range given as index pair).
pub fn curve_diameter(curve: &PolyCurve, lo: usize, hi: usize) -> Result<f64> {
    curve.diameter(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_validates() {
        assert!(PolyCurve::new(2, vec![0.0, 1.0, 2.0], None).is_err());
        assert!(PolyCurve::new(0, vec![], None).is_err());
        assert!(PolyCurve::new(1, vec![f64::NAN], None).is_err());
        assert!(PolyCurve::new(1, vec![0.0, 1.0], Some(vec![0.0, 0.0])).is_err());
        assert!(PolyCurve::new(1, vec![0.0, 1.0], Some(vec![0.0, 1.0])).is_ok());
    }

    #[test]
    fn diameter_monotone_under_inclusion() {
        let c = PolyCurve::from_points2(
            &[[0.0, 0.0], [1.0, 0.5], [0.2, -0.3], [2.0, 2.0], [0.1, 0.1]],
            None,
        )
        .unwrap();
        let d_small = c.diameter(1, 3).unwrap();
        let d_big = c.diameter(0, 4).unwrap();
        assert!(d_big >= d_small);
        assert_eq!(c.diameter(2, 2).unwrap(), 0.0);
        assert!(c.diameter(3, 2).is_err());
        assert!(c.diameter(0, 9).is_err());
    }

    #[test]
    fn stride_indices_keep_endpoints() {
        let c = PolyCurve::from_values1(&(0..10).map(f64::from).collect::<Vec<_>>(), None).unwrap();
        let idx = c.stride_indices(4);
        assert_eq!(idx, vec![0, 4, 8, 9]);
        let idx1 = c.stride_indices(1);
        assert_eq!(idx1.len(), 10);
    }
}
