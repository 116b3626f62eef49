//! Box-counting dimension estimation and doubling (covering) counts.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::geom::PolyCurve;
use crate::rng;

/// Mixing tag for cell-key hashing (arbitrary fixed constant).
const BOX_KEY_TAG: u64 = u64::from_le_bytes(*b"boxcells");

/// A log-log scaling fit: occupied-box counts against scales, with the
/// fitted slope (the dimension estimate) and goodness of fit.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    /// Scales actually used in the fit (after exclusions), descending.
    pub scales: Vec<f64>,
    /// Occupied-box counts at those scales.
    pub counts: Vec<u64>,
    /// Slope of log(count) against log(1/scale): the dimension estimate.
    pub slope: f64,
    /// Coefficient of determination of the fit (1 when the counts are
    /// constant, e.g. a single point).
    pub r_squared: f64,
    /// Estimated sampling resolution (median nearest-neighbour spacing);
    /// scales below four times this were excluded as under-resolved.
    pub resolution: f64,
    /// Scales provided but excluded (the largest scale plus any
    /// under-resolved ones).
    pub excluded: Vec<f64>,
}

/// Box-counting dimension of a sampled point set.
///
/// For each scale `s`, counts the distinct axis-aligned grid cells of side
/// `s` (anchored at the per-axis minimum of the set) meeting the points,
/// then fits log(count) against log(1/s). Two exclusions guard the fit:
/// the largest scale is dropped (boundary-dominated), and scales finer than
/// four times the estimated sampling resolution are dropped (a sampled set
/// look like isolated points below its resolution, which biases the slope
/// toward zero). The resolution is the median nearest-neighbour distance of
/// a deterministic probe subset.
///
/// `scales` must be finite, positive, strictly decreasing, with at least
/// three entries; at least two must survive the exclusions.
pub fn box_counting_dimension(points: &PolyCurve, scales: &[f64]) -> Result<ScalingFit> {
    if scales.len() < 3 {
        return Err(CoreError::invalid("box counting needs at least three scales"));
    }
    if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(CoreError::invalid("scales must be finite and positive"));
    }
    if scales.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(CoreError::invalid("scales must be strictly decreasing"));
    }
    let dim = points.dim();
    let n = points.len();
    // Anchor the grid at the per-axis minimum so counts are translation
    // independent up to the grid phase.
    let mut anchor = vec![f64::INFINITY; dim];
    for i in 0..n {
        for (a, v) in anchor.iter_mut().zip(points.point(i)) {
            *a = a.min(*v);
        }
    }

    let resolution = sampling_resolution(points);
    let min_scale = 4.0 * resolution;

    let mut used_scales = Vec::new();
    let mut counts = Vec::new();
    let mut excluded = Vec::new();
    for (si, &s) in scales.iter().enumerate() {
        if si == 0 || s < min_scale {
            excluded.push(s);
            continue;
        }
        counts.push(count_boxes(points, &anchor, s)?);
        used_scales.push(s);
    }
    if used_scales.len() < 2 {
        return Err(CoreError::invalid(format!(
            "only {} scales survive exclusion (resolution {:.3e}); provide coarser scales or denser samples",
            used_scales.len(),
            resolution
        )));
    }

    let xs: Vec<f64> = used_scales.iter().map(|s| (1.0 / s).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, _intercept, r_squared) = crate::stats::linear_fit(&xs, &ys);
    Ok(ScalingFit {
        scales: used_scales,
        counts,
        slope,
        r_squared,
        resolution,
        excluded,
    })
}

fn count_boxes(points: &PolyCurve, anchor: &[f64], scale: f64) -> Result<u64> {
    let dim = points.dim();
    let mut cells: HashSet<u64> = HashSet::new();
    let mut words = Vec::with_capacity(dim);
    for i in 0..points.len() {
        words.clear();
        for (v, a) in points.point(i).iter().zip(anchor) {
            let idx = ((v - a) / scale).floor();
            if !(idx.abs() < 9.0e15) {
                return Err(CoreError::invalid("scale too small relative to point spread"));
            }
            words.push((idx as i64) as u64);
        }
        // Mix the cell coordinates into one key; the count is the set size,
        // so only key collisions (negligible at 64 bits) could distort it.
        cells.insert(rng::keyed_u64(BOX_KEY_TAG, &words));
    }
    Ok(cells.len() as u64)
}

/// Median nearest-neighbour distance over a deterministic probe subset:
/// up to 256 evenly spaced probes matched against up to 65536 evenly spaced
/// candidates. Returns 0 when every probe coincides with all candidates.
fn sampling_resolution(points: &PolyCurve) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let probe_idx = evenly_spaced(n, 256);
    let cand_idx = evenly_spaced(n, 65536);
    let mut dists = Vec::with_capacity(probe_idx.len());
    for &p in &probe_idx {
        let mut best = f64::INFINITY;
        for &c in &cand_idx {
            if c == p {
                continue;
            }
            let d = points.dist(p, c);
            if d > 0.0 && d < best {
                best = d;
            }
        }
        if best.is_finite() {
            dists.push(best);
        }
    }
    if dists.is_empty() {
        return 0.0;
    }
    crate::stats::median(&dists)
}

fn evenly_spaced(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    (0..cap).map(|k| k * n / cap).collect()
}

/// Doubling count: how many balls of radius `r / 2` centered at sample
/// points are needed to cover the sample points inside the ball B(center, r).
///
/// Greedy farthest-point covering: the first center is the in-ball point
/// farthest from `center` (ties to the lowest index); each subsequent center
/// is the point farthest from all chosen centers; stops when every in-ball
/// point is within `r / 2` of a center. A set is doubling when this count is
/// bounded uniformly over positions and radii.
pub fn doubling_count(points: &PolyCurve, center: &[f64], r: f64) -> Result<usize> {
    if center.len() != points.dim() {
        return Err(CoreError::invalid("center dimension mismatch"));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(CoreError::invalid("radius must be positive"));
    }
    let dim = points.dim();
    let dist_to_center = |i: usize| -> f64 {
        let p = points.point(i);
        let mut s = 0.0;
        for k in 0..dim {
            let d = p[k] - center[k];
            s += d * d;
        }
        s.sqrt()
    };
    let members: Vec<usize> = (0..points.len()).filter(|&i| dist_to_center(i) <= r).collect();
    if members.is_empty() {
        return Err(CoreError::invalid(format!(
            "no sample points within radius {r} of the requested center"
        )));
    }
    let half = r / 2.0;
    // min_dist[m] = distance from members[m] to the nearest chosen center.
    let mut min_dist = vec![f64::INFINITY; members.len()];
    let mut first = 0usize;
    let mut first_d = -1.0f64;
    for (m, &i) in members.iter().enumerate() {
        let d = dist_to_center(i);
        if d > first_d {
            first_d = d;
            first = m;
        }
    }
    let mut count = 0usize;
    let mut next = first;
    loop {
        count += 1;
        let c = members[next];
        let mut far = 0usize;
        let mut far_d = -1.0f64;
        for (m, &i) in members.iter().enumerate() {
            let d = points.dist(c, i);
            if d < min_dist[m] {
                min_dist[m] = d;
            }
            if min_dist[m] > far_d {
                far_d = min_dist[m];
                far = m;
            }
        }
        if far_d <= half {
            return Ok(count);
        }
        next = far;
    }
}
