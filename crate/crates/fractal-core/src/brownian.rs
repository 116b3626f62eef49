//! Exact-law sampling of Brownian motion and bridges, plus the dyadic-event
//! and modulus-of-continuity statistics used by the turning experiments.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::geom::PolyCurve;
use crate::rng::{self, tags};

/// Maximum dyadic sampling depth (2^26 + 1 grid points).
pub const MAX_DEPTH: u32 = 26;

/// Memory guard: total stored f64 values per path.
const MAX_VALUES: usize = 1 << 28;

/// A Brownian path sampled on the dyadic grid k·T/2^depth, k = 0..2^depth.
///
/// `values` stores points row-major by time (dims coordinates per grid
/// point); `values[0..dims]` is the origin (standard Brownian motion).
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    dims: usize,
    depth: u32,
    horizon: f64,
    values: Vec<f64>,
    seed: u64,
}

impl BrownianPath {
    /// Wrap externally built values (used for synthetic deterministic paths).
    pub fn from_values(
        dims: usize,
        depth: u32,
        horizon: f64,
        values: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        validate_shape(dims, depth, horizon)?;
        let n = (1usize << depth) + 1;
        if values.len() != n * dims {
            return Err(CoreError::invalid(format!(
                "expected {} values for depth {depth}, dims {dims}; got {}",
                n * dims,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("path values must be finite"));
        }
        if values[..dims].iter().any(|&v| v != 0.0) {
            return Err(CoreError::invalid("standard Brownian motion starts at the origin"));
        }
        Ok(BrownianPath { dims, depth, horizon, values, seed })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of grid points (2^depth + 1).
    pub fn len(&self) -> usize {
        (1usize << self.depth) + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing T / 2^depth.
    pub fn dt(&self) -> f64 {
        self.horizon / (1u64 << self.depth) as f64
    }

    /// Coordinates at grid index `k`.
    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dims..(k + 1) * self.dims]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Time of grid index `k`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    /// Euclidean distance between the path values at grid indices `i`, `j`.
    #[inline]
    fn value_dist(&self, i: usize, j: usize) -> f64 {
        let a = i * self.dims;
        let b = j * self.dims;
        let mut s = 0.0;
        for k in 0..self.dims {
            let d = self.values[a + k] - self.values[b + k];
            s += d * d;
        }
        s.sqrt()
    }
}

fn validate_shape(dims: usize, depth: u32, horizon: f64) -> Result<()> {
    if dims == 0 {
        return Err(CoreError::invalid("dims must be at least 1"));
    }
    if depth == 0 || depth > MAX_DEPTH {
        return Err(CoreError::invalid(format!(
            "depth must lie in [1, {MAX_DEPTH}], got {depth}"
        )));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(CoreError::invalid("horizon must be positive and finite"));
    }
    let n = (1usize << depth) + 1;
    if n.saturating_mul(dims) > MAX_VALUES {
        return Err(CoreError::capacity(format!(
            "path of depth {depth} with {dims} dims needs {} values (limit {MAX_VALUES})",
            n * dims
        )));
    }
    Ok(())
}

/// Sample a standard `dims`-dimensional Brownian path on the dyadic grid.
///
/// Increments are i.i.d. centered Gaussians with per-coordinate variance
/// T/2^depth, generated from a dedicated deterministic stream of
/// (seed, dims, depth, horizon).
pub fn sample_bm(dims: usize, depth: u32, horizon: f64, seed: u64) -> Result<BrownianPath> {
    validate_shape(dims, depth, horizon)?;
    let n = 1usize << depth;
    let mut rng = rng::stream(
        seed,
        &[tags::BM_PATH, dims as u64, depth as u64, horizon.to_bits()],
    );
    let sd = (horizon / n as f64).sqrt();
    let mut values = vec![0.0f64; (n + 1) * dims];
    for k in 1..=n {
        for d in 0..dims {
            values[k * dims + d] =
                values[(k - 1) * dims + d] + sd * rng::standard_gaussian(&mut rng);
        }
    }
    Ok(BrownianPath { dims, depth, horizon, values, seed })
}

/// Refine a path to a deeper dyadic grid by Brownian-bridge midpoints.
///
/// Existing grid values are preserved bit-for-bit. Each new level j fills the
/// midpoints of the level-(j-1) intervals with the conditional law: mean =
/// average of the two neighbours, per-coordinate variance = Δt/4 where Δt is
/// the level-(j-1) spacing. Midpoint noise at level j comes from the stream
/// (seed, dims, j), independent of the starting depth — so refining in one
/// jump or in stages yields bit-identical results.
pub fn refine_bm(path: &BrownianPath, target_depth: u32) -> Result<BrownianPath> {
    if target_depth <= path.depth {
        return Err(CoreError::invalid(format!(
            "target depth {target_depth} must exceed current depth {}",
            path.depth
        )));
    }
    validate_shape(path.dims, target_depth, path.horizon)?;
    let dims = path.dims;
    let mut values = path.values.clone();
    for level in path.depth + 1..=target_depth {
        let coarse_n = 1usize << (level - 1);
        // Conditional midpoint sd: sqrt(Δt/4) with Δt the coarse spacing.
        let sd = (path.horizon / (1u64 << (level + 1)) as f64).sqrt();
        let mut rng = rng::stream(path.seed, &[tags::BM_REFINE, dims as u64, level as u64]);
        let mut next = vec![0.0f64; ((coarse_n << 1) + 1) * dims];
        for k in 0..=coarse_n {
            next[(2 * k) * dims..(2 * k + 1) * dims]
                .copy_from_slice(&values[k * dims..(k + 1) * dims]);
        }
        for k in 0..coarse_n {
            for d in 0..dims {
                let left = values[k * dims + d];
                let right = values[(k + 1) * dims + d];
                next[(2 * k + 1) * dims + d] =
                    0.5 * (left + right) + sd * rng::standard_gaussian(&mut rng);
            }
        }
        values = next;
    }
    Ok(BrownianPath {
        dims,
        depth: target_depth,
        horizon: path.horizon,
        values,
        seed: path.seed,
    })
}

/// A planar Brownian bridge loop rooted at `center` (first point = last
/// point = center exactly).
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeLoop {
    pub center: [f64; 2],
    pub duration: f64,
    /// Flat x,y pairs; length 2 * (mesh_points + 1).
    pub values: Vec<f64>,
}

impl BridgeLoop {
    pub fn len(&self) -> usize {
        self.values.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, k: usize) -> [f64; 2] {
        [self.values[2 * k], self.values[2 * k + 1]]
    }

    /// Max distance from the loop's center over its sampled points.
    pub fn max_radius(&self) -> f64 {
        let mut best = 0.0f64;
        for k in 0..self.len() {
            let p = self.point(k);
            let d = ((p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2)).sqrt();
            best = best.max(d);
        }
        best
    }

    /// Axis-aligned bounding box (min_x, min_y, max_x, max_y).
    pub fn bbox(&self) -> [f64; 4] {
        let mut bb = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for k in 0..self.len() {
            let p = self.point(k);
            bb[0] = bb[0].min(p[0]);
            bb[1] = bb[1].min(p[1]);
            bb[2] = bb[2].max(p[0]);
            bb[3] = bb[3].max(p[1]);
        }
        bb
    }

    /// Max pairwise distance over sampled loop points.
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            let pi = self.point(i);
            for j in i + 1..n {
                let pj = self.point(j);
                let d = ((pi[0] - pj[0]).powi(2) + (pi[1] - pj[1]).powi(2)).sqrt();
                if d > best {
                    best = d;
                }
            }
        }
        best
    }
}

/// Sample a planar Brownian bridge loop from a dedicated stream.
pub fn bridge_loop(
    center: [f64; 2],
    duration: f64,
    mesh_points: usize,
    seed: u64,
) -> Result<BridgeLoop> {
    let mut rng = rng::stream(
        seed,
        &[
            tags::BRIDGE,
            center[0].to_bits(),
            center[1].to_bits(),
            duration.to_bits(),
            mesh_points as u64,
        ],
    );
    bridge_loop_with_rng(center, duration, mesh_points, &mut rng)
}

/// Sample a planar Brownian bridge loop consuming an existing stream (used
/// by the loop-soup candidate machinery).
///
/// Discretizes z + (B_s − (s/t)·B_t) on the uniform grid s = k·t/m,
/// k = 0..m: a Brownian path is sampled on the grid and tied down by
/// subtracting (k/m)·B_t, which closes the loop exactly in floating point.
pub fn bridge_loop_with_rng(
    center: [f64; 2],
    duration: f64,
    mesh_points: usize,
    rng: &mut impl rand::Rng,
) -> Result<BridgeLoop> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(CoreError::invalid("loop duration must be positive"));
    }
    if mesh_points < 8 {
        return Err(CoreError::invalid("mesh_points must be at least 8"));
    }
    if !(center[0].is_finite() && center[1].is_finite()) {
        return Err(CoreError::invalid("loop center must be finite"));
    }
    let m = mesh_points;
    let sd = (duration / m as f64).sqrt();
    // Free Brownian path at the grid points.
    let mut bx = Vec::with_capacity(m + 1);
    let mut by = Vec::with_capacity(m + 1);
    bx.push(0.0f64);
    by.push(0.0f64);
    for _ in 0..m {
        bx.push(bx.last().unwrap() + sd * rng::standard_gaussian(rng));
        by.push(by.last().unwrap() + sd * rng::standard_gaussian(rng));
    }
    let (ex, ey) = (bx[m], by[m]);
    let mut values = Vec::with_capacity(2 * (m + 1));
    for k in 0..=m {
        let u = k as f64 / m as f64; // u = 1 exactly at k = m
        values.push(center[0] + (bx[k] - u * ex));
        values.push(center[1] + (by[k] - u * ey));
    }
    // Closure is exact: u = 1 makes the tie-down cancel B_t identically.
    debug_assert_eq!(&values[0..2], &values[2 * m..2 * m + 2]);
    Ok(BridgeLoop { center, duration, values })
}

/// One interval of the dyadic scan: the increment over the interval is small
/// (≤ 2·2^{-j/2}) while the path wanders far from the left endpoint
/// (≥ a·2^{-j/2}).
#[derive(Debug, Clone, Serialize)]
pub struct DyadicEventHit {
    pub level: u32,
    pub index: u64,
    pub increment_norm: f64,
    pub max_excursion: f64,
}

/// Scan the dyadic intervals of a horizon-1 path at the given level.
///
/// For each interval [i/2^j, (i+1)/2^j], tests the two events: the endpoint
/// increment norm is ≤ 2·2^{-j/2}, and the max over sampled grid points in
/// the interval of the distance from the left endpoint is ≥ a·2^{-j/2}. The
/// max is taken on the path's own grid (depth ≥ level), which underestimates
/// the continuous excursion; callers should sample several levels below the
/// scan level.
pub fn dyadic_event_scan(path: &BrownianPath, a: f64, level: u32) -> Result<Vec<DyadicEventHit>> {
    if path.horizon != 1.0 {
        return Err(CoreError::invalid(
            "dyadic scan requires horizon 1; rescale the path first (Brownian scaling)",
        ));
    }
    if !(a.is_finite() && a >= 0.0) {
        return Err(CoreError::invalid("excursion multiplier must be nonnegative"));
    }
    if level == 0 || level > path.depth {
        return Err(CoreError::invalid(format!(
            "scan level must lie in [1, {}], got {level}",
            path.depth
        )));
    }
    let scale = 0.5f64.powi(level as i32).sqrt(); // 2^{-j/2}
    let inc_bound = 2.0 * scale;
    let exc_bound = a * scale;
    let stride = 1usize << (path.depth - level);
    let mut hits = Vec::new();
    for i in 0..(1u64 << level) {
        let lo = i as usize * stride;
        let hi = lo + stride;
        let inc = path.value_dist(lo, hi);
        if inc > inc_bound {
            continue;
        }
        let mut exc = 0.0f64;
        for k in lo..=hi {
            let d = path.value_dist(lo, k);
            if d > exc {
                exc = d;
            }
        }
        if exc >= exc_bound {
            hits.push(DyadicEventHit {
                level,
                index: i,
                increment_norm: inc,
                max_excursion: exc,
            });
        }
    }
    Ok(hits)
}

pub use crate::stats::ProbabilityEstimate;

/// Monte Carlo estimate of P(|B(1)| ≤ 2 and max over [0,1] of |B| ≥ a) for
/// `dims`-dimensional Brownian motion, with the max taken over the grid at
/// `grid_depth`.
///
/// Replicates use independent derived streams and may be evaluated in
/// parallel; the result is identical for any thread count.
pub fn joint_event_probability(
    dims: usize,
    a: f64,
    grid_depth: u32,
    replicates: u64,
    seed: u64,
) -> Result<ProbabilityEstimate> {
    validate_shape(dims, grid_depth, 1.0)?;
    if replicates < 100 {
        return Err(CoreError::invalid("at least 100 replicates required"));
    }
    if !(a.is_finite() && a >= 0.0) {
        return Err(CoreError::invalid("excursion threshold must be nonnegative"));
    }
    let n = 1usize << grid_depth;
    let sd = (1.0 / n as f64).sqrt();
    let hit_flags: Vec<bool> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(
                seed,
                &[tags::JOINT_EVENT, dims as u64, grid_depth as u64, r],
            );
            let mut pos = vec![0.0f64; dims];
            let mut max_norm = 0.0f64;
            for _ in 0..n {
                let mut norm2 = 0.0;
                for p in pos.iter_mut() {
                    *p += sd * rng::standard_gaussian(&mut rng);
                    norm2 += *p * *p;
                }
                let norm = norm2.sqrt();
                if norm > max_norm {
                    max_norm = norm;
                }
            }
            let terminal = pos.iter().map(|p| p * p).sum::<f64>().sqrt();
            terminal <= 2.0 && max_norm >= a
        })
        .collect();
    let count = hit_flags.iter().filter(|&&b| b).count() as u64;
    Ok(ProbabilityEstimate::from_hits(count, replicates))
}

/// Lévy modulus statistic: sup over grid times t with t + h ≤ 1 of
/// |B(t+h) − B(t)| / sqrt(2 h log(1/h)).
///
/// Requires a one-dimensional horizon-1 path. `h` is snapped to the nearest
/// positive multiple of the grid spacing; the snapped value is used in both
/// the increments and the normalizer.
pub fn levy_modulus_ratio(path: &BrownianPath, h: f64) -> Result<f64> {
    if path.dims != 1 {
        return Err(CoreError::invalid("modulus statistic requires dims = 1"));
    }
    if path.horizon != 1.0 {
        return Err(CoreError::invalid(
            "modulus statistic requires horizon 1; rescale the path first",
        ));
    }
    let dt = path.dt();
    if !(h.is_finite()) || h < dt * (1.0 - 1e-12) {
        return Err(CoreError::invalid(format!(
            "h must be at least the grid spacing {dt:.3e}"
        )));
    }
    let steps = (h / dt).round() as usize;
    let steps = steps.max(1);
    let n = path.len() - 1;
    if steps >= n {
        return Err(CoreError::invalid("h must be smaller than the horizon"));
    }
    let h_eff = steps as f64 * dt;
    let norm = (2.0 * h_eff * (1.0 / h_eff).ln()).sqrt();
    let mut best = 0.0f64;
    for k in 0..=(n - steps) {
        let d = (path.values[k + steps] - path.values[k]).abs();
        if d > best {
            best = d;
        }
    }
    Ok(best / norm)
}

/// The graph curve (t, B(t)) in R^{1+dims}, time-stamped.
pub fn graph_curve(path: &BrownianPath) -> PolyCurve {
    let n = path.len();
    let dims = path.dims;
    let mut pts = Vec::with_capacity(n * (dims + 1));
    let mut times = Vec::with_capacity(n);
    for k in 0..n {
        let t = path.time(k);
        times.push(t);
        pts.push(t);
        pts.extend_from_slice(path.value(k));
    }
    PolyCurve::new(dims + 1, pts, Some(times)).expect("graph curve is valid by construction")
}

/// The trace curve B(t) in R^dims, time-stamped.
pub fn trace_curve(path: &BrownianPath) -> PolyCurve {
    let n = path.len();
    let mut times = Vec::with_capacity(n);
    for k in 0..n {
        times.push(path.time(k));
    }
    PolyCurve::new(path.dims, path.values.clone(), Some(times))
        .expect("trace curve is valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn paths_start_at_origin_and_are_deterministic() {
        let p = sample_bm(3, 6, 2.0, 99).unwrap();
        assert_eq!(p.value(0), &[0.0, 0.0, 0.0]);
        assert_eq!(p.len(), 65);
        let q = sample_bm(3, 6, 2.0, 99).unwrap();
        assert_eq!(p.values(), q.values());
        let r = sample_bm(3, 6, 2.0, 100).unwrap();
        assert_ne!(p.values(), r.values());
    }

    #[test]
    fn shape_validation() {
        assert!(sample_bm(0, 4, 1.0, 1).is_err());
        assert!(sample_bm(1, 0, 1.0, 1).is_err());
        assert!(sample_bm(1, 27, 1.0, 1).is_err());
        assert!(sample_bm(1, 4, 0.0, 1).is_err());
        assert!(matches!(
            sample_bm(1 << 10, 26, 1.0, 1),
            Err(CoreError::Capacity(_))
        ));
    }

    #[test]
    fn terminal_variance_matches_gaussian_law() {
        // Var B(1) = horizon; sample variance over 10^4 replicates must sit
        // inside a 3-sigma band (sd of sample variance ~ sqrt(2/n)).
        let n = 10_000;
        let mut terms = Vec::with_capacity(n);
        for seed in 0..n as u64 {
            let p = sample_bm(1, 6, 1.0, seed).unwrap();
            terms.push(p.values()[p.len() - 1]);
        }
        let var = crate::stats::variance(&terms);
        let band = 3.0 * (2.0 / n as f64).sqrt();
        assert!(
            (var - 1.0).abs() < band,
            "sample variance {var} outside 1 ± {band}"
        );
        let mean = crate::stats::mean(&terms);
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn disjoint_increments_are_uncorrelated() {
        let n = 10_000;
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for seed in 0..n as u64 {
            let p = sample_bm(1, 4, 1.0, seed).unwrap();
            let v = p.values();
            a.push(v[4] - v[0]); // increment over [0, 1/4]
            b.push(v[12] - v[8]); // increment over [1/2, 3/4]
        }
        let r = crate::stats::correlation(&a, &b);
        assert!(r.abs() < 3.0 / (n as f64).sqrt(), "correlation {r}");
    }

    #[test]
    fn refinement_preserves_coarse_grid_bitwise() {
        let p = sample_bm(2, 5, 1.5, 7).unwrap();
        let q = refine_bm(&p, 8).unwrap();
        assert_eq!(q.depth(), 8);
        let stride = 1usize << 3;
        for k in 0..p.len() {
            assert_eq!(p.value(k), q.value(k * stride));
        }
        // Staged refinement equals one-jump refinement bit-for-bit: each
        // level's midpoints come from a level-keyed stream.
        let staged = refine_bm(&refine_bm(&p, 6).unwrap(), 8).unwrap();
        assert_eq!(staged.values(), q.values());
        assert!(refine_bm(&p, 5).is_err());
        assert!(refine_bm(&p, 4).is_err());
    }

    #[test]
    fn refinement_midpoint_variance_is_quarter_spacing() {
        // Refine depth 3 -> 4: midpoint residual variance must be Δt/4 with
        // Δt = 2^-3 (per coordinate), over many replicates.
        let n = 10_000;
        let mut residuals = Vec::with_capacity(n * 8);
        for seed in 0..n as u64 {
            let p = sample_bm(1, 3, 1.0, seed).unwrap();
            let q = refine_bm(&p, 4).unwrap();
            for k in 0..8 {
                let mid = q.values()[2 * k + 1];
                let avg = 0.5 * (p.values()[k] + p.values()[k + 1]);
                residuals.push(mid - avg);
            }
        }
        let var = crate::stats::variance(&residuals);
        let expect = (1.0 / 8.0) / 4.0;
        let band = 3.0 * expect * (2.0 / residuals.len() as f64).sqrt();
        assert!(
            (var - expect).abs() < band,
            "midpoint variance {var} vs {expect} ± {band}"
        );
    }

    #[test]
    fn rescaled_increments_pass_ks_against_normal() {
        // sqrt(2^j) * ΔB over one path are i.i.d. standard normals.
        let p = sample_bm(1, 14, 1.0, 4242).unwrap();
        let sd = p.dt().sqrt();
        let mut zs: Vec<f64> = p
            .values()
            .windows(2)
            .map(|w| (w[1] - w[0]) / sd)
            .collect();
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = crate::stats::ks_one_sample(&zs, crate::stats::normal_cdf);
        let crit = crate::stats::ks_one_sample_critical(zs.len(), 0.01);
        assert!(d < crit, "KS statistic {d} exceeds 1% critical value {crit}");
    }

    #[test]
    fn bridge_loops_close_exactly_and_scale() {
        let l = bridge_loop([0.4, -0.2], 0.7, 16, 5).unwrap();
        assert_eq!(l.len(), 17);
        assert_eq!(l.point(0), [0.4, -0.2]);
        assert_eq!(l.point(16), [0.4, -0.2]);
        // Tiny duration keeps the loop near its center: radius ~ sqrt(t).
        let mut tiny_ok = 0;
        for seed in 0..300u64 {
            let l = bridge_loop([0.0, 0.0], 1e-6, 32, seed).unwrap();
            if l.max_radius() < 0.01 {
                tiny_ok += 1;
            }
        }
        assert!(tiny_ok >= 297, "only {tiny_ok}/300 tiny loops stayed within 0.01");
        assert!(bridge_loop([0.0, 0.0], 0.0, 16, 1).is_err());
        assert!(bridge_loop([0.0, 0.0], 1.0, 7, 1).is_err());
    }

    #[test]
    fn bridge_midpoint_variance_matches_law() {
        // Var of the bridge at s = t/2 is s(t-s)/t = 1/4 per coordinate.
        let n = 10_000;
        let mut xs = Vec::with_capacity(n);
        for seed in 0..n as u64 {
            let l = bridge_loop([0.0, 0.0], 1.0, 16, seed).unwrap();
            xs.push(l.point(8)[0]);
        }
        let var = crate::stats::variance(&xs);
        let band = 3.0 * 0.25 * (2.0 / n as f64).sqrt();
        assert!((var - 0.25).abs() < band, "midpoint variance {var}");
    }

    #[test]
    fn scan_requires_horizon_one_and_valid_level() {
        let p = sample_bm(1, 6, 2.0, 1).unwrap();
        assert!(dyadic_event_scan(&p, 1.0, 3).is_err());
        let p = sample_bm(1, 6, 1.0, 1).unwrap();
        assert!(dyadic_event_scan(&p, 1.0, 7).is_err());
        assert!(dyadic_event_scan(&p, 1.0, 0).is_err());
        assert!(dyadic_event_scan(&p, f64::NAN, 3).is_err());
    }

    #[test]
    fn scan_with_zero_a_counts_small_increments() {
        let p = sample_bm(2, 10, 1.0, 31).unwrap();
        let level = 6;
        let hits = dyadic_event_scan(&p, 0.0, level).unwrap();
        // With a = 0 the excursion condition is vacuous.
        let scale = 0.5f64.powi(level as i32).sqrt();
        let stride = 1usize << (p.depth() - level);
        let mut expected = 0u64;
        for i in 0..(1usize << level) {
            if p.value_dist(i * stride, (i + 1) * stride) <= 2.0 * scale {
                expected += 1;
            }
        }
        assert_eq!(hits.len() as u64, expected);
    }

    #[test]
    fn scan_hits_satisfy_bounds_and_turning_ratios() {
        // Moderate parameters so hits are plentiful: a = 2, level 10,
        // sampled 6 levels deeper.
        let a = 2.0;
        let level = 10;
        let mut total_hits = 0usize;
        for seed in 0..20u64 {
            let p = sample_bm(1, 16, 1.0, seed).unwrap();
            let hits = dyadic_event_scan(&p, a, level).unwrap();
            total_hits += hits.len();
            let scale = 0.5f64.powi(level as i32).sqrt();
            let stride = 1usize << (p.depth() - level);
            let dt = p.dt();
            for h in &hits {
                assert!(h.increment_norm <= 2.0 * scale);
                assert!(h.max_excursion >= a * scale);
                let lo = h.index as usize * stride;
                let hi = lo + stride;
                // Trace ratio: sub-path diameter / increment ≥ a/2, exactly,
                // because the diameter includes the excursion pair and both
                // sides are measured on the same grid.
                let mut diam = 0.0f64;
                for i in lo..=hi {
                    for j in i + 1..=hi {
                        diam = diam.max(p.value_dist(i, j));
                    }
                }
                if h.increment_norm > 0.0 {
                    assert!(diam / h.increment_norm >= a / 2.0);
                }
                // Graph ratio: diameter of (t, B(t)) over the window divided
                // by the graph endpoint gap is ≥ a/3.
                let gdist = |i: usize, j: usize| -> f64 {
                    let dtij = (j as f64 - i as f64) * dt;
                    let dv = p.values()[j] - p.values()[i];
                    (dtij * dtij + dv * dv).sqrt()
                };
                let mut gdiam = 0.0f64;
                for i in lo..=hi {
                    for j in i + 1..=hi {
                        gdiam = gdiam.max(gdist(i, j));
                    }
                }
                assert!(gdiam / gdist(lo, hi) >= a / 3.0);
            }
        }
        assert!(total_hits > 0, "expected at least one hit across 20 seeds");
    }

    #[test]
    fn joint_probability_matches_gaussian_cdf_at_a_zero() {
        // P(|B(1)| <= 2) = 2 Φ(2) − 1 = 0.9544997361036416.
        let est = joint_event_probability(1, 0.0, 10, 2000, 12).unwrap();
        let exact = 0.9544997361036416;
        assert!(
            (est.estimate - exact).abs() <= est.radius,
            "estimate {} ± {} vs {exact}",
            est.estimate,
            est.radius
        );
        // Same seed, increasing a: events nest, so estimates are monotone.
        let mut last = f64::INFINITY;
        for a in [1.0, 2.0, 3.0, 4.0] {
            let e = joint_event_probability(1, a, 8, 500, 12).unwrap();
            assert!(e.estimate <= last + 1e-15);
            last = e.estimate;
        }
        let far = joint_event_probability(1, 50.0, 8, 500, 12).unwrap();
        assert_eq!(far.estimate, 0.0);
        assert!(joint_event_probability(1, 1.0, 8, 99, 12).is_err());
    }

    #[test]
    fn levy_ratio_zero_path_and_bands() {
        let zero = BrownianPath::from_values(1, 10, 1.0, vec![0.0; 1025], 0).unwrap();
        assert_eq!(levy_modulus_ratio(&zero, 0.01).unwrap(), 0.0);
        // Real paths: the sup runs over every grid start time, so at coarse h
        // the max over many overlapping windows inflates the ratio well above
        // 1; as h shrinks the normalizer catches up and the ratio falls
        // toward 1 from above.
        let mut coarse = Vec::new();
        let mut fine = Vec::new();
        for seed in 0..30u64 {
            let p = sample_bm(1, 16, 1.0, seed).unwrap();
            coarse.push(levy_modulus_ratio(&p, 0.5f64.powi(4)).unwrap());
            fine.push(levy_modulus_ratio(&p, 0.5f64.powi(12)).unwrap());
        }
        let mc = crate::stats::median(&coarse);
        let mf = crate::stats::median(&fine);
        assert!(mc > mf, "median should decrease toward 1: {mc} vs {mf}");
        assert!(mf > 0.9 && mf < 1.2, "fine median {mf} out of band");
        // h below grid spacing or beyond horizon errors.
        let p = sample_bm(1, 6, 1.0, 3).unwrap();
        assert!(levy_modulus_ratio(&p, 1.0 / 256.0).is_err());
        assert!(levy_modulus_ratio(&p, 2.0).is_err());
    }

    #[test]
    fn graph_and_trace_curves() {
        let p = sample_bm(2, 4, 1.0, 8).unwrap();
        let g = graph_curve(&p);
        assert_eq!(g.dim(), 3);
        assert_eq!(g.len(), p.len());
        let times = g.times().unwrap();
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.point(3)[0], p.time(3));
        assert_eq!(&g.point(3)[1..], p.value(3));
        let t = trace_curve(&p);
        assert_eq!(t.dim(), 2);
        assert_eq!(t.point(5), p.value(5));
        // Zero path graph is a straight segment: turning constant 1.
        let zero = BrownianPath::from_values(1, 4, 1.0, vec![0.0; 17], 0).unwrap();
        let zg = graph_curve(&zero);
        let rep = crate::geom::turning_constant(&zg).unwrap();
        assert_relative_eq!(rep.constant, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn from_values_validates() {
        assert!(BrownianPath::from_values(1, 3, 1.0, vec![0.0; 9], 0).is_ok());
        assert!(BrownianPath::from_values(1, 3, 1.0, vec![0.0; 8], 0).is_err());
        let mut bad = vec![0.0; 9];
        bad[0] = 1.0;
        assert!(BrownianPath::from_values(1, 3, 1.0, bad, 0).is_err());
        let mut inf = vec![0.0; 9];
        inf[5] = f64::INFINITY;
        assert!(BrownianPath::from_values(1, 3, 1.0, inf, 0).is_err());
    }
}
