//! Brownian loop-soup sampling, cluster extraction, outermost boundaries,
//! and carpet approximation with Whyburn-condition diagnostics.
//!
//! The loop measure assigns mass `1/(2 pi t^2) dt dz` to Brownian bridges of
//! duration t rooted at z. It is infinite toward `t -> 0`, so everything here
//! is truncated: durations in `[t_min, t_max]`, loop diameter at least
//! `diam_min`, loops contained in the domain. All carpet statements are
//! cutoff-relative.
//!
//! Sampling uses the Poisson superposition directly: the number of *candidate*
//! bridges is Poisson with the full importance mass `c |D| (1/t_min -
//! 1/t_max) / (2 pi)`, each candidate drawn from the importance law (t with
//! density proportional to `1/t^2`, root uniform), and the soup keeps the
//! candidates passing the acceptance predicate. Marginally the kept count is
//! Poisson(c Lambda) with Lambda the truncated mass, and — because candidate
//! streams are keyed by index — soups at coupled seeds are *nested* across
//! cutoff choices, which makes the monotonicity of the carpet under
//! shrinking `diam_min` an exact, not just statistical, property.

use std::collections::{HashMap, HashSet};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::brownian;
use crate::error::{CoreError, Result};
use crate::geom::unionfind::UnionFind;
use crate::geom::{
    closed_turning_profile, hull_diameter, proper_crossing, seg_seg_distance, PolyCurve,
};
use crate::rng::{self, tags};
use crate::stats;

/// Hard cap on vertices per sampled bridge loop.
const MAX_LOOP_POINTS: usize = 1 << 14;

/// Hard cap on the Poisson candidate count for one soup.
const MAX_CANDIDATES: f64 = 4e6;

/// Hard cap on raster cells along one axis.
const MAX_RASTER_SIDE: usize = 1 << 13;

/// Sampling domain: simply connected, fixed scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Domain {
    /// The square [0,1] x [0,1] (default in all experiments).
    UnitSquare,
    /// The disk of radius 1 centered at the origin.
    UnitDisk,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::UnitDisk => std::f64::consts::PI,
        }
    }

    pub fn diameter(self) -> f64 {
        match self {
            Domain::UnitSquare => std::f64::consts::SQRT_2,
            Domain::UnitDisk => 2.0,
        }
    }

    /// Lower-left corner of the bounding box.
    pub fn origin(self) -> [f64; 2] {
        match self {
            Domain::UnitSquare => [0.0, 0.0],
            Domain::UnitDisk => [-1.0, -1.0],
        }
    }

    /// Side length of the (square) bounding box.
    pub fn extent(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::UnitDisk => 2.0,
        }
    }

    pub fn contains(self, p: [f64; 2]) -> bool {
        match self {
            Domain::UnitSquare => {
                p[0] >= 0.0 && p[0] <= 1.0 && p[1] >= 0.0 && p[1] <= 1.0
            }
            Domain::UnitDisk => p[0] * p[0] + p[1] * p[1] <= 1.0,
        }
    }

    /// Uniform point, consuming a deterministic number of draws on the
    /// square and rejection draws on the disk.
    fn uniform_point(self, rng: &mut ChaCha8Rng) -> [f64; 2] {
        match self {
            Domain::UnitSquare => [rng::unit(rng), rng::unit(rng)],
            Domain::UnitDisk => loop {
                let x = 2.0 * rng::unit(rng) - 1.0;
                let y = 2.0 * rng::unit(rng) - 1.0;
                if x * x + y * y <= 1.0 {
                    return [x, y];
                }
            },
        }
    }
}

/// Loop-soup intensity: either through the curve parameter kappa or given
/// directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Intensity {
    Kappa(f64),
    Direct(f64),
}

/// The central intensity relation c = (3 kappa - 8)(6 - kappa) / (2 kappa),
/// valid on the dilute branch kappa in (8/3, 4].
pub fn intensity_for_kappa(kappa: f64) -> Result<f64> {
    if !kappa.is_finite() || kappa <= 8.0 / 3.0 || kappa > 4.0 {
        return Err(CoreError::unsupported(format!(
            "kappa must lie in (8/3, 4], got {kappa}"
        )));
    }
    Ok((3.0 * kappa - 8.0) * (6.0 - kappa) / (2.0 * kappa))
}

/// Configuration of one truncated soup.
#[derive(Debug, Clone, Serialize)]
pub struct SoupConfig {
    pub domain: Domain,
    pub intensity: Intensity,
    /// Duration cutoffs 0 < t_min < t_max.
    pub t_min: f64,
    pub t_max: f64,
    /// Minimal loop diameter delta.
    pub diam_min: f64,
    /// Raster resolution; must satisfy mesh <= diam_min / 4.
    pub mesh: f64,
    /// Monte Carlo sample count for the mass estimate.
    pub mc_mass_samples: usize,
    pub seed: u64,
}

impl SoupConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_min.is_finite() && self.t_max.is_finite() && 0.0 < self.t_min) {
            return Err(CoreError::invalid("need 0 < t_min"));
        }
        if self.t_min >= self.t_max {
            return Err(CoreError::invalid("need t_min < t_max"));
        }
        if !(self.diam_min.is_finite() && self.diam_min > 0.0) {
            return Err(CoreError::invalid("diam_min must be positive"));
        }
        if !(self.mesh.is_finite() && self.mesh > 0.0) {
            return Err(CoreError::invalid("mesh must be positive"));
        }
        if self.mesh > self.diam_min / 4.0 + 1e-15 {
            return Err(CoreError::invalid(
                "mesh must not exceed diam_min / 4 (loops must span several cells)",
            ));
        }
        if (self.domain.extent() / self.mesh).round() as usize > MAX_RASTER_SIDE {
            return Err(CoreError::capacity(format!(
                "mesh {} needs more than {MAX_RASTER_SIDE} cells per axis",
                self.mesh
            )));
        }
        if self.mc_mass_samples < 16 {
            return Err(CoreError::invalid("mc_mass_samples must be at least 16"));
        }
        self.c()?;
        Ok(())
    }

    /// Resolved intensity value.
    pub fn c(&self) -> Result<f64> {
        match self.intensity {
            Intensity::Kappa(k) => intensity_for_kappa(k),
            Intensity::Direct(c) => {
                if !(c.is_finite() && c > 0.0 && c <= 1.0) {
                    Err(CoreError::unsupported(format!(
                        "direct intensity must lie in (0, 1], got {c}"
                    )))
                } else {
                    Ok(c)
                }
            }
        }
    }

    /// Total importance mass |D| (1/t_min - 1/t_max) / (2 pi): the measure
    /// the candidates are drawn from; the truncated loop mass is this times
    /// the acceptance probability.
    fn importance_mass(&self) -> f64 {
        self.domain.area() * (1.0 / self.t_min - 1.0 / self.t_max)
            / (2.0 * std::f64::consts::PI)
    }
}

/// One sampled loop: a closed polyline (first vertex repeated last).
#[derive(Debug, Clone)]
pub struct SoupLoop {
    pub points: Vec<[f64; 2]>,
    pub duration: f64,
    pub diameter: f64,
}

/// A sampled (or synthesized) soup with the cutoffs it was built under.
#[derive(Debug, Clone)]
pub struct LoopSet {
    pub loops: Vec<SoupLoop>,
    pub config: SoupConfig,
}

impl LoopSet {
    /// Wrap explicit loops (synthetic fixtures, imports), enforcing the
    /// soup invariants: closed, inside the domain, diameter >= diam_min.
    pub fn from_loops(loops: Vec<SoupLoop>, config: SoupConfig) -> Result<LoopSet> {
        config.validate()?;
        for (i, l) in loops.iter().enumerate() {
            if l.points.len() < 4 || l.points.first() != l.points.last() {
                return Err(CoreError::invalid(format!(
                    "loop {i} is not a closed polyline"
                )));
            }
            if !l.points.iter().all(|&p| config.domain.contains(p)) {
                return Err(CoreError::invalid(format!("loop {i} leaves the domain")));
            }
            if l.diameter < config.diam_min {
                return Err(CoreError::invalid(format!(
                    "loop {i} is narrower than diam_min"
                )));
            }
        }
        Ok(LoopSet { loops, config })
    }
}

/// Build a circle as a closed SoupLoop (test fixtures and baselines).
pub fn circle_loop(center: [f64; 2], radius: f64, vertices: usize) -> SoupLoop {
    let mut points = Vec::with_capacity(vertices + 1);
    for i in 0..vertices {
        let a = std::f64::consts::TAU * i as f64 / vertices as f64;
        points.push([center[0] + radius * a.cos(), center[1] + radius * a.sin()]);
    }
    points.push(points[0]);
    SoupLoop { points, duration: 0.0, diameter: 2.0 * radius }
}

/// One importance-sampled candidate bridge.
fn bridge_candidate(config: &SoupConfig, tag: u64, index: u64) -> SoupLoop {
    let mut rng = rng::stream(config.seed, &[tag, index]);
    // Duration with density proportional to 1/t^2 on [t_min, t_max]:
    // inverse CDF of u is 1 / (1/t_min - u (1/t_min - 1/t_max)).
    let u = rng::unit(&mut rng);
    let k = 1.0 / config.t_min - 1.0 / config.t_max;
    let t = 1.0 / (1.0 / config.t_min - u * k);
    let z = config.domain.uniform_point(&mut rng);
    // Spatial discretization: about sqrt(t)/mesh vertices (the loop's
    // spatial scale in raster cells).
    let n = ((t.sqrt() / config.mesh).ceil() as usize).clamp(8, MAX_LOOP_POINTS);
    let bridge = brownian::bridge_loop_with_rng(z, t, n, &mut rng)
        .expect("validated config yields a valid bridge");
    let points: Vec<[f64; 2]> = (0..bridge.len()).map(|k| bridge.point(k)).collect();
    let diameter = hull_diameter(&points);
    SoupLoop { points, duration: t, diameter }
}

fn accepts(config: &SoupConfig, cand: &SoupLoop) -> bool {
    cand.diameter >= config.diam_min
        && cand.points.iter().all(|&p| config.domain.contains(p))
}

/// Truncated loop-mass estimate with a 3-standard-error radius.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MassEstimate {
    /// Estimated truncated mass Lambda.
    pub lambda: f64,
    /// Three standard errors of the estimate.
    pub radius: f64,
    /// Raw acceptance fraction of the importance sampler.
    pub acceptance: f64,
    /// Monte Carlo sample count behind the estimate.
    pub samples: usize,
}

/// Monte Carlo estimate of the truncated loop mass
/// `int_D int_{t_min}^{t_max} (2 pi t^2)^{-1} P(bridge in D, diam >= delta)`.
///
/// An a-priori impossible cutoff (diam_min above the domain diameter) gives
/// the exact answer 0; a feasible cutoff with zero observed acceptance is a
/// degenerate-cutoff error (the estimate would be meaningless).
pub fn truncated_loop_mass(config: &SoupConfig) -> Result<MassEstimate> {
    config.validate()?;
    if config.diam_min > config.domain.diameter() {
        return Ok(MassEstimate { lambda: 0.0, radius: 0.0, acceptance: 0.0, samples: 0 });
    }
    let m = config.mc_mass_samples;
    let hits: u64 = (0..m as u64)
        .into_par_iter()
        .map(|i| accepts(config, &bridge_candidate(config, tags::SOUP_MASS, i)) as u64)
        .sum();
    if hits == 0 {
        return Err(CoreError::degenerate(
            "no candidate loop met the cutoffs; widen [t_min, t_max] or lower diam_min",
        ));
    }
    let p = hits as f64 / m as f64;
    let scale = config.importance_mass();
    Ok(MassEstimate {
        lambda: scale * p,
        radius: scale * stats::binomial_radius_3sigma(p, m),
        acceptance: p,
        samples: m,
    })
}

/// Exact Poisson sampler: Knuth's product method, with recursive halving
/// above lambda = 400 (a Poisson sum splits exactly).
fn poisson_count(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda > 400.0 {
        let half = lambda / 2.0;
        return poisson_count(rng, half) + poisson_count(rng, lambda - half);
    }
    let floor = (-lambda).exp();
    let mut p = 1.0f64;
    let mut k = 0u64;
    loop {
        p *= rng::unit(rng);
        if p < floor {
            return k;
        }
        k += 1;
    }
}

/// Sample one truncated soup.
///
/// Candidate count ~ Poisson(c x importance mass); candidates are keyed by
/// index and filtered by the acceptance predicate, so the kept count is
/// Poisson(c Lambda) and coupled seeds give nested soups across cutoffs.
pub fn sample_soup(config: &SoupConfig) -> Result<LoopSet> {
    // The mass estimate also performs the degenerate-cutoff screening.
    let mass = truncated_loop_mass(config)?;
    let c = config.c()?;
    if mass.lambda == 0.0 {
        return Ok(LoopSet { loops: Vec::new(), config: config.clone() });
    }
    let budget = c * config.importance_mass();
    if budget > MAX_CANDIDATES {
        return Err(CoreError::capacity(format!(
            "candidate budget {budget:.0} exceeds {MAX_CANDIDATES}; raise t_min"
        )));
    }
    let mut count_rng = rng::stream(config.seed, &[tags::SOUP_COUNT]);
    let m = poisson_count(&mut count_rng, budget);
    let loops: Vec<SoupLoop> = (0..m)
        .into_par_iter()
        .filter_map(|i| {
            let cand = bridge_candidate(config, tags::SOUP_CAND, i);
            accepts(config, &cand).then_some(cand)
        })
        .collect();
    Ok(LoopSet { loops, config: config.clone() })
}

/// Clusters of a soup: a partition of loop indices, with outer boundaries
/// filled in by [`outermost_boundaries`].
#[derive(Debug, Clone, Default)]
pub struct ClusterSet {
    /// Partition of 0..loops.len(); each inner list sorted, lists ordered by
    /// first element.
    pub clusters: Vec<Vec<usize>>,
    /// Indices into `clusters` that are outermost (not enclosed by another
    /// cluster's outer boundary).
    pub outermost: Vec<usize>,
    /// Closed boundary polylines, parallel to `outermost`.
    pub boundaries: Vec<Vec<[f64; 2]>>,
}

/// Side length of the broadphase buckets for segment proximity queries.
fn bucket_size(tol: f64, mesh: f64) -> f64 {
    4.0 * mesh.max(tol)
}

fn bucket_of(p: [f64; 2], h: f64) -> (i64, i64) {
    ((p[0] / h).floor() as i64, (p[1] / h).floor() as i64)
}

/// Insert a segment id into every bucket its tol-expanded bounding box meets.
fn insert_segment(
    grid: &mut HashMap<(i64, i64), Vec<u32>>,
    id: u32,
    a: [f64; 2],
    b: [f64; 2],
    pad: f64,
    h: f64,
) {
    let (x0, y0) = bucket_of([a[0].min(b[0]) - pad, a[1].min(b[1]) - pad], h);
    let (x1, y1) = bucket_of([a[0].max(b[0]) + pad, a[1].max(b[1]) + pad], h);
    for cx in x0..=x1 {
        for cy in y0..=y1 {
            grid.entry((cx, cy)).or_default().push(id);
        }
    }
}

/// Partition loops into clusters: two loops are linked when their polylines
/// properly cross or approach within `tol`. The partition is independent of
/// loop order (it is the transitive closure of a symmetric relation).
pub fn cluster_soup(loops: &LoopSet, tol: f64) -> Result<ClusterSet> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CoreError::invalid("tol must be positive"));
    }
    if tol > loops.config.mesh {
        return Err(CoreError::invalid("tol must not exceed the raster mesh"));
    }
    let n = loops.loops.len();
    if n == 0 {
        return Ok(ClusterSet::default());
    }
    // Flatten segments: (loop id, start vertex index).
    let mut seg_loop: Vec<u32> = Vec::new();
    let mut seg_a: Vec<[f64; 2]> = Vec::new();
    let mut seg_b: Vec<[f64; 2]> = Vec::new();
    let h = bucket_size(tol, loops.config.mesh);
    let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    for (li, l) in loops.loops.iter().enumerate() {
        for w in l.points.windows(2) {
            let id = seg_loop.len() as u32;
            insert_segment(&mut grid, id, w[0], w[1], tol, h);
            seg_loop.push(li as u32);
            seg_a.push(w[0]);
            seg_b.push(w[1]);
        }
    }
    let mut uf = UnionFind::new(n);
    let mut tested: HashSet<(u32, u32)> = HashSet::new();
    for ids in grid.values() {
        for (i, &s) in ids.iter().enumerate() {
            for &t in &ids[i + 1..] {
                let (la, lb) = (seg_loop[s as usize], seg_loop[t as usize]);
                if la == lb || uf.same(la as usize, lb as usize) {
                    continue;
                }
                let key = if s < t { (s, t) } else { (t, s) };
                if !tested.insert(key) {
                    continue;
                }
                let (a0, a1) = (seg_a[s as usize], seg_b[s as usize]);
                let (b0, b1) = (seg_a[t as usize], seg_b[t as usize]);
                if proper_crossing(a0, a1, b0, b1)
                    || seg_seg_distance(a0, a1, b0, b1) <= tol
                {
                    uf.union(la as usize, lb as usize);
                }
            }
        }
    }
    let mut clusters = uf.groups();
    for c in &mut clusters {
        c.sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    Ok(ClusterSet { clusters, outermost: Vec::new(), boundaries: Vec::new() })
}

/// A rectangular window of raster cells with global cell coordinates.
struct Window {
    x0: i64,
    y0: i64,
    w: usize,
    h: usize,
    cells: Vec<bool>,
}

impl Window {
    fn new(x0: i64, y0: i64, w: usize, h: usize) -> Window {
        Window { x0, y0, w, h, cells: vec![false; w * h] }
    }

    #[inline]
    fn idx(&self, cx: i64, cy: i64) -> Option<usize> {
        let (lx, ly) = (cx - self.x0, cy - self.y0);
        if lx < 0 || ly < 0 || lx >= self.w as i64 || ly >= self.h as i64 {
            None
        } else {
            Some(ly as usize * self.w + lx as usize)
        }
    }

    #[inline]
    fn set(&mut self, cx: i64, cy: i64) {
        if let Some(i) = self.idx(cx, cy) {
            self.cells[i] = true;
        }
    }
}

/// Visit every raster cell a segment passes through (grid traversal).
fn supercover(a: [f64; 2], b: [f64; 2], mesh: f64, mut visit: impl FnMut(i64, i64)) {
    let cell = |v: f64| (v / mesh).floor() as i64;
    let (mut cx, mut cy) = (cell(a[0]), cell(a[1]));
    let (ex, ey) = (cell(b[0]), cell(b[1]));
    visit(cx, cy);
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let sx: i64 = if dx > 0.0 { 1 } else { -1 };
    let sy: i64 = if dy > 0.0 { 1 } else { -1 };
    // Parameter t in [0,1] along the segment at which the next x / y cell
    // boundary is crossed.
    let next_boundary = |c: i64, s: i64| if s > 0 { (c + 1) as f64 } else { c as f64 };
    let mut tx = if dx == 0.0 {
        f64::INFINITY
    } else {
        (next_boundary(cx, sx) * mesh - a[0]) / dx
    };
    let mut ty = if dy == 0.0 {
        f64::INFINITY
    } else {
        (next_boundary(cy, sy) * mesh - a[1]) / dy
    };
    let step_x = if dx == 0.0 { f64::INFINITY } else { (mesh / dx).abs() };
    let step_y = if dy == 0.0 { f64::INFINITY } else { (mesh / dy).abs() };
    let budget = 2 * ((ex - cx).abs() + (ey - cy).abs()) + 4;
    for _ in 0..budget {
        if cx == ex && cy == ey {
            return;
        }
        if tx <= ty {
            cx += sx;
            tx += step_x;
        } else {
            cy += sy;
            ty += step_y;
        }
        visit(cx, cy);
    }
    // Numerical fallback: make sure the endpoint cell is painted.
    visit(ex, ey);
}

/// Mark 4-connected cells reachable from the window border without entering
/// walls. Returns the exterior mask (window-local indices).
fn flood_exterior(walls: &Window) -> Vec<bool> {
    let (w, h) = (walls.w, walls.h);
    let mut ext = vec![false; w * h];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let push = |ext: &mut Vec<bool>, stack: &mut Vec<(usize, usize)>, x: usize, y: usize| {
        let i = y * w + x;
        if !ext[i] && !walls.cells[i] {
            ext[i] = true;
            stack.push((x, y));
        }
    };
    for x in 0..w {
        push(&mut ext, &mut stack, x, 0);
        push(&mut ext, &mut stack, x, h - 1);
    }
    for y in 0..h {
        push(&mut ext, &mut stack, 0, y);
        push(&mut ext, &mut stack, w - 1, y);
    }
    while let Some((x, y)) = stack.pop() {
        if x > 0 {
            push(&mut ext, &mut stack, x - 1, y);
        }
        if x + 1 < w {
            push(&mut ext, &mut stack, x + 1, y);
        }
        if y > 0 {
            push(&mut ext, &mut stack, x, y - 1);
        }
        if y + 1 < h {
            push(&mut ext, &mut stack, x, y + 1);
        }
    }
    ext
}

/// Trace the boundary contours of `filled` (window-local mask) as closed
/// corner-lattice polylines in global cell units. Walks directed boundary
/// edges keeping the filled region on the left; at pinch corners the walk
/// turns right, which keeps diagonally-touching cells on one contour
/// (8-connected foreground, matching the 4-connected exterior flood).
fn trace_contours(win: &Window, filled: &[bool]) -> Vec<Vec<(i64, i64)>> {
    let f = |cx: i64, cy: i64| -> bool {
        win.idx(cx, cy).map(|i| filled[i]).unwrap_or(false)
    };
    // Directions 0..4 = +x, +y, -x, -y; cell left/right of a directed edge
    // starting at corner (cx, cy).
    const STEP: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
    let left = |c: (i64, i64), d: usize| -> (i64, i64) {
        match d {
            0 => (c.0, c.1),
            1 => (c.0 - 1, c.1),
            2 => (c.0 - 1, c.1 - 1),
            _ => (c.0, c.1 - 1),
        }
    };
    let right = |c: (i64, i64), d: usize| -> (i64, i64) {
        match d {
            0 => (c.0, c.1 - 1),
            1 => (c.0, c.1),
            2 => (c.0 - 1, c.1),
            _ => (c.0 - 1, c.1 - 1),
        }
    };
    let valid = |c: (i64, i64), d: usize| -> bool {
        let l = left(c, d);
        let r = right(c, d);
        f(l.0, l.1) && !f(r.0, r.1)
    };
    let mut used: HashSet<((i64, i64), usize)> = HashSet::new();
    let mut out = Vec::new();
    for ly in 0..win.h {
        for lx in 0..win.w {
            let i = ly * win.w + lx;
            if !filled[i] {
                continue;
            }
            let (cx, cy) = (win.x0 + lx as i64, win.y0 + ly as i64);
            // Bottom edge of a filled cell with empty space below.
            if f(cx, cy - 1) {
                continue;
            }
            let start = ((cx, cy), 0usize);
            if used.contains(&start) {
                continue;
            }
            let mut contour: Vec<(i64, i64)> = vec![start.0];
            let (mut corner, mut dir) = start;
            loop {
                used.insert((corner, dir));
                let next = (corner.0 + STEP[dir].0, corner.1 + STEP[dir].1);
                // Right turn preferred, then straight, then left.
                let mut ndir = usize::MAX;
                for cand in [(dir + 3) % 4, dir, (dir + 1) % 4] {
                    if valid(next, cand) {
                        ndir = cand;
                        break;
                    }
                }
                if ndir == usize::MAX {
                    break; // defensive: inconsistent raster
                }
                if (next, ndir) == start {
                    contour.push(next);
                    break;
                }
                if ndir != dir {
                    contour.push(next);
                } else {
                    // Collinear: extend the previous step instead of keeping
                    // a redundant vertex.
                    contour.push(next);
                }
                corner = next;
                dir = ndir;
            }
            if contour.len() >= 4 && contour.first() == contour.last() {
                out.push(contour);
            }
        }
    }
    out
}

/// Collapse collinear runs of a lattice contour (lossless simplification).
fn collapse_collinear(contour: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let n = contour.len();
    if n < 3 {
        return contour.to_vec();
    }
    let mut out: Vec<(i64, i64)> = Vec::with_capacity(n);
    out.push(contour[0]);
    for i in 1..n - 1 {
        let a = *out.last().unwrap();
        let b = contour[i];
        let c = contour[i + 1];
        let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        if cross != 0 {
            out.push(b);
        }
    }
    out.push(contour[n - 1]);
    out
}

fn shoelace_area_cells(contour: &[(i64, i64)]) -> f64 {
    let mut s = 0i64;
    for w in contour.windows(2) {
        s += w[0].0 * w[1].1 - w[1].0 * w[0].1;
    }
    (s as f64 / 2.0).abs()
}

/// Raster state of one cluster: wall cells, filled (non-exterior) region,
/// and the window they live in.
struct ClusterRaster {
    win: Window,
    filled: Vec<bool>,
    rep: (i64, i64),
}

/// Build the wall window + filled mask + representative wall cell for a set
/// of polylines.
fn raster_for_polylines(polylines: &[&[[f64; 2]]], mesh: f64) -> Result<ClusterRaster> {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for pl in polylines {
        for p in *pl {
            min[0] = min[0].min(p[0]);
            min[1] = min[1].min(p[1]);
            max[0] = max[0].max(p[0]);
            max[1] = max[1].max(p[1]);
        }
    }
    if !min[0].is_finite() {
        return Err(CoreError::invalid("empty polyline set"));
    }
    let x0 = (min[0] / mesh).floor() as i64 - 1;
    let y0 = (min[1] / mesh).floor() as i64 - 1;
    let x1 = (max[0] / mesh).floor() as i64 + 1;
    let y1 = (max[1] / mesh).floor() as i64 + 1;
    let w = (x1 - x0 + 1) as usize;
    let h = (y1 - y0 + 1) as usize;
    if w.saturating_mul(h) > MAX_RASTER_SIDE * MAX_RASTER_SIDE {
        return Err(CoreError::capacity("cluster raster window too large"));
    }
    let mut win = Window::new(x0, y0, w, h);
    let mut rep: Option<(i64, i64)> = None;
    for pl in polylines {
        for seg in pl.windows(2) {
            supercover(seg[0], seg[1], mesh, |cx, cy| {
                if rep.is_none() {
                    rep = Some((cx, cy));
                }
                win.set(cx, cy);
            });
        }
    }
    let ext = flood_exterior(&win);
    let filled: Vec<bool> = ext.iter().map(|e| !e).collect();
    let rep = rep.ok_or_else(|| CoreError::invalid("no cells rasterized"))?;
    Ok(ClusterRaster { win, filled, rep })
}

/// Rim of a cluster raster: filled cells with a 4-neighbor that is exterior
/// (or off the window), in global cell coordinates. The flood eats every
/// non-wall cell next to the exterior, so rim cells are wall cells: rim
/// contact means the loop geometry itself comes within a cell, while a
/// strictly nested cluster — buried in the other's filled interior — has no
/// rim near the host's rim.
fn rim_cells(r: &ClusterRaster) -> Vec<(i64, i64)> {
    let (w, h) = (r.win.w, r.win.h);
    let mut out = Vec::new();
    for ly in 0..h {
        for lx in 0..w {
            if !r.filled[ly * w + lx] {
                continue;
            }
            let open = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)].iter().any(|&(dx, dy)| {
                let (nx, ny) = (lx as i64 + dx, ly as i64 + dy);
                nx < 0
                    || ny < 0
                    || nx >= w as i64
                    || ny >= h as i64
                    || !r.filled[ny as usize * w + nx as usize]
            });
            if open {
                out.push((r.win.x0 + lx as i64, r.win.y0 + ly as i64));
            }
        }
    }
    out
}

/// Compute outer boundaries of clusters and mark which are outermost.
///
/// Clusters whose rasters come within one cell of each other (Chebyshev
/// distance <= 1 between rim cells) bound a single hole of the complement
/// at this resolution — their contours would meet on the corner lattice —
/// so they are merged before tracing; the returned partition is coarsened
/// accordingly. A merged group is dropped when its raster lies inside
/// another group's filled region (nesting produces no rim contact, so it is
/// never mistaken for adjacency). Boundary vertices sit on the raster
/// corner lattice; collinear runs are collapsed. Distinct returned
/// boundaries are therefore always at least one cell apart.
pub fn outermost_boundaries(
    clusters: &ClusterSet,
    loops: &LoopSet,
    mesh: f64,
) -> Result<ClusterSet> {
    if !(mesh.is_finite() && mesh > 0.0) {
        return Err(CoreError::invalid("mesh must be positive"));
    }
    let k = clusters.clusters.len();
    if k == 0 {
        return Ok(ClusterSet::default());
    }
    let mut rasters: Vec<Option<ClusterRaster>> = Vec::with_capacity(k);
    for members in &clusters.clusters {
        let polylines: Vec<&[[f64; 2]]> = members
            .iter()
            .map(|&li| loops.loops[li].points.as_slice())
            .collect();
        rasters.push(Some(raster_for_polylines(&polylines, mesh)?));
    }

    // Group raster-adjacent clusters.
    let mut uf = UnionFind::new(k);
    let mut rim_map: HashMap<(i64, i64), u32> = HashMap::new();
    for (ci, raster) in rasters.iter().enumerate() {
        let rim = rim_cells(raster.as_ref().expect("raster present"));
        for &(cx, cy) in &rim {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    if let Some(&cj) = rim_map.get(&(cx + dx, cy + dy)) {
                        if cj as usize != ci {
                            uf.union(ci, cj as usize);
                        }
                    }
                }
            }
        }
        for cell in rim {
            rim_map.insert(cell, ci as u32);
        }
    }
    drop(rim_map);
    let mut by_root: HashMap<usize, Vec<usize>> = HashMap::new();
    for ci in 0..k {
        by_root.entry(uf.find(ci)).or_default().push(ci);
    }
    // Sorted loop-index lists per group, groups ordered by first element.
    let mut groups: Vec<(Vec<usize>, Vec<usize>)> = by_root
        .into_values()
        .map(|cluster_ids| {
            let mut loop_ids: Vec<usize> = cluster_ids
                .iter()
                .flat_map(|&ci| clusters.clusters[ci].iter().copied())
                .collect();
            loop_ids.sort_unstable();
            (loop_ids, cluster_ids)
        })
        .collect();
    groups.sort_by_key(|(loop_ids, _)| loop_ids[0]);

    let mut group_rasters: Vec<ClusterRaster> = Vec::with_capacity(groups.len());
    for (loop_ids, cluster_ids) in &groups {
        if cluster_ids.len() == 1 {
            group_rasters.push(rasters[cluster_ids[0]].take().expect("raster present"));
        } else {
            let polylines: Vec<&[[f64; 2]]> = loop_ids
                .iter()
                .map(|&li| loops.loops[li].points.as_slice())
                .collect();
            group_rasters.push(raster_for_polylines(&polylines, mesh)?);
        }
    }

    // Outermost = not inside any other group's filled region.
    let g = groups.len();
    let mut is_outer = vec![true; g];
    for i in 0..g {
        for j in 0..g {
            if i == j {
                continue;
            }
            let rep = group_rasters[i].rep;
            if group_rasters[j]
                .win
                .idx(rep.0, rep.1)
                .map(|ii| group_rasters[j].filled[ii])
                .unwrap_or(false)
            {
                is_outer[i] = false;
                break;
            }
        }
    }
    let mut outermost = Vec::new();
    let mut boundaries = Vec::new();
    for (i, r) in group_rasters.iter().enumerate() {
        if !is_outer[i] {
            continue;
        }
        let contours = trace_contours(&r.win, &r.filled);
        let best = contours
            .iter()
            .max_by(|a, b| {
                shoelace_area_cells(a)
                    .partial_cmp(&shoelace_area_cells(b))
                    .expect("areas are finite")
            })
            .ok_or_else(|| {
                CoreError::degenerate(
                    "contour tracing found no boundary; refine the mesh",
                )
            })?;
        let collapsed = collapse_collinear(best);
        if collapsed.len() < 4 {
            return Err(CoreError::degenerate(
                "degenerate raster contour; refine the mesh",
            ));
        }
        let poly: Vec<[f64; 2]> = collapsed
            .iter()
            .map(|&(cx, cy)| [cx as f64 * mesh, cy as f64 * mesh])
            .collect();
        outermost.push(i);
        boundaries.push(poly);
    }
    Ok(ClusterSet {
        clusters: groups.into_iter().map(|(loop_ids, _)| loop_ids).collect(),
        outermost,
        boundaries,
    })
}

/// Occupancy raster of the carpet approximation.
#[derive(Debug, Clone)]
pub struct CarpetMask {
    /// Row-major cells, 1 = carpet, 0 = surrounded (inside some outermost
    /// boundary, at raster precision) or outside the domain.
    pub grid: Vec<u8>,
    pub width: usize,
    pub height: usize,
    pub mesh: f64,
    /// Lower-left corner of cell (0, 0) in domain coordinates.
    pub origin: [f64; 2],
    /// Diameters of the outermost boundaries, sorted nonincreasing.
    pub boundary_diams: Vec<f64>,
    /// Number of cells whose center lies in the domain.
    pub domain_cells: usize,
    domain: Domain,
}

impl CarpetMask {
    #[inline]
    pub fn cell(&self, x: usize, y: usize) -> u8 {
        self.grid[y * self.width + x]
    }

    fn center(&self, x: usize, y: usize) -> [f64; 2] {
        [
            self.origin[0] + (x as f64 + 0.5) * self.mesh,
            self.origin[1] + (y as f64 + 0.5) * self.mesh,
        ]
    }

    /// Carpet cells divided by domain cells.
    pub fn area_fraction(&self) -> f64 {
        let ones = self.grid.iter().filter(|&&v| v == 1).count();
        ones as f64 / self.domain_cells.max(1) as f64
    }

    /// Occupied-box counts of the carpet at dyadic block sizes, coarse to
    /// fine: (box side in domain units, boxes containing a carpet cell).
    pub fn box_counts(&self, levels: usize) -> Vec<(f64, u64)> {
        let mut out = Vec::with_capacity(levels);
        let mut cur: Vec<bool> = self.grid.iter().map(|&v| v == 1).collect();
        let (mut w, mut h) = (self.width, self.height);
        let mut side = 1usize;
        let mut scales = Vec::new();
        loop {
            scales.push((side as f64 * self.mesh, cur.iter().filter(|&&b| b).count() as u64));
            if scales.len() >= levels || (w <= 4 && h <= 4) {
                break;
            }
            // OR-downsample 2x2 blocks.
            let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
            let mut next = vec![false; nw * nh];
            for y in 0..h {
                for x in 0..w {
                    if cur[y * w + x] {
                        next[(y / 2) * nw + x / 2] = true;
                    }
                }
            }
            cur = next;
            w = nw;
            h = nh;
            side *= 2;
        }
        scales.reverse(); // coarse first
        out.extend(scales);
        out
    }
}

/// Rasterize the domain minus the filled interiors of all outermost
/// boundaries. Cells touching a boundary curve count as surrounded: holes
/// are closed at cell scale, which keeps the hole union monotone when
/// lowering `diam_min` under coupled seeds.
pub fn carpet_mask(boundaries: &ClusterSet, config: &SoupConfig) -> Result<CarpetMask> {
    config.validate()?;
    let mesh = config.mesh;
    let origin = config.domain.origin();
    let side = (config.domain.extent() / mesh).round() as usize;
    let mut grid = vec![0u8; side * side];
    let mut domain_cells = 0usize;
    for y in 0..side {
        for x in 0..side {
            let c = [
                origin[0] + (x as f64 + 0.5) * mesh,
                origin[1] + (y as f64 + 0.5) * mesh,
            ];
            if config.domain.contains(c) {
                grid[y * side + x] = 1;
                domain_cells += 1;
            }
        }
    }
    let mut diams: Vec<f64> = Vec::with_capacity(boundaries.boundaries.len());
    for poly in &boundaries.boundaries {
        diams.push(hull_diameter(poly));
        let raster = raster_for_polylines(&[poly.as_slice()], mesh)?;
        for ly in 0..raster.win.h {
            for lx in 0..raster.win.w {
                if !raster.filled[ly * raster.win.w + lx] {
                    continue;
                }
                let gx = raster.win.x0 + lx as i64 - (origin[0] / mesh).round() as i64;
                let gy = raster.win.y0 + ly as i64 - (origin[1] / mesh).round() as i64;
                if gx >= 0 && gy >= 0 && (gx as usize) < side && (gy as usize) < side {
                    grid[gy as usize * side + gx as usize] = 0;
                }
            }
        }
    }
    diams.sort_by(|a, b| b.partial_cmp(a).expect("diameters are finite"));
    Ok(CarpetMask {
        grid,
        width: side,
        height: side,
        mesh,
        origin,
        boundary_diams: diams,
        domain_cells,
        domain: config.domain,
    })
}

/// Diagnostics for the three carpet (Whyburn) conditions at finite cutoff.
#[derive(Debug, Clone, Serialize)]
pub struct WhyburnReport {
    /// True when no two boundary contours come within half a raster cell.
    pub disjoint: bool,
    /// Smallest pairwise gap between boundary contours, exact when below
    /// `gap_search_radius`, otherwise equal to it (meaning "at least this").
    /// Absent with fewer than two boundaries.
    pub min_boundary_gap: Option<f64>,
    /// Radius beyond which pairwise gaps are not resolved.
    pub gap_search_radius: f64,
    pub boundary_count: usize,
    /// Boundaries with diameter above eps_diam (finite-scale surrogate of
    /// the diameters-shrink-to-zero condition).
    pub boundaries_above_eps_diam: usize,
    pub max_boundary_diam: f64,
    /// Fraction of eps-squares of the domain that meet a surrounded cell
    /// (surrogate of the dense-holes condition).
    pub density_fraction: f64,
    pub eps_density: f64,
    pub eps_diam: f64,
}

/// Evaluate the three carpet conditions on a mask and its boundaries.
pub fn whyburn_check(
    mask: &CarpetMask,
    boundaries: &ClusterSet,
    eps_density: f64,
    eps_diam: f64,
) -> Result<WhyburnReport> {
    if !(eps_density.is_finite() && eps_density > 0.0 && eps_diam.is_finite() && eps_diam > 0.0)
    {
        return Err(CoreError::invalid("eps parameters must be positive"));
    }
    let bnds = &boundaries.boundaries;
    let radius = 8.0 * mask.mesh;
    let mut min_gap: Option<f64> = None;
    if bnds.len() >= 2 {
        let h = radius;
        let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        let mut seg_loop: Vec<u32> = Vec::new();
        let mut seg_a: Vec<[f64; 2]> = Vec::new();
        let mut seg_b: Vec<[f64; 2]> = Vec::new();
        for (bi, poly) in bnds.iter().enumerate() {
            for w in poly.windows(2) {
                let id = seg_loop.len() as u32;
                insert_segment(&mut grid, id, w[0], w[1], 0.0, h);
                seg_loop.push(bi as u32);
                seg_a.push(w[0]);
                seg_b.push(w[1]);
            }
        }
        let mut best = f64::INFINITY;
        let mut tested: HashSet<(u32, u32)> = HashSet::new();
        for (&(cx, cy), ids) in &grid {
            // Compare against this bucket and its +x/+y neighbors (each
            // unordered bucket pair is visited once).
            for &(nx, ny) in &[(cx, cy), (cx + 1, cy), (cx, cy + 1), (cx + 1, cy + 1), (cx + 1, cy - 1)] {
                let Some(other) = grid.get(&(nx, ny)) else { continue };
                for &s in ids {
                    for &t in other {
                        if seg_loop[s as usize] == seg_loop[t as usize] || s == t {
                            continue;
                        }
                        let key = if s < t { (s, t) } else { (t, s) };
                        if !tested.insert(key) {
                            continue;
                        }
                        let d = seg_seg_distance(
                            seg_a[s as usize],
                            seg_b[s as usize],
                            seg_a[t as usize],
                            seg_b[t as usize],
                        );
                        best = best.min(d);
                    }
                }
            }
        }
        min_gap = Some(best.min(radius));
    }
    let disjoint = match min_gap {
        Some(g) => g > mask.mesh / 2.0,
        None => true,
    };

    let above = mask
        .boundary_diams
        .iter()
        .filter(|&&d| d > eps_diam)
        .count();
    let max_diam = mask.boundary_diams.first().copied().unwrap_or(0.0);

    // Density: eps-squares over the domain bounding box.
    let cells_per = Domain::extent(mask.domain) / eps_density;
    let int_ratio = (eps_density / mask.mesh).round();
    let use_int = (eps_density / mask.mesh - int_ratio).abs() < 1e-9 && int_ratio >= 1.0;
    let squares = cells_per.ceil() as usize;
    let mut has_hole = vec![false; squares * squares];
    let mut has_domain = vec![false; squares * squares];
    for y in 0..mask.height {
        for x in 0..mask.width {
            let (sx, sy) = if use_int {
                let r = int_ratio as usize;
                ((x / r).min(squares - 1), (y / r).min(squares - 1))
            } else {
                let c = mask.center(x, y);
                let fx = ((c[0] - mask.origin[0]) / eps_density).floor() as usize;
                let fy = ((c[1] - mask.origin[1]) / eps_density).floor() as usize;
                (fx.min(squares - 1), fy.min(squares - 1))
            };
            let in_domain = mask.domain.contains(mask.center(x, y));
            if in_domain {
                has_domain[sy * squares + sx] = true;
                if mask.cell(x, y) == 0 {
                    has_hole[sy * squares + sx] = true;
                }
            }
        }
    }
    let denom = has_domain.iter().filter(|&&b| b).count().max(1);
    let numer = has_hole.iter().filter(|&&b| b).count();
    Ok(WhyburnReport {
        disjoint,
        min_boundary_gap: min_gap,
        gap_search_radius: radius,
        boundary_count: bnds.len(),
        boundaries_above_eps_diam: above,
        max_boundary_diam: max_diam,
        density_fraction: numer as f64 / denom as f64,
        eps_density,
        eps_diam,
    })
}

/// Turning statistics of boundary contours across refinement levels.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryTurningStats {
    /// Boundaries analyzed (those with at least 64 cyclic vertices).
    pub analyzed: usize,
    pub levels: usize,
    /// Finest-level turning constant per analyzed boundary.
    pub per_loop_max: Vec<f64>,
    /// Median constant across boundaries, per level (coarse first).
    pub level_medians: Vec<f64>,
}

/// Run the closed-curve turning profile on every boundary with at least 64
/// cyclic vertices.
pub fn boundary_turning_stats(
    boundaries: &ClusterSet,
    levels: usize,
) -> Result<BoundaryTurningStats> {
    if levels == 0 {
        return Err(CoreError::invalid("need at least one level"));
    }
    let mut per_level: Vec<Vec<f64>> = vec![Vec::new(); levels];
    let mut per_loop_max = Vec::new();
    for poly in &boundaries.boundaries {
        if poly.len() < 65 {
            continue; // fewer than 64 cyclic vertices
        }
        let flat: Vec<f64> = poly.iter().flat_map(|p| [p[0], p[1]]).collect();
        let curve = PolyCurve::new(2, flat, None)?;
        let prof = closed_turning_profile(&curve, levels)?;
        for (l, rep) in prof.iter().enumerate() {
            per_level[l].push(rep.constant);
        }
        per_loop_max.push(prof.last().expect("levels >= 1").constant);
    }
    if per_loop_max.is_empty() {
        return Err(CoreError::degenerate(
            "no boundary has 64 cyclic vertices; refine the mesh",
        ));
    }
    Ok(BoundaryTurningStats {
        analyzed: per_loop_max.len(),
        levels,
        per_loop_max,
        level_medians: per_level.iter().map(|v| stats::median(v)).collect(),
    })
}
