//! Fractal (Mandelbrot) percolation: recursive random retention of l-adic
//! subcubes of the unit cube, with survival, dimension, and
//! connectivity/perfectness diagnostics.

use std::collections::HashMap;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::geom::unionfind::UnionFind;
use crate::geom::ScalingFit;
use crate::rng::{self, tags};
use crate::stats::ProbabilityEstimate;

/// Expected deepest-level cell count above which sampling refuses to run.
pub const MAX_EXPECTED_CELLS: f64 = 4.0e6;

/// Hard cap on cells actually stored across all levels.
pub const MAX_TOTAL_CELLS: usize = 16_000_000;

/// Cell-count cap for the quadratic pair scans in [`disconnection_stats`].
pub const MAX_DISCONNECTION_CELLS: usize = 16_384;

/// A sampled percolation tree: the kept cells of Λ(l, p) per level.
///
/// A cell at level k is an axis-aligned cube of side l^-k identified by its
/// integer coordinate vector in {0..l^k-1}^n. Invariants: level 0 is the unit
/// cube (always kept); every kept cell's parent (coordinates divided by l) is
/// kept at the previous level; within a level, cells are lexicographically
/// sorted and distinct.
#[derive(Debug, Clone)]
pub struct PercTree {
    n: usize,
    l: u32,
    p: f64,
    depth: u32,
    /// levels[k]: flat coordinate buffer, n words per kept cell.
    levels: Vec<Vec<u32>>,
    seed: u64,
}

/// A cell named by its refinement path: digit vector per level, coarsest
/// first; `digits[j][a]` is the child offset along axis `a` chosen at
/// refinement step j.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellIndex {
    pub level: u32,
    pub digits: Vec<Vec<u8>>,
}

impl PercTree {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of kept cells at `level`.
    pub fn count(&self, level: u32) -> usize {
        self.levels[level as usize].len() / self.n
    }

    /// Coordinates of the `i`-th kept cell at `level` (lexicographic order).
    pub fn cell(&self, level: u32, i: usize) -> &[u32] {
        &self.levels[level as usize][i * self.n..(i + 1) * self.n]
    }

    /// Flat coordinate buffer of a level.
    pub fn level_cells(&self, level: u32) -> &[u32] {
        &self.levels[level as usize]
    }

    /// True when at least one cell survives at the full depth.
    pub fn survived(&self) -> bool {
        !self.levels[self.depth as usize].is_empty()
    }

    /// Digit-path view of a kept cell.
    pub fn cell_index(&self, level: u32, i: usize) -> CellIndex {
        let coords = self.cell(level, i);
        let mut digits = vec![vec![0u8; self.n]; level as usize];
        for (a, &c) in coords.iter().enumerate() {
            let mut rem = c;
            for j in (0..level as usize).rev() {
                digits[j][a] = (rem % self.l) as u8;
                rem /= self.l;
            }
        }
        CellIndex { level, digits }
    }

    /// Rebuild a tree from explicit per-level cell coordinates, enforcing all
    /// invariants (used for synthetic inputs and level truncation).
    pub fn from_levels(
        n: usize,
        l: u32,
        p: f64,
        levels: Vec<Vec<u32>>,
        seed: u64,
    ) -> Result<Self> {
        if levels.is_empty() {
            return Err(CoreError::invalid("at least the root level is required"));
        }
        let depth = (levels.len() - 1) as u32;
        validate_params(n, l, p, depth.max(1))?;
        if levels[0] != vec![0u32; n] {
            return Err(CoreError::invalid("level 0 must be exactly the unit cube"));
        }
        for (k, lev) in levels.iter().enumerate() {
            if lev.len() % n != 0 {
                return Err(CoreError::invalid(format!(
                    "level {k} buffer length {} is not a multiple of n = {n}",
                    lev.len()
                )));
            }
            let side = l.checked_pow(k as u32).ok_or_else(|| {
                CoreError::invalid(format!("cell coordinates overflow at level {k}"))
            })?;
            let cells: Vec<&[u32]> = lev.chunks(n).collect();
            if cells.iter().any(|c| c.iter().any(|&v| v >= side)) {
                return Err(CoreError::invalid(format!(
                    "level {k} has coordinates outside [0, {side})"
                )));
            }
            if cells.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CoreError::invalid(format!(
                    "level {k} cells must be lexicographically sorted and distinct"
                )));
            }
            if k > 0 {
                let parents: std::collections::HashSet<Vec<u32>> = levels[k - 1]
                    .chunks(n)
                    .map(|c| c.to_vec())
                    .collect();
                for c in &cells {
                    let parent: Vec<u32> = c.iter().map(|&v| v / l).collect();
                    if !parents.contains(&parent) {
                        return Err(CoreError::invalid(format!(
                            "level {k} cell {c:?} has no kept parent"
                        )));
                    }
                }
            }
        }
        Ok(PercTree { n, l, p, depth, levels, seed })
    }

    /// The tree truncated to `depth` (shares the retention draws, since kept
    /// sets at shallower levels are prefixes of the same sampling).
    pub fn truncated(&self, depth: u32) -> Result<PercTree> {
        if depth > self.depth {
            return Err(CoreError::invalid(format!(
                "cannot truncate depth-{} tree to {depth}",
                self.depth
            )));
        }
        Ok(PercTree {
            n: self.n,
            l: self.l,
            p: self.p,
            depth,
            levels: self.levels[..=depth as usize].to_vec(),
            seed: self.seed,
        })
    }
}

fn validate_params(n: usize, l: u32, p: f64, depth: u32) -> Result<()> {
    if n == 0 || n > 8 {
        return Err(CoreError::invalid("ambient dimension must lie in [1, 8]"));
    }
    if l < 2 {
        return Err(CoreError::invalid("branching factor l must be at least 2"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(CoreError::invalid("retention probability must lie in (0, 1]"));
    }
    if depth == 0 {
        return Err(CoreError::invalid("depth must be at least 1"));
    }
    if l.checked_pow(depth).is_none() {
        return Err(CoreError::invalid(format!(
            "l^depth = {l}^{depth} overflows cell coordinates"
        )));
    }
    Ok(())
}

/// Bernoulli retention draw for one node, keyed by position: the draw depends
/// only on (seed, level, cell coordinates), so retention at fixed seed is
/// monotone-coupled across p and independent of traversal order.
#[inline]
fn node_kept(seed: u64, level: u32, coords: &[u32], p: f64) -> bool {
    let mut words = Vec::with_capacity(coords.len() + 2);
    words.push(tags::PERC);
    words.push(level as u64);
    words.extend(coords.iter().map(|&c| c as u64));
    rng::keyed_unit(seed, &words) < p
}

/// Advance a mixed-radix offset vector in {0..l-1}^n lexicographically (last
/// axis fastest); returns false when the vector wraps past the end.
#[inline]
fn next_offset(offsets: &mut [u32], l: u32) -> bool {
    for a in (0..offsets.len()).rev() {
        offsets[a] += 1;
        if offsets[a] < l {
            return true;
        }
        offsets[a] = 0;
    }
    false
}

/// Sample a fractal percolation tree Λ(l, p) to the given depth.
///
/// Level by level, each child of a kept cell is retained independently with
/// probability p. Errors with advice when the expected deepest-level count
/// (p·l^n)^depth exceeds [`MAX_EXPECTED_CELLS`], or when the realized tree
/// exceeds [`MAX_TOTAL_CELLS`].
pub fn sample_percolation(n: usize, l: u32, p: f64, depth: u32, seed: u64) -> Result<PercTree> {
    validate_params(n, l, p, depth)?;
    let mean_children = p * (l as f64).powi(n as i32);
    let expected = mean_children.powi(depth as i32);
    if expected > MAX_EXPECTED_CELLS {
        return Err(CoreError::capacity(format!(
            "expected deepest-level count (p·l^n)^depth = {expected:.3e} exceeds {MAX_EXPECTED_CELLS:.1e}; \
             reduce depth or p (or l)"
        )));
    }
    let mut levels = vec![vec![0u32; n]];
    let mut total = 1usize;
    let mut child = vec![0u32; n];
    for k in 1..=depth {
        let prev = &levels[(k - 1) as usize];
        let mut next = Vec::new();
        for parent in prev.chunks(n) {
            let mut offsets = vec![0u32; n];
            loop {
                for a in 0..n {
                    child[a] = parent[a] * l + offsets[a];
                }
                if node_kept(seed, k, &child, p) {
                    next.extend_from_slice(&child);
                }
                if !next_offset(&mut offsets, l) {
                    break;
                }
            }
        }
        // Child blocks of distinct parents interleave lexicographically for
        // n >= 2, so restore the sorted invariant before storing the level.
        let m = next.len() / n;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_unstable_by(|&a, &b| next[a * n..(a + 1) * n].cmp(&next[b * n..(b + 1) * n]));
        let mut sorted = Vec::with_capacity(next.len());
        for i in order {
            sorted.extend_from_slice(&next[i * n..(i + 1) * n]);
        }
        let next = sorted;
        total += next.len() / n;
        if total > MAX_TOTAL_CELLS {
            return Err(CoreError::capacity(format!(
                "tree exceeded {MAX_TOTAL_CELLS} stored cells at level {k}; reduce depth or p"
            )));
        }
        levels.push(next);
        if levels[k as usize].is_empty() {
            // Extinct: all deeper levels are empty too.
            for _ in k + 1..=depth {
                levels.push(Vec::new());
            }
            break;
        }
    }
    Ok(PercTree { n, l, p, depth, levels, seed })
}

/// Monte Carlo survival probability: the fraction of independent trees with
/// at least one kept cell at the target depth, with a 3-sigma binomial
/// radius. Uses depth-first search with early exit instead of materializing
/// trees, so supercritical parameters are cheap.
pub fn survival_probability(
    n: usize,
    l: u32,
    p: f64,
    depth: u32,
    replicates: u64,
    seed: u64,
) -> Result<ProbabilityEstimate> {
    validate_params(n, l, p, depth)?;
    if replicates < 100 {
        return Err(CoreError::invalid("at least 100 replicates required"));
    }
    let flags: Vec<bool> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let key = rng::keyed_u64(seed, &[tags::REPLICATE, r]);
            let root = vec![0u32; n];
            survives_from(n, l, p, depth, key, 0, &root)
        })
        .collect();
    let hits = flags.iter().filter(|&&b| b).count() as u64;
    Ok(ProbabilityEstimate::from_hits(hits, replicates))
}

/// Depth-first survival probe from a kept cell at `level`; the per-node draws
/// match [`sample_percolation`] with master seed `key`, so a replicate
/// survives exactly when the corresponding sampled tree would.
fn survives_from(n: usize, l: u32, p: f64, depth: u32, key: u64, level: u32, coords: &[u32]) -> bool {
    if level == depth {
        return true;
    }
    let mut child = vec![0u32; n];
    let mut offsets = vec![0u32; n];
    loop {
        for a in 0..n {
            child[a] = coords[a] * l + offsets[a];
        }
        if node_kept(key, level + 1, &child, p)
            && survives_from(n, l, p, depth, key, level + 1, &child)
        {
            return true;
        }
        if !next_offset(&mut offsets, l) {
            return false;
        }
    }
}

/// Exact finite-depth survival probability of the associated branching
/// process: 1 - q_depth with q_{k+1} = ((1-p) + p q_k)^{l^n}, q_0 = 0.
///
/// This is the law of the cell-count process (offspring ~ Binomial(l^n, p)),
/// so it is an exact oracle for [`survival_probability`].
pub fn survival_oracle(n: usize, l: u32, p: f64, depth: u32) -> Result<f64> {
    validate_params(n, l, p, depth)?;
    let family = (l as f64).powi(n as i32);
    let mut q = 0.0f64;
    for _ in 0..depth {
        q = ((1.0 - p) + p * q).powf(family);
    }
    Ok(1.0 - q)
}

/// Dimension fit plus the branching-formula reference value.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionCheck {
    pub fit: ScalingFit,
    /// Reference dimension n + log p / log l.
    pub reference: f64,
}

/// Box-counting dimension of a surviving tree from its own level counts
/// (boxes of side l^-k are exactly the level-k cells).
///
/// `levels` selects which levels enter the fit; `None` uses 2..=depth,
/// dropping levels 0-1 where branching fluctuations dominate. Errors:
/// invalid-argument when the tree is extinct or fewer than two levels are
/// selected.
pub fn dimension_check(
    tree: &PercTree,
    levels: Option<RangeInclusive<u32>>,
) -> Result<DimensionCheck> {
    if !tree.survived() {
        return Err(CoreError::invalid(
            "dimension check requires a tree that survived to full depth",
        ));
    }
    let range = levels.unwrap_or(2.min(tree.depth)..=tree.depth);
    if *range.end() > tree.depth || range.is_empty() {
        return Err(CoreError::invalid(format!(
            "level range {range:?} outside the tree's 0..={}",
            tree.depth
        )));
    }
    if range.end() - range.start() < 1 {
        return Err(CoreError::invalid("dimension fit needs at least two levels"));
    }
    let mut scales = Vec::new();
    let mut counts = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in range.clone() {
        let s = (tree.l as f64).powi(-(k as i32));
        let c = tree.count(k) as u64;
        scales.push(s);
        counts.push(c);
        xs.push((1.0 / s).ln());
        ys.push((c as f64).ln());
    }
    let (slope, _intercept, r_squared) = crate::stats::linear_fit(&xs, &ys);
    let excluded = (0..*range.start())
        .map(|k| (tree.l as f64).powi(-(k as i32)))
        .collect();
    Ok(DimensionCheck {
        fit: ScalingFit {
            scales,
            counts,
            slope,
            r_squared,
            resolution: (tree.l as f64).powi(-(tree.depth as i32)),
            excluded,
        },
        reference: tree.n as f64 + tree.p.ln() / (tree.l as f64).ln(),
    })
}

/// Connectivity and perfectness diagnostics of the deepest level.
#[derive(Debug, Clone, Serialize)]
pub struct DisconnectionStats {
    /// Cell count of the largest face-connected component.
    pub largest_component_cells: usize,
    pub component_count: usize,
    /// Min over kept cells of the center distance to the nearest other kept
    /// cell, in units of the cell side (1 = face-adjacent). None when fewer
    /// than two cells survive.
    pub perfectness_min_gap: Option<f64>,
    /// Max over components of (component diameter / center-distance gap to
    /// the rest), in cell units; the component diameter counts the cells' own
    /// extent (+1). None when a single component holds every cell.
    pub disconnectedness_modulus: Option<f64>,
}

/// Compute [`DisconnectionStats`] at the deepest level via union-find over
/// face-adjacent cells and quadratic center-distance scans.
pub fn disconnection_stats(tree: &PercTree) -> Result<DisconnectionStats> {
    if !tree.survived() {
        return Err(CoreError::invalid(
            "disconnection stats require a tree that survived to full depth",
        ));
    }
    let n = tree.n;
    let m = tree.count(tree.depth);
    if m > MAX_DISCONNECTION_CELLS {
        return Err(CoreError::capacity(format!(
            "disconnection stats limited to {MAX_DISCONNECTION_CELLS} deepest-level cells, got {m}"
        )));
    }
    let cells: Vec<&[u32]> = tree.level_cells(tree.depth).chunks(n).collect();
    let index: HashMap<&[u32], usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();

    // Union face-adjacent cells (one coordinate differs by exactly 1).
    let mut uf = UnionFind::new(m);
    let mut probe = vec![0u32; n];
    for (i, cell) in cells.iter().enumerate() {
        for a in 0..n {
            probe.copy_from_slice(cell);
            // Only the +1 neighbour: the -1 pairing is found from the other side.
            probe[a] = cell[a] + 1;
            if let Some(&j) = index.get(probe.as_slice()) {
                uf.union(i, j);
            }
        }
    }
    let comp_count = uf.component_count();
    let mut comp_sizes: HashMap<usize, usize> = HashMap::new();
    let mut comp_of = vec![0usize; m];
    for i in 0..m {
        let r = uf.find(i);
        comp_of[i] = r;
        *comp_sizes.entry(r).or_insert(0) += 1;
    }
    let largest = comp_sizes.values().copied().max().unwrap_or(0);

    let dist = |i: usize, j: usize| -> f64 {
        let mut s = 0.0f64;
        for a in 0..n {
            let d = cells[i][a] as f64 - cells[j][a] as f64;
            s += d * d;
        }
        s.sqrt()
    };

    let mut min_gap = f64::INFINITY;
    // Per-component accumulators over the same pair sweep.
    let mut comp_diam: HashMap<usize, f64> = HashMap::new();
    let mut comp_gap: HashMap<usize, f64> = HashMap::new();
    for i in 0..m {
        for j in i + 1..m {
            let d = dist(i, j);
            if d < min_gap {
                min_gap = d;
            }
            if comp_of[i] == comp_of[j] {
                let e = comp_diam.entry(comp_of[i]).or_insert(0.0);
                if d > *e {
                    *e = d;
                }
            } else {
                for c in [comp_of[i], comp_of[j]] {
                    let e = comp_gap.entry(c).or_insert(f64::INFINITY);
                    if d < *e {
                        *e = d;
                    }
                }
            }
        }
    }
    let perfectness_min_gap = if m >= 2 { Some(min_gap) } else { None };
    let disconnectedness_modulus = if comp_count >= 2 {
        let mut worst = 0.0f64;
        for (&c, &gap) in &comp_gap {
            let diam = comp_diam.get(&c).copied().unwrap_or(0.0) + 1.0;
            let modulus = diam / gap;
            if modulus > worst {
                worst = modulus;
            }
        }
        Some(worst)
    } else {
        None
    };
    Ok(DisconnectionStats {
        largest_component_cells: largest,
        component_count: comp_count,
        perfectness_min_gap,
        disconnectedness_modulus,
    })
}
