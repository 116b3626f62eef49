//! Bounded-turning constant of a polyline.
//!
//! For points x, y on a curve, write d(x, y) for the diameter of the sub-arc
//! between them. The turning constant is
//!
//! ```text
//!     C = sup_{x != y} d(x, y) / |x - y|,
//! ```
//!
//! the worst ratio of sub-arc diameter to endpoint gap. A curve with small C
//! cannot double back: every sub-arc stays inside a ball comparable to its
//! endpoint separation. On a sampled polyline the supremum runs over vertex
//! pairs, with sub-arc diameters measured over the sampled vertices between
//! them.

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::geom::PolyCurve;

/// Hard cap on the number of vertices accepted by [`turning_constant`].
///
/// The exact algorithm is quadratic; 4096 points keeps a single call around
/// 10^7 distance evaluations.
pub const MAX_TURNING_POINTS: usize = 4096;

/// How many coincident-endpoint pairs to record before truncating the list.
const MAX_INFINITE_WITNESSES: usize = 64;

/// Result of a turning-constant computation.
#[derive(Debug, Clone, Serialize)]
pub struct TurningReport {
    /// Max over vertex pairs (x, y) of sub-arc diameter / |x - y|, excluding
    /// coincident-endpoint pairs. Always >= 1 for a non-degenerate curve.
    pub constant: f64,
    /// Sub-arc endpoint indices (x, y) realizing the supremum.
    pub witness: (usize, usize),
    /// Inner vertex pair realizing the witness sub-arc's diameter; satisfies
    /// `witness.0 <= diameter_pair.0 < diameter_pair.1 <= witness.1` and
    /// `dist(diameter_pair) = constant * scale`.
    pub diameter_pair: (usize, usize),
    /// Endpoint separation |x - y| at the witness: the scale at which the
    /// worst turning occurs.
    pub scale: f64,
    /// Vertex pairs with coincident endpoints but positive sub-arc diameter.
    /// Such pairs have infinite ratio; they are excluded from `constant` and
    /// reported here (truncated to a fixed cap).
    pub infinite_witnesses: Vec<(usize, usize)>,
    /// True when `infinite_witnesses` was truncated.
    pub infinite_truncated: bool,
}

/// Exact turning constant of a polyline, with witnesses.
///
/// Instead of maximizing diam / gap over outer pairs directly (which needs a
/// diameter per pair), sweep the equivalent swapped form: for every inner
/// pair `(k, l)` let `m(k, l) = min_{i <= k, j >= l} |p_i - p_j|` be the
/// tightest enclosing endpoint gap; then
///
/// ```text
///     C = max_{k < l} |p_k - p_l| / m(k, l),
/// ```
///
/// because every sub-arc diameter is attained by some inner pair and every
/// inner pair is enclosed by the sub-arc realizing its `m`. The enclosing
/// minimizer `(i, j)` is the witness sub-arc; at the optimum its diameter
/// equals `|p_k - p_l|` exactly. The sweep maintains `m(k, l)` for all `l`
/// with a per-row suffix-min pass, giving O(n^2) time and O(n) extra space.
///
/// Errors: `Capacity` above [`MAX_TURNING_POINTS`]; `Degenerate` when the
/// curve has fewer than two distinct points.
pub fn turning_constant(curve: &PolyCurve) -> Result<TurningReport> {
    let n = curve.len();
    if n > MAX_TURNING_POINTS {
        return Err(CoreError::capacity(format!(
            "turning constant limited to {MAX_TURNING_POINTS} points, got {n}"
        )));
    }
    if n < 2 {
        return Err(CoreError::degenerate("turning constant needs at least two points"));
    }

    // next_diff[i] = smallest j > i with p_j != p_i, or n when none exists.
    let mut next_diff = vec![n; n];
    for i in (0..n - 1).rev() {
        next_diff[i] = if curve.dist(i, i + 1) > 0.0 {
            i + 1
        } else {
            next_diff[i + 1]
        };
    }
    if next_diff[0] == n {
        return Err(CoreError::degenerate("all points of the curve coincide"));
    }

    // m_val[l] after outer iteration k holds m(k, l) for l > k; m_wit[l] the
    // enclosing pair (i, j) attaining it.
    let mut m_val = vec![f64::INFINITY; n];
    let mut m_wit = vec![(0usize, 0usize); n];
    let mut row_dist = vec![0.0f64; n];

    let mut best = 0.0f64;
    let mut best_witness = (0usize, 1usize);
    let mut best_inner = (0usize, 1usize);
    let mut best_scale = 0.0f64;
    let mut infinite = Vec::new();
    let mut infinite_truncated = false;

    for k in 0..n - 1 {
        for l in k + 1..n {
            row_dist[l] = curve.dist(k, l);
        }
        // Fold this row's suffix minima d_k(l) = min_{j >= l} |p_k - p_j|
        // into m, tracking the minimizing j. Coincident pairs are excluded
        // from the supremum, so they must not be minimizer candidates either
        // (m stays the tightest POSITIVE enclosing gap; it is finite whenever
        // it is used, because (k, l) itself is a candidate when gap > 0).
        let mut suf = f64::INFINITY;
        let mut suf_j = n;
        for l in (k + 1..n).rev() {
            if row_dist[l] > 0.0 && row_dist[l] < suf {
                suf = row_dist[l];
                suf_j = l;
            }
            if suf < m_val[l] {
                m_val[l] = suf;
                m_wit[l] = (k, suf_j);
            }
        }
        for l in k + 1..n {
            let gap = row_dist[l];
            if gap == 0.0 {
                // Coincident inner endpoints: infinite ratio iff some vertex
                // strictly between differs from p_k.
                if next_diff[k] < l {
                    if infinite.len() < MAX_INFINITE_WITNESSES {
                        infinite.push((k, l));
                    } else {
                        infinite_truncated = true;
                    }
                }
                continue;
            }
            let ratio = gap / m_val[l];
            if ratio > best {
                best = ratio;
                best_witness = m_wit[l];
                best_inner = (k, l);
                best_scale = m_val[l];
            }
        }
    }

    debug_assert!(best >= 1.0);
    Ok(TurningReport {
        constant: best,
        witness: best_witness,
        diameter_pair: best_inner,
        scale: best_scale,
        infinite_witnesses: infinite,
        infinite_truncated,
    })
}

/// Turning reports across `levels` dyadic subsampling resolutions,
/// coarsest first. Witness indices refer to the original curve.
///
/// The last entry uses the finest stride: the smallest power of two whose
/// subsample fits the [`MAX_TURNING_POINTS`] cap. Level `k` (1-based) uses
/// that stride times `2^(levels - k)`. Every subsample keeps the final point.
/// The constants are nondecreasing: each coarser vertex set is a subset of
/// the finer one, so its pair supremum can only be smaller.
pub fn turning_profile(curve: &PolyCurve, levels: usize) -> Result<Vec<TurningReport>> {
    let n = curve.len();
    if levels == 0 {
        return Err(CoreError::invalid("turning profile needs at least one level"));
    }
    if levels > 62 || n < (1usize << levels) {
        return Err(CoreError::invalid(format!(
            "turning profile with {levels} levels needs at least 2^{levels} points, got {n}"
        )));
    }
    let mut base_stride = 1usize;
    while subsample_count(n, base_stride) > MAX_TURNING_POINTS {
        base_stride *= 2;
    }
    let mut out = Vec::with_capacity(levels);
    for k in 1..=levels {
        let stride = base_stride << (levels - k);
        let idx = curve.stride_indices(stride);
        let sub = curve.subsample(&idx)?;
        let report = turning_constant(&sub)?;
        out.push(map_report(report, &idx));
    }
    Ok(out)
}

/// Rewrite a report's vertex indices through a subsample index list.
fn map_report(rep: TurningReport, idx: &[usize]) -> TurningReport {
    TurningReport {
        witness: (idx[rep.witness.0], idx[rep.witness.1]),
        diameter_pair: (idx[rep.diameter_pair.0], idx[rep.diameter_pair.1]),
        infinite_witnesses: rep
            .infinite_witnesses
            .iter()
            .map(|&(a, b)| (idx[a], idx[b]))
            .collect(),
        ..rep
    }
}

/// Hard cap on the cyclic vertex count accepted by
/// [`closed_turning_constant`] (the exact algorithm is cubic).
pub const MAX_CLOSED_TURNING_POINTS: usize = 512;

/// Bounded-turning constant of a closed curve (first point repeated last).
///
/// A vertex pair of a closed curve bounds two complementary arcs; the curve
/// has bounded turning when the SMALLER of the two arc diameters is
/// controlled by the endpoint gap:
///
/// ```text
///     C = max_{x != y} min(diam arc1, diam arc2) / |x - y|.
/// ```
///
/// (Using the open-curve definition on a closed polyline is wrong: pairs
/// adjacent across the closure point would see the whole loop as their
/// "sub-arc" and blow the ratio up.) In the returned report, `witness` is
/// ordered so that the measured arc walks cyclically forward from
/// `witness.0` to `witness.1`; both indices lie in `0..len-1` (the closing
/// duplicate vertex is identified with index 0). Sampled circles score 1.
///
/// Errors: invalid-argument unless the curve has >= 4 points and its first
/// and last points coincide exactly; `Capacity` above
/// [`MAX_CLOSED_TURNING_POINTS`] cyclic vertices; `Degenerate` when all
/// points coincide.
pub fn closed_turning_constant(curve: &PolyCurve) -> Result<TurningReport> {
    let n = curve.len();
    if n < 4 {
        return Err(CoreError::invalid(
            "closed turning needs at least 4 points (3 distinct plus closure)",
        ));
    }
    if curve.point(0) != curve.point(n - 1) {
        return Err(CoreError::invalid(
            "closed turning requires the first point repeated exactly as the last",
        ));
    }
    let m = n - 1; // cyclic vertices
    if m > MAX_CLOSED_TURNING_POINTS {
        return Err(CoreError::capacity(format!(
            "closed turning limited to {MAX_CLOSED_TURNING_POINTS} cyclic vertices, got {m}"
        )));
    }
    if (1..m).all(|i| curve.dist(0, i) == 0.0) {
        return Err(CoreError::degenerate("all points of the curve coincide"));
    }

    // diam[i*m + s] = diameter of the forward arc from vertex i spanning s
    // steps (vertices i..i+s cyclically, inclusive); pair[.] attains it.
    let mut diam = vec![0.0f64; m * m];
    let mut pair = vec![(0u32, 0u32); m * m];
    for i in 0..m {
        let mut best = 0.0f64;
        let mut bp = (i as u32, i as u32);
        for s in 1..m {
            let t = (i + s) % m;
            for u in 0..s {
                let w = (i + u) % m;
                let d = curve.dist(t, w);
                if d > best {
                    best = d;
                    bp = (w as u32, t as u32);
                }
            }
            diam[i * m + s] = best;
            pair[i * m + s] = bp;
        }
    }

    let mut best = 0.0f64;
    let mut best_witness = (0usize, 1usize);
    let mut best_inner = (0usize, 1usize);
    let mut best_scale = 0.0f64;
    let mut infinite = Vec::new();
    let mut infinite_truncated = false;
    for i in 0..m {
        for s in 1..m {
            let j = (i + s) % m;
            let gap = curve.dist(i, j);
            let fwd = diam[i * m + s];
            let bwd = diam[j * m + (m - s)];
            if gap == 0.0 {
                if i < j && fwd.min(bwd) > 0.0 {
                    if infinite.len() < MAX_INFINITE_WITNESSES {
                        infinite.push((i, j));
                    } else {
                        infinite_truncated = true;
                    }
                }
                continue;
            }
            let (d, p, w) = if fwd <= bwd {
                (fwd, pair[i * m + s], (i, j))
            } else {
                (bwd, pair[j * m + (m - s)], (j, i))
            };
            let ratio = d / gap;
            if ratio > best {
                best = ratio;
                best_witness = w;
                best_inner = (p.0 as usize, p.1 as usize);
                best_scale = gap;
            }
        }
    }

    // Any arc contains its endpoints, so diam >= gap and the max is >= 1.
    debug_assert!(best >= 1.0);
    Ok(TurningReport {
        constant: best,
        witness: best_witness,
        diameter_pair: best_inner,
        scale: best_scale,
        infinite_witnesses: infinite,
        infinite_truncated,
    })
}

/// Closed-curve analogue of [`turning_profile`], coarsest first.
///
/// Subsamples keep every stride-th cyclic vertex plus the closing duplicate,
/// so each level is again a closed curve and coarser vertex sets nest inside
/// finer ones (constants nondecreasing). Witness indices refer to the
/// original curve.
pub fn closed_turning_profile(curve: &PolyCurve, levels: usize) -> Result<Vec<TurningReport>> {
    let n = curve.len();
    if levels == 0 {
        return Err(CoreError::invalid("turning profile needs at least one level"));
    }
    if n < 4 || curve.point(0) != curve.point(n - 1) {
        return Err(CoreError::invalid(
            "closed turning requires the first point repeated exactly as the last",
        ));
    }
    let m = n - 1;
    let mut base_stride = 1usize;
    while m.div_ceil(base_stride) > MAX_CLOSED_TURNING_POINTS {
        base_stride *= 2;
    }
    let coarsest = base_stride
        .checked_shl(levels as u32 - 1)
        .ok_or_else(|| CoreError::invalid("too many profile levels"))?;
    if m.div_ceil(coarsest) < 3 {
        return Err(CoreError::invalid(format!(
            "coarsest level keeps fewer than 3 cyclic vertices ({m} vertices, {levels} levels)"
        )));
    }
    let mut out = Vec::with_capacity(levels);
    for k in 1..=levels {
        let stride = base_stride << (levels - k);
        let mut idx: Vec<usize> = (0..m).step_by(stride).collect();
        idx.push(n - 1); // closing duplicate of vertex 0
        let sub = curve.subsample(&idx)?;
        let report = closed_turning_constant(&sub)?;
        out.push(map_report(report, &idx));
    }
    Ok(out)
}

fn subsample_count(n: usize, stride: usize) -> usize {
    // Points 0, stride, 2*stride, ..., plus the final point when missed.
    let base = (n - 1) / stride + 1;
    if (n - 1) % stride == 0 {
        base
    } else {
        base + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Direct reference implementation: for every endpoint pair, measure the
    /// enclosed sub-arc diameter by brute force.
    fn turning_oracle(curve: &PolyCurve) -> f64 {
        let n = curve.len();
        let mut best = 0.0f64;
        for k in 0..n {
            for l in k + 1..n {
                let gap = curve.dist(k, l);
                if gap == 0.0 {
                    continue;
                }
                let diam = curve.diameter(k, l).unwrap();
                best = best.max(diam / gap);
            }
        }
        best
    }

    fn check_witness_invariants(c: &PolyCurve, rep: &TurningReport) {
        let (x, y) = rep.witness;
        let (k, l) = rep.diameter_pair;
        assert!(x <= k && k < l && l <= y, "witness must enclose diameter pair");
        assert_relative_eq!(c.dist(x, y), rep.scale, max_relative = 1e-12);
        assert_relative_eq!(c.dist(k, l), rep.constant * rep.scale, max_relative = 1e-12);
        // The witness sub-arc's diameter is attained by the inner pair.
        assert_relative_eq!(
            c.diameter(x, y).unwrap(),
            c.dist(k, l),
            max_relative = 1e-12
        );
    }

    #[test]
    fn straight_segment_has_constant_one() {
        let pts: Vec<[f64; 2]> = (0..50).map(|i| [i as f64 * 0.1, 0.0]).collect();
        let c = PolyCurve::from_points2(&pts, None).unwrap();
        let rep = turning_constant(&c).unwrap();
        assert_relative_eq!(rep.constant, 1.0, max_relative = 1e-12);
        assert!(rep.infinite_witnesses.is_empty());
        check_witness_invariants(&c, &rep);
    }

    /// A semicircular arc: every sub-arc's diameter is its chord, so the
    /// constant is exactly 1 no matter the sampling.
    #[test]
    fn semicircle_has_constant_one() {
        let n = 200;
        let pts: Vec<[f64; 2]> = (0..=n)
            .map(|i| {
                let th = std::f64::consts::PI * i as f64 / n as f64;
                [th.cos(), th.sin()]
            })
            .collect();
        let c = PolyCurve::from_points2(&pts, None).unwrap();
        let rep = turning_constant(&c).unwrap();
        assert_relative_eq!(rep.constant, 1.0, max_relative = 1e-12);
        check_witness_invariants(&c, &rep);
    }

    /// U-shaped polyline [0,0]-[1,0]-[1,1]-[0,1] sampled densely: the worst
    /// pair is the two ends of the U (gap 1) against the diagonal diameter
    /// sqrt(2), giving exactly sqrt(2).
    #[test]
    fn u_polyline_constant_is_sqrt_two() {
        let mut pts = Vec::new();
        let m = 40;
        for i in 0..m {
            pts.push([i as f64 / m as f64, 0.0]);
        }
        for i in 0..m {
            pts.push([1.0, i as f64 / m as f64]);
        }
        for i in 0..=m {
            pts.push([1.0 - i as f64 / m as f64, 1.0]);
        }
        let c = PolyCurve::from_points2(&pts, None).unwrap();
        let rep = turning_constant(&c).unwrap();
        assert_relative_eq!(rep.constant, std::f64::consts::SQRT_2, max_relative = 1e-12);
        assert_relative_eq!(rep.scale, 1.0, max_relative = 1e-12);
        check_witness_invariants(&c, &rep);
    }

    #[test]
    fn matches_brute_force_on_wiggly_curves() {
        // Deterministic pseudo-random walks in the plane.
        let mut state = 0x1234_5678_9abc_def0u64;
        for trial in 0..6 {
            let n = 30 + trial * 17;
            let mut pts = Vec::with_capacity(n);
            let (mut x, mut y) = (0.0f64, 0.0f64);
            for _ in 0..n {
                pts.push([x, y]);
                let a = crate::rng::splitmix64(&mut state);
                let b = crate::rng::splitmix64(&mut state);
                x += crate::rng::unit_from_u64(a) - 0.5;
                y += crate::rng::unit_from_u64(b) - 0.5;
            }
            let c = PolyCurve::from_points2(&pts, None).unwrap();
            let rep = turning_constant(&c).unwrap();
            let oracle = turning_oracle(&c);
            assert_relative_eq!(rep.constant, oracle, max_relative = 1e-12);
            check_witness_invariants(&c, &rep);
        }
    }

    #[test]
    fn coincident_endpoints_reported_as_infinite() {
        // Closed triangle: first and last vertex coincide, interior differs.
        let c = PolyCurve::from_points2(
            &[[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.0, 0.0]],
            None,
        )
        .unwrap();
        let rep = turning_constant(&c).unwrap();
        assert_eq!(rep.infinite_witnesses, vec![(0, 3)]);
        assert!(rep.constant.is_finite());
        // A repeated vertex with nothing between is NOT an infinite witness.
        let c2 = PolyCurve::from_points2(&[[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]], None).unwrap();
        let rep2 = turning_constant(&c2).unwrap();
        assert!(rep2.infinite_witnesses.is_empty());
    }

    #[test]
    fn degenerate_and_capacity_errors() {
        let single = PolyCurve::from_points2(&[[1.0, 2.0]], None).unwrap();
        assert!(matches!(turning_constant(&single), Err(CoreError::Degenerate(_))));
        let same = PolyCurve::from_points2(&[[1.0, 2.0]; 5], None).unwrap();
        assert!(matches!(turning_constant(&same), Err(CoreError::Degenerate(_))));
        let ramp: Vec<f64> = (0..=MAX_TURNING_POINTS).map(|i| i as f64).collect();
        let big = PolyCurve::from_values1(&ramp, None).unwrap();
        assert!(matches!(turning_constant(&big), Err(CoreError::Capacity(_))));
    }

    #[test]
    fn profile_is_nondecreasing() {
        // Zig-zag curve with structure at several scales.
        let n = 1 << 9;
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                let wiggle = (40.0 * std::f64::consts::PI * t).sin() * 0.08
                    + (160.0 * std::f64::consts::PI * t).sin() * 0.02;
                [t, wiggle]
            })
            .collect();
        let c = PolyCurve::from_points2(&pts, None).unwrap();
        let prof = turning_profile(&c, 5).unwrap();
        assert_eq!(prof.len(), 5);
        for w in prof.windows(2) {
            assert!(
                w[1].constant >= w[0].constant - 1e-12,
                "profile must be nondecreasing"
            );
        }
        // Finest level equals the direct constant when the curve fits the
        // cap (identity mapping), checked with full invariants.
        let direct = turning_constant(&c).unwrap().constant;
        assert_relative_eq!(prof[4].constant, direct, max_relative = 1e-12);
        check_witness_invariants(&c, &prof[4]);
        // Coarser levels: witness indices refer to the original curve, so the
        // distance identities still hold (the sub-arc diameter identity only
        // holds over the subsampled vertex set).
        for rep in &prof {
            let (x, y) = rep.witness;
            let (k, l) = rep.diameter_pair;
            assert!(x <= k && k < l && l <= y);
            assert_relative_eq!(c.dist(x, y), rep.scale, max_relative = 1e-12);
            assert_relative_eq!(c.dist(k, l), rep.constant * rep.scale, max_relative = 1e-12);
        }
    }

    #[test]
    fn profile_rejects_short_curves() {
        let c = PolyCurve::from_values1(&[0.0, 1.0, 2.0], None).unwrap();
        assert!(turning_profile(&c, 3).is_err());
        assert!(turning_profile(&c, 0).is_err());
    }

    /// Cyclic-arc diameter by brute force (vertices `a..=b` walking forward
    /// modulo the cyclic count).
    fn cyclic_arc_diameter(c: &PolyCurve, a: usize, b: usize) -> f64 {
        let m = c.len() - 1;
        let steps = (b + m - a) % m;
        let arc: Vec<usize> = (0..=steps).map(|s| (a + s) % m).collect();
        let mut d = 0.0f64;
        for (u, &i) in arc.iter().enumerate() {
            for &j in &arc[u + 1..] {
                d = d.max(c.dist(i, j));
            }
        }
        d
    }

    fn check_closed_invariants(c: &PolyCurve, rep: &TurningReport) {
        let (a, b) = rep.witness;
        let (k, l) = rep.diameter_pair;
        assert_relative_eq!(c.dist(a, b), rep.scale, max_relative = 1e-12);
        assert_relative_eq!(c.dist(k, l), rep.constant * rep.scale, max_relative = 1e-12);
        assert_relative_eq!(
            cyclic_arc_diameter(c, a, b),
            c.dist(k, l),
            max_relative = 1e-12
        );
        // The measured arc is the smaller of the two.
        assert!(cyclic_arc_diameter(c, b, a) >= cyclic_arc_diameter(c, a, b) - 1e-12);
    }

    #[test]
    fn closed_circle_scores_one() {
        let n = 200;
        let pts: Vec<[f64; 2]> = (0..=n)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * (i % n) as f64 / n as f64;
                [th.cos(), th.sin()]
            })
            .collect();
        let c = PolyCurve::from_points2(&pts, None).unwrap();
        let rep = closed_turning_constant(&c).unwrap();
        // Every arc <= a half circle has its chord as diameter.
        assert_relative_eq!(rep.constant, 1.0, max_relative = 1e-9);
        assert!(rep.constant <= 1.1);
        check_closed_invariants(&c, &rep);
        // The open-curve definition would blow up across the closure point.
        let open = turning_constant(&c).unwrap();
        assert!(open.constant > 10.0);
    }

    #[test]
    fn closed_ellipse_scores_above_one() {
        let n = 240;
        let pts: Vec<[f64; 2]> = (0..=n)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * (i % n) as f64 / n as f64;
                [2.0 * th.cos(), th.sin()]
            })
            .collect();
        let c = PolyCurve::from_points2(&pts, None).unwrap();
        let rep = closed_turning_constant(&c).unwrap();
        assert!(
            rep.constant > 1.1 && rep.constant < 1.3,
            "2:1 ellipse constant {}",
            rep.constant
        );
        check_closed_invariants(&c, &rep);
    }

    #[test]
    fn closed_validation_and_infinite_witnesses() {
        let open = PolyCurve::from_points2(&[[0.0, 0.0], [1.0, 0.0], [0.5, 1.0]], None).unwrap();
        assert!(closed_turning_constant(&open).is_err());
        let unclosed =
            PolyCurve::from_points2(&[[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.1, 0.0]], None)
                .unwrap();
        assert!(closed_turning_constant(&unclosed).is_err());
        // Figure-eight: the pinch point appears twice among cyclic vertices.
        let eight = PolyCurve::from_points2(
            &[
                [0.0, 0.0],
                [1.0, 0.0],
                [1.0, 1.0],
                [0.0, 0.0],
                [-1.0, 0.0],
                [-1.0, -1.0],
                [0.0, 0.0],
            ],
            None,
        )
        .unwrap();
        let rep = closed_turning_constant(&eight).unwrap();
        assert_eq!(rep.infinite_witnesses, vec![(0, 3)]);
        let big: Vec<[f64; 2]> = (0..=(MAX_CLOSED_TURNING_POINTS + 1))
            .map(|i| {
                let th =
                    2.0 * std::f64::consts::PI * (i % (MAX_CLOSED_TURNING_POINTS + 1)) as f64
                        / (MAX_CLOSED_TURNING_POINTS + 1) as f64;
                [th.cos(), th.sin()]
            })
            .collect();
        let c = PolyCurve::from_points2(&big, None).unwrap();
        assert!(matches!(closed_turning_constant(&c), Err(CoreError::Capacity(_))));
    }

    #[test]
    fn closed_profile_nondecreasing_on_wiggly_loop() {
        let m = 256;
        let pts: Vec<[f64; 2]> = (0..=m)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * (i % m) as f64 / m as f64;
                let r = 1.0 + 0.22 * (7.0 * th).sin() + 0.08 * (15.0 * th).cos();
                [r * th.cos(), r * th.sin()]
            })
            .collect();
        let c = PolyCurve::from_points2(&pts, None).unwrap();
        let prof = closed_turning_profile(&c, 4).unwrap();
        assert_eq!(prof.len(), 4);
        for w in prof.windows(2) {
            assert!(w[1].constant >= w[0].constant - 1e-12);
        }
        let direct = closed_turning_constant(&c).unwrap().constant;
        assert_relative_eq!(prof[3].constant, direct, max_relative = 1e-12);
        check_closed_invariants(&c, &prof[3]); // finest level is unsubsampled
        for rep in &prof {
            assert_relative_eq!(
                c.dist(rep.witness.0, rep.witness.1),
                rep.scale,
                max_relative = 1e-12
            );
            assert_relative_eq!(
                c.dist(rep.diameter_pair.0, rep.diameter_pair.1),
                rep.constant * rep.scale,
                max_relative = 1e-12
            );
        }
    }
}
