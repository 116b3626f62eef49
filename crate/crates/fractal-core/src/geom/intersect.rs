//! Planar segment predicates: proper crossings, segment distance, hull
//! diameter, and a raster-bucketed self-intersection count for polylines.

use std::collections::{HashMap, HashSet};

use crate::error::{CoreError, Result};

type P2 = [f64; 2];

#[inline]
fn orient(a: P2, b: P2, c: P2) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// True when the open segments (p1, p2) and (p3, p4) cross transversally.
///
/// Shared endpoints, tangential touching, and collinear overlap all return
/// false: a "proper" crossing needs strictly opposite orientations on both
/// sides.
pub fn proper_crossing(p1: P2, p2: P2, p3: P2, p4: P2) -> bool {
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Euclidean distance between closed segments [a0, a1] and [b0, b1].
pub fn seg_seg_distance(a0: P2, a1: P2, b0: P2, b1: P2) -> f64 {
    if proper_crossing(a0, a1, b0, b1) {
        return 0.0;
    }
    point_seg_distance(a0, b0, b1)
        .min(point_seg_distance(a1, b0, b1))
        .min(point_seg_distance(b0, a0, a1))
        .min(point_seg_distance(b1, a0, a1))
}

/// Distance from point `p` to the closed segment [a, b].
pub fn point_seg_distance(p: P2, a: P2, b: P2) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = ap[0] - t * ab[0];
    let dy = ap[1] - t * ab[1];
    (dx * dx + dy * dy).sqrt()
}

/// Count proper self-crossings of a polyline at raster resolution `cell`.
///
/// Segments are bucketed into a grid of the given cell size (each segment
/// registered in every cell its bounding box meets), candidate pairs from
/// shared cells are deduplicated, and only pairs of segments at least
/// `min_index_gap` apart along the polyline are tested — consecutive
/// segments share a vertex and never cross properly anyway. Returns the
/// number of crossing pairs.
pub fn polyline_self_crossings(points: &[P2], cell: f64, min_index_gap: usize) -> Result<usize> {
    if !(cell.is_finite() && cell > 0.0) {
        return Err(CoreError::invalid("raster cell size must be positive"));
    }
    if points.len() < 2 {
        return Ok(0);
    }
    let nseg = points.len() - 1;
    if nseg > u32::MAX as usize {
        return Err(CoreError::capacity("too many segments for crossing count"));
    }
    let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    for s in 0..nseg {
        let (a, b) = (points[s], points[s + 1]);
        let x0 = (a[0].min(b[0]) / cell).floor() as i64;
        let x1 = (a[0].max(b[0]) / cell).floor() as i64;
        let y0 = (a[1].min(b[1]) / cell).floor() as i64;
        let y1 = (a[1].max(b[1]) / cell).floor() as i64;
        // Guard against absurd spans from a single long segment.
        if (x1 - x0 + 1).saturating_mul(y1 - y0 + 1) > 4_000_000 {
            return Err(CoreError::capacity(
                "segment spans too many raster cells; increase the cell size",
            ));
        }
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                buckets.entry((cx, cy)).or_default().push(s as u32);
            }
        }
    }
    // Candidate pairs, deduplicated. The count is a set cardinality, so the
    // map's iteration order does not affect the result.
    let mut crossing_pairs: HashSet<(u32, u32)> = HashSet::new();
    let gap = min_index_gap.max(1) as u32;
    for segs in buckets.values() {
        for (ai, &i) in segs.iter().enumerate() {
            for &j in &segs[ai + 1..] {
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                if hi - lo < gap {
                    continue;
                }
                if crossing_pairs.contains(&(lo, hi)) {
                    continue;
                }
                let (li, hj) = (lo as usize, hi as usize);
                if proper_crossing(
                    points[li],
                    points[li + 1],
                    points[hj],
                    points[hj + 1],
                ) {
                    crossing_pairs.insert((lo, hi));
                }
            }
        }
    }
    Ok(crossing_pairs.len())
}

/// Diameter of a finite planar point set (max pairwise distance), via its
/// convex hull.
///
/// Andrew's monotone chain builds the hull in O(n log n); the diameter is
/// then the max over hull-vertex pairs (quadratic in hull size, which is
/// small for raster-derived contours). Returns 0 for sets with fewer than
/// two points.
pub fn hull_diameter(points: &[P2]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let hull = convex_hull(points);
    let mut best = 0.0f64;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            let dx = hull[i][0] - hull[j][0];
            let dy = hull[i][1] - hull[j][1];
            best = best.max((dx * dx + dy * dy).sqrt());
        }
    }
    best
}

fn convex_hull(points: &[P2]) -> Vec<P2> {
    let mut pts: Vec<P2> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<P2> = Vec::with_capacity(pts.len() * 2);
    for &p in &pts {
        while hull.len() >= 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    // Upper chain: never pop below the completed lower chain.
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop(); // last point repeats the first
    hull
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn crossing_predicate_cases() {
        // X crossing.
        assert!(proper_crossing([0., 0.], [1., 1.], [0., 1.], [1., 0.]));
        // Shared endpoint: not proper.
        assert!(!proper_crossing([0., 0.], [1., 1.], [1., 1.], [2., 0.]));
        // T-junction (endpoint in interior): not proper.
        assert!(!proper_crossing([0., 0.], [2., 0.], [1., 0.], [1., 1.]));
        // Disjoint.
        assert!(!proper_crossing([0., 0.], [1., 0.], [0., 1.], [1., 1.]));
        // Collinear overlap: not proper.
        assert!(!proper_crossing([0., 0.], [2., 0.], [1., 0.], [3., 0.]));
    }

    #[test]
    fn segment_distances() {
        assert_relative_eq!(
            seg_seg_distance([0., 0.], [1., 0.], [0., 1.], [1., 1.]),
            1.0
        );
        assert_relative_eq!(
            seg_seg_distance([0., 0.], [1., 1.], [0., 1.], [1., 0.]),
            0.0
        );
        assert_relative_eq!(
            point_seg_distance([0., 1.], [-1., 0.], [1., 0.]),
            1.0
        );
        assert_relative_eq!(
            point_seg_distance([3., 0.], [-1., 0.], [1., 0.]),
            2.0
        );
    }

    #[test]
    fn self_crossing_counts() {
        // Figure-eight-ish bow tie: one proper crossing.
        let bow = [[0., 0.], [1., 1.], [1., 0.], [0., 1.], [0., 0.]];
        assert_eq!(polyline_self_crossings(&bow, 0.25, 2).unwrap(), 1);
        // Simple arc: none.
        let arc = [[0., 0.], [1., 0.], [2., 0.5], [3., 1.5]];
        assert_eq!(polyline_self_crossings(&arc, 0.25, 2).unwrap(), 0);
        // Crossing count independent of cell size.
        for cell in [0.03, 0.1, 0.7, 2.0] {
            assert_eq!(polyline_self_crossings(&bow, cell, 2).unwrap(), 1);
        }
        assert!(polyline_self_crossings(&bow, 0.0, 2).is_err());
    }

    #[test]
    fn hull_diameter_matches_brute_force() {
        let mut state = 77u64;
        let mut pts = Vec::new();
        for _ in 0..300 {
            let a = crate::rng::unit_from_u64(crate::rng::splitmix64(&mut state));
            let b = crate::rng::unit_from_u64(crate::rng::splitmix64(&mut state));
            pts.push([a * 3.0 - 1.0, b * 2.0]);
        }
        let brute = {
            let mut best = 0.0f64;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    let dx = pts[i][0] - pts[j][0];
                    let dy = pts[i][1] - pts[j][1];
                    best = best.max((dx * dx + dy * dy).sqrt());
                }
            }
            best
        };
        assert_relative_eq!(hull_diameter(&pts), brute, max_relative = 1e-12);
        assert_eq!(hull_diameter(&pts[..1]), 0.0);
        assert_relative_eq!(hull_diameter(&[[0., 0.], [3., 4.]]), 5.0);
    }
}
