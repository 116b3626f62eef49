//! Quasisymmetric triple distortion between two point samples.
//!
//! A map f is quasisymmetric when a single increasing homeomorphism eta
//! controls all triple ratios: |x - y| <= t |x - z| implies
//! |f(x) - f(y)| <= eta(t) |f(x) - f(z)|. Given matched samples of a domain
//! and its image, the empirical distortion data is the set of pairs
//! (t, t') = (|x-y|/|x-z|, |fx-fy|/|fx-fz|) over ordered triples; the upper
//! envelope of t' against t is the tightest eta the sample certifies.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::geom::PolyCurve;

/// Hard cap on the number of points per side (the scan is cubic).
pub const MAX_DISTORTION_POINTS: usize = 512;

/// Keep raw (t, t') pairs only for inputs up to this size.
const MAX_RAW_POINTS: usize = 40;

/// Envelope bins per decade of input ratio.
const BINS_PER_DECADE: f64 = 32.0;

/// One bin of the distortion envelope: the largest output ratio observed for
/// input ratios inside `[input_lo, input_hi)`.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeBin {
    pub input_lo: f64,
    pub input_hi: f64,
    pub max_output: f64,
    pub samples: u64,
}

/// Triple-distortion data for a matched pair of samples.
#[derive(Debug, Clone, Serialize)]
pub struct TripleDistortion {
    /// Raw (input ratio, output ratio) pairs; populated only for small
    /// inputs (see `pairs_truncated`).
    pub pairs: Vec<(f64, f64)>,
    /// True when the raw pair list was suppressed for size.
    pub pairs_truncated: bool,
    /// Upper envelope of output ratio against input ratio, in logarithmic
    /// bins, sorted by input.
    pub envelope: Vec<EnvelopeBin>,
    /// Set when some triple had coincident image points where the domain
    /// points were distinct: the map distorts that triple infinitely, and the
    /// triple is excluded from the envelope.
    pub infinite_distortion: bool,
    /// Number of ordered triples that contributed a finite ratio pair.
    pub triples: u64,
    /// Largest finite output ratio observed among input ratios <= 1 (the
    /// headline quasisymmetry figure: eta(1) for the sampled map).
    pub eta_at_one: f64,
}

/// Scan all ordered triples of matched samples and collect distortion data.
///
/// `domain` and `image` must have equal length n with 3 <= n <=
/// [`MAX_DISTORTION_POINTS`]; dimensions may differ. Triples with coincident
/// domain base pair (|x - z| = 0) are skipped: the input ratio is undefined.
/// Triples with |f(x) - f(z)| = 0 but |x - z| > 0 set `infinite_distortion`.
pub fn qs_triple_distortion(domain: &PolyCurve, image: &PolyCurve) -> Result<TripleDistortion> {
    let n = domain.len();
    if image.len() != n {
        return Err(CoreError::invalid(format!(
            "domain has {n} points but image has {}",
            image.len()
        )));
    }
    if n < 3 {
        return Err(CoreError::invalid("triple distortion needs at least three points"));
    }
    if n > MAX_DISTORTION_POINTS {
        return Err(CoreError::capacity(format!(
            "triple distortion limited to {MAX_DISTORTION_POINTS} points, got {n}"
        )));
    }

    // Precompute both distance matrices (n <= 512 keeps these ~4 MB).
    let dd = distance_matrix(domain);
    let di = distance_matrix(image);

    let keep_pairs = n <= MAX_RAW_POINTS;
    let mut pairs = Vec::new();
    let mut bins: BTreeMap<i32, (f64, u64)> = BTreeMap::new();
    let mut infinite = false;
    let mut triples = 0u64;
    let mut eta_at_one = 0.0f64;

    for x in 0..n {
        for y in 0..n {
            if y == x {
                continue;
            }
            let dxy = dd[x * n + y];
            let ixy = di[x * n + y];
            for z in 0..n {
                if z == x || z == y {
                    continue;
                }
                let dxz = dd[x * n + z];
                if dxz == 0.0 {
                    continue; // input ratio undefined
                }
                let ixz = di[x * n + z];
                if ixz == 0.0 {
                    // Distinct domain pair collapsed by the map.
                    infinite = true;
                    continue;
                }
                let t_in = dxy / dxz;
                let t_out = ixy / ixz;
                triples += 1;
                if t_in <= 1.0 && t_out > eta_at_one {
                    eta_at_one = t_out;
                }
                if keep_pairs {
                    pairs.push((t_in, t_out));
                }
                // dxy > 0 here (dxy = 0 with dxz > 0 gives t_in = 0, which
                // cannot happen: y != x and coincident x,y means dxy = 0 and
                // then t_in = 0 — bin it at the smallest representable bin).
                let bin = if t_in > 0.0 {
                    (t_in.log10() * BINS_PER_DECADE).floor() as i32
                } else {
                    i32::MIN
                };
                let entry = bins.entry(bin).or_insert((0.0, 0));
                if t_out > entry.0 {
                    entry.0 = t_out;
                }
                entry.1 += 1;
            }
        }
    }

    let envelope = bins
        .into_iter()
        .map(|(b, (max_output, samples))| {
            let (lo, hi) = if b == i32::MIN {
                (0.0, 0.0)
            } else {
                (
                    10f64.powf(b as f64 / BINS_PER_DECADE),
                    10f64.powf((b + 1) as f64 / BINS_PER_DECADE),
                )
            };
            EnvelopeBin {
                input_lo: lo,
                input_hi: hi,
                max_output,
                samples,
            }
        })
        .collect();

    Ok(TripleDistortion {
        pairs,
        pairs_truncated: !keep_pairs,
        envelope,
        infinite_distortion: infinite,
        triples,
        eta_at_one,
    })
}

fn distance_matrix(c: &PolyCurve) -> Vec<f64> {
    let n = c.len();
    let mut m = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = c.dist(i, j);
            m[i * n + j] = d;
            m[j * n + i] = d;
        }
    }
    m
}
