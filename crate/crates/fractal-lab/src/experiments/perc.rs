//! Fractal-percolation experiments: dimension fits on surviving trees and
//! survival/count statistics against the branching-process oracle.

use fractal_core::error::{CoreError, Result};
use fractal_core::percolation::{self, PercTree};

use super::{replicate_seed, Outcome};
use crate::config::Config;
use crate::manifest::ArtifactSink;

pub(super) static DIM_DEFAULTS: &[(&str, &str)] = &[
    ("depth", "7"),
    ("l", "3"),
    ("n", "2"),
    ("p", "0.7"),
    ("replicates", "30"),
    ("seed", "1"),
    ("tolerance", "0.1"),
];

struct DimParams {
    n: usize,
    l: u32,
    p: f64,
    depth: u32,
    replicates: u64,
    tolerance: f64,
    seed: u64,
}

fn dim_parse(cfg: &Config) -> Result<DimParams> {
    Ok(DimParams {
        n: cfg.usize("n")?,
        l: cfg.u32("l")?,
        p: cfg.f64("p")?,
        depth: cfg.u32("depth")?,
        replicates: cfg.u64("replicates")?,
        tolerance: cfg.f64("tolerance")?,
        seed: cfg.u64("seed")?,
    })
}

pub(super) fn dim_check(cfg: &Config) -> Result<()> {
    dim_parse(cfg).map(|_| ())
}

/// Box-counting dimension of surviving trees (level-k cells are exactly the
/// boxes of side l^-k), averaged over surviving replicates, against the
/// similarity value n + log p / log l.
pub(super) fn dim_run(cfg: &Config, sink: &mut ArtifactSink) -> Result<Outcome> {
    let p = dim_parse(cfg)?;
    let mut writer = csv::Writer::from_path(sink.file("counts.csv"))?;
    writer.write_record(["replicate", "level", "count"])?;
    let mut slopes = Vec::new();
    let mut r2s = Vec::new();
    let mut reference = f64::NAN;
    let mut sample: Option<PercTree> = None;
    for r in 0..p.replicates {
        let tree =
            percolation::sample_percolation(p.n, p.l, p.p, p.depth, replicate_seed(p.seed, r))?;
        for level in 0..=p.depth {
            writer.write_record([
                r.to_string(),
                level.to_string(),
                tree.count(level).to_string(),
            ])?;
        }
        if !tree.survived() {
            continue;
        }
        let check = percolation::dimension_check(&tree, None)?;
        slopes.push(check.fit.slope);
        r2s.push(check.fit.r_squared);
        reference = check.reference;
        if sample.is_none() {
            sample = Some(tree);
        }
    }
    writer.flush()?;
    if slopes.is_empty() {
        return Err(CoreError::degenerate(
            "no replicate survived to full depth; raise p or lower depth",
        ));
    }
    // Raster of one surviving tree at a viewable depth.
    if let Some(tree) = &sample {
        if p.n == 2 {
            let view = tree.truncated(p.depth.min(5))?;
            fractal_core::io::write_perc_pgm(&sink.file("sample.pgm"), &view, true)?;
        }
    }

    let mean_slope = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let mean_r2 = r2s.iter().sum::<f64>() / r2s.len() as f64;
    let mut out = Outcome::default();
    out.metric("dim_estimate", mean_slope);
    out.metric("reference", reference);
    out.metric("surviving", slopes.len() as f64);
    out.metric("replicates", p.replicates as f64);
    out.metric("fit_r_squared_mean", mean_r2);
    out.predicate(
        "dim_within_tolerance",
        (mean_slope - reference).abs() <= p.tolerance,
    );
    Ok(out)
}

pub(super) static SURVIVAL_DEFAULTS: &[(&str, &str)] = &[
    ("depth", "12"),
    ("l", "3"),
    ("n", "2"),
    ("p", "1/9"),
    ("replicates", "1000"),
    ("seed", "1"),
];

struct SurvivalParams {
    n: usize,
    l: u32,
    p: f64,
    depth: u32,
    replicates: u64,
    seed: u64,
}

fn survival_parse(cfg: &Config) -> Result<SurvivalParams> {
    Ok(SurvivalParams {
        n: cfg.usize("n")?,
        l: cfg.u32("l")?,
        p: cfg.f64("p")?,
        depth: cfg.u32("depth")?,
        replicates: cfg.u64("replicates")?,
        seed: cfg.u64("seed")?,
    })
}

pub(super) fn survival_check(cfg: &Config) -> Result<()> {
    survival_parse(cfg).map(|_| ())
}

/// Branching-process variance of the level-k cell count for offspring mean
/// m and variance s2: s2 m^{k-1} (m^k - 1)/(m - 1), degenerating to k s2 at
/// m = 1.
fn count_variance(m: f64, s2: f64, k: u32) -> f64 {
    if (m - 1.0).abs() < 1e-12 {
        k as f64 * s2
    } else {
        s2 * m.powi(k as i32 - 1) * (m.powi(k as i32) - 1.0) / (m - 1.0)
    }
}

/// Survival frequency and mean level-k cell counts over many replicates,
/// both checked against the exact branching-process law: counts within 3
/// standard errors of (p l^n)^k, survival within the 3-sigma binomial band
/// of the extinction-recursion oracle.
pub(super) fn survival_run(cfg: &Config, sink: &mut ArtifactSink) -> Result<Outcome> {
    let p = survival_parse(cfg)?;
    if p.replicates < 100 {
        return Err(CoreError::invalid("replicates must be at least 100"));
    }
    let cells = (p.l as f64).powi(p.n as i32);
    let m = p.p * cells;
    let s2 = cells * p.p * (1.0 - p.p);
    let mut sums = vec![0.0f64; p.depth as usize + 1];
    let mut survived = 0u64;
    for r in 0..p.replicates {
        let tree =
            percolation::sample_percolation(p.n, p.l, p.p, p.depth, replicate_seed(p.seed, r))?;
        if tree.survived() {
            survived += 1;
        }
        for level in 0..=p.depth {
            sums[level as usize] += tree.count(level) as f64;
        }
    }

    let mut writer = csv::Writer::from_path(sink.file("counts.csv"))?;
    writer.write_record(["level", "mean_count", "expected", "z"])?;
    let mut max_z = 0.0f64;
    for level in 1..=p.depth {
        let mean = sums[level as usize] / p.replicates as f64;
        let expected = m.powi(level as i32);
        let se = (count_variance(m, s2, level) / p.replicates as f64).sqrt();
        let z = if se > 0.0 { (mean - expected).abs() / se } else { 0.0 };
        max_z = max_z.max(z);
        writer.write_record([
            level.to_string(),
            format!("{:.17e}", mean),
            format!("{:.17e}", expected),
            format!("{:.17e}", z),
        ])?;
    }
    writer.flush()?;

    let oracle = percolation::survival_oracle(p.n, p.l, p.p, p.depth)?;
    let freq = survived as f64 / p.replicates as f64;
    let band = 3.0 * (oracle * (1.0 - oracle) / p.replicates as f64).sqrt();

    let mut out = Outcome::default();
    out.metric("survival_fraction", freq);
    out.metric("survival_oracle", oracle);
    out.metric("survival_band", band);
    out.metric("max_count_z", max_z);
    out.metric("offspring_mean", m);
    out.metric("replicates", p.replicates as f64);
    out.predicate("counts_within_3sigma", max_z <= 3.0);
    out.predicate("survival_matches_oracle", (freq - oracle).abs() <= band);
    Ok(out)
}
