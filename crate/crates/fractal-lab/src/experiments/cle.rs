//! Loop-soup carpet experiments: carpet-condition diagnostics plus box
//! dimension, and boundary-roughness comparison against circles.

use fractal_core::error::{CoreError, Result};
use fractal_core::geom::{closed_turning_profile, PolyCurve};
use fractal_core::loopsoup::{self, Domain, Intensity, SoupConfig};
use fractal_core::{io, stats};

use super::{replicate_seed, Outcome};
use crate::config::Config;
use crate::manifest::ArtifactSink;

pub(super) static CARPET_DEFAULTS: &[(&str, &str)] = &[
    ("delta", "0.02"),
    ("eps_density", "1/8"),
    ("eps_diam", "0.1"),
    ("kappa", "4"),
    ("mc_mass_samples", "2000"),
    ("mesh", "1/1024"),
    ("seed", "1"),
    ("t_max", "1/4"),
    ("t_min", "1/10000"),
    ("tol", "1/2048"),
];

struct CarpetParams {
    soup: SoupConfig,
    tol: f64,
    eps_density: f64,
    eps_diam: f64,
}

fn soup_config(cfg: &Config, seed: u64) -> Result<SoupConfig> {
    Ok(SoupConfig {
        domain: Domain::UnitSquare,
        intensity: Intensity::Kappa(cfg.f64("kappa")?),
        t_min: cfg.f64("t_min")?,
        t_max: cfg.f64("t_max")?,
        diam_min: cfg.f64("delta")?,
        mesh: cfg.f64("mesh")?,
        mc_mass_samples: cfg.usize("mc_mass_samples")?,
        seed,
    })
}

fn carpet_parse(cfg: &Config) -> Result<CarpetParams> {
    let p = CarpetParams {
        soup: soup_config(cfg, cfg.u64("seed")?)?,
        tol: cfg.f64("tol")?,
        eps_density: cfg.f64("eps_density")?,
        eps_diam: cfg.f64("eps_diam")?,
    };
    p.soup.validate()?;
    if !(p.eps_density > 0.0 && p.eps_diam > 0.0) {
        return Err(CoreError::invalid("eps parameters must be positive"));
    }
    Ok(p)
}

pub(super) fn carpet_check(cfg: &Config) -> Result<()> {
    carpet_parse(cfg).map(|_| ())
}

fn flatten(poly: &[[f64; 2]]) -> Vec<f64> {
    poly.iter().flat_map(|p| [p[0], p[1]]).collect()
}

/// Fit ln(count) against ln(1/side) over box sides in [4 mesh, 0.3].
fn box_dimension(counts: &[(f64, u64)], mesh: f64) -> (f64, f64, usize) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(side, count) in counts {
        if side < 4.0 * mesh - 1e-12 || side > 0.3 || count == 0 {
            continue;
        }
        xs.push((1.0 / side).ln());
        ys.push((count as f64).ln());
    }
    if xs.len() < 3 {
        return (f64::NAN, f64::NAN, xs.len());
    }
    let (slope, _intercept, r2) = stats::linear_fit(&xs, &ys);
    (slope, r2, xs.len())
}

/// One carpet at full resolution: sample the soup, cluster it, keep the
/// outermost cluster boundaries, rasterize the complement, and test the
/// three carpet conditions (disjoint boundaries, small boundaries, dense
/// holes) plus a box-counting dimension fit of the carpet raster.
pub(super) fn carpet_run(cfg: &Config, sink: &mut ArtifactSink) -> Result<Outcome> {
    let p = carpet_parse(cfg)?;
    let mass = loopsoup::truncated_loop_mass(&p.soup)?;
    let soup = loopsoup::sample_soup(&p.soup)?;
    let clusters = loopsoup::cluster_soup(&soup, p.tol)?;
    let outer = loopsoup::outermost_boundaries(&clusters, &soup, p.soup.mesh)?;
    let mask = loopsoup::carpet_mask(&outer, &p.soup)?;
    let report = loopsoup::whyburn_check(&mask, &outer, p.eps_density, p.eps_diam)?;

    let flat_loops: Vec<Vec<f64>> = soup.loops.iter().map(|l| flatten(&l.points)).collect();
    let slices: Vec<&[f64]> = flat_loops.iter().map(|v| v.as_slice()).collect();
    io::write_multi_polyline_csv(&sink.file("loops.csv"), &slices)?;
    let flat_bnd: Vec<Vec<f64>> = outer.boundaries.iter().map(|b| flatten(b)).collect();
    let slices: Vec<&[f64]> = flat_bnd.iter().map(|v| v.as_slice()).collect();
    io::write_multi_polyline_csv(&sink.file("boundaries.csv"), &slices)?;

    // Raster image, top row first, carpet white.
    let mut pixels = vec![0u8; mask.width * mask.height];
    for y in 0..mask.height {
        for x in 0..mask.width {
            pixels[(mask.height - 1 - y) * mask.width + x] =
                if mask.cell(x, y) == 1 { 255 } else { 0 };
        }
    }
    io::write_pgm(&sink.file("mask.pgm"), mask.width, mask.height, &pixels, true)?;
    io::write_json(&sink.file("whyburn.json"), &report)?;

    let levels = (mask.width.max(2) as f64).log2().ceil() as usize;
    let counts = mask.box_counts(levels);
    let (box_dim, box_r2, fit_points) = box_dimension(&counts, p.soup.mesh);
    let mut writer = csv::Writer::from_path(sink.file("boxes.csv"))?;
    writer.write_record(["side", "count"])?;
    for (side, count) in &counts {
        writer.write_record([format!("{:.17e}", side), count.to_string()])?;
    }
    writer.flush()?;

    let mut out = Outcome::default();
    out.metric("loops", soup.loops.len() as f64);
    out.metric("clusters", clusters.clusters.len() as f64);
    out.metric("boundaries", outer.boundaries.len() as f64);
    out.metric("area_fraction", mask.area_fraction());
    out.metric("density_fraction", report.density_fraction);
    out.metric("max_boundary_diam", report.max_boundary_diam);
    if let Some(gap) = report.min_boundary_gap {
        out.metric("min_boundary_gap", gap);
    }
    out.metric("mass_lambda", mass.lambda);
    out.metric("mass_radius", mass.radius);
    out.metric("box_dim", box_dim);
    out.metric("box_fit_r_squared", box_r2);
    out.metric("box_fit_points", fit_points as f64);
    out.predicate("boundaries_disjoint", report.disjoint);
    out.predicate("holes_dense", report.density_fraction >= 0.95);
    out.predicate("box_dim_sane", (1.6..=2.0).contains(&box_dim));
    Ok(out)
}

pub(super) static TURNING_DEFAULTS: &[(&str, &str)] = &[
    ("delta", "0.02"),
    ("kappa", "4"),
    ("levels", "3"),
    ("mc_mass_samples", "1000"),
    ("mesh", "1/512"),
    ("min_vertices", "64"),
    ("replicates", "50"),
    ("seed", "1"),
    ("t_max", "1/4"),
    ("t_min", "1/10000"),
    ("tol", "1/1024"),
];

struct TurningParams {
    soup: SoupConfig,
    tol: f64,
    levels: usize,
    min_vertices: usize,
    replicates: u64,
    seed: u64,
}

fn turning_parse(cfg: &Config) -> Result<TurningParams> {
    let seed = cfg.u64("seed")?;
    let p = TurningParams {
        soup: soup_config(cfg, seed)?,
        tol: cfg.f64("tol")?,
        levels: cfg.usize("levels")?,
        min_vertices: cfg.usize("min_vertices")?,
        replicates: cfg.u64("replicates")?,
        seed,
    };
    p.soup.validate()?;
    if p.levels == 0 || p.min_vertices < 8 {
        return Err(CoreError::invalid(
            "need levels >= 1 and min_vertices >= 8",
        ));
    }
    Ok(p)
}

pub(super) fn turning_check(cfg: &Config) -> Result<()> {
    turning_parse(cfg).map(|_| ())
}

/// Finest-level closed-curve turning constant of a polyline (first point
/// repeated last) with the profile's automatic stride cap.
fn finest_closed_constant(poly: &[[f64; 2]], levels: usize) -> Result<f64> {
    let curve = PolyCurve::from_points2(poly, None)?;
    let prof = closed_turning_profile(&curve, levels)?;
    Ok(prof.last().expect("levels >= 1").constant)
}

/// Per replicate, take the roughest outermost cluster boundary (largest
/// closed-curve turning constant) and compare it against a circle sampled
/// at the same vertex count: carpet boundaries should be markedly rougher.
pub(super) fn turning_run(cfg: &Config, sink: &mut ArtifactSink) -> Result<Outcome> {
    let p = turning_parse(cfg)?;
    let mut writer = csv::Writer::from_path(sink.file("turning.csv"))?;
    writer.write_record([
        "replicate",
        "max_constant",
        "vertices",
        "circle_baseline",
        "ratio",
    ])?;
    let mut ratios = Vec::new();
    let mut maxima = Vec::new();
    let mut analyzed_total = 0usize;
    for r in 0..p.replicates {
        let mut soup_cfg = p.soup.clone();
        soup_cfg.seed = replicate_seed(p.seed, r);
        let soup = loopsoup::sample_soup(&soup_cfg)?;
        if soup.loops.is_empty() {
            continue;
        }
        let clusters = loopsoup::cluster_soup(&soup, p.tol)?;
        let outer = loopsoup::outermost_boundaries(&clusters, &soup, soup_cfg.mesh)?;
        let mut best: Option<(f64, usize)> = None;
        for poly in &outer.boundaries {
            if poly.len() < p.min_vertices + 1 {
                continue;
            }
            analyzed_total += 1;
            let constant = finest_closed_constant(poly, p.levels)?;
            if best.is_none_or(|(c, _)| constant > c) {
                best = Some((constant, poly.len() - 1));
            }
        }
        let Some((constant, vertices)) = best else {
            continue;
        };
        let circle = loopsoup::circle_loop([0.5, 0.5], 0.25, vertices);
        let baseline = finest_closed_constant(&circle.points, p.levels)?;
        let ratio = constant / baseline;
        writer.write_record([
            r.to_string(),
            format!("{:.17e}", constant),
            vertices.to_string(),
            format!("{:.17e}", baseline),
            format!("{:.17e}", ratio),
        ])?;
        ratios.push(ratio);
        maxima.push(constant);
    }
    writer.flush()?;
    if ratios.is_empty() {
        return Err(CoreError::degenerate(
            "no replicate produced a boundary with enough vertices; refine the mesh",
        ));
    }
    let mut out = Outcome::default();
    out.metric("median_ratio", stats::median(&ratios));
    out.metric("median_max_constant", stats::median(&maxima));
    out.metric("replicates_with_boundary", ratios.len() as f64);
    out.metric("boundaries_analyzed", analyzed_total as f64);
    out.metric("replicates", p.replicates as f64);
    out.predicate("rougher_than_circle", stats::median(&ratios) >= 2.0);
    Ok(out)
}
