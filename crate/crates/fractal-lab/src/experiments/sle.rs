//! Loewner-evolution experiments: trace emission, turning profiles, and the
//! deterministic correctness battery.

use num_complex::Complex64;

use fractal_core::error::{CoreError, Result};
use fractal_core::geom::turning_profile;
use fractal_core::loewner::{
    self, Driver, Geometry, SolverConfig, TraceCurve,
};
use fractal_core::stats;

use super::{median, replicate_seed, Outcome};
use crate::config::Config;
use crate::manifest::ArtifactSink;

fn solver_config(offset: f64, stride: usize) -> SolverConfig {
    SolverConfig {
        tip_offset: if offset > 0.0 { Some(offset) } else { None },
        tip_stride: stride.max(1),
        ..SolverConfig::default()
    }
}

pub(super) static TRACE_DEFAULTS: &[(&str, &str)] = &[
    ("cutoff_a", "1/4"),
    ("dt", "1/10000"),
    ("geometry", "chordal"),
    ("horizon", "1"),
    ("kappa", "2"),
    ("offset", "0"),
    ("rho", "none"),
    ("seed", "1"),
    ("stride", "1"),
    ("v0", "none"),
    ("w0", "0"),
];

struct TraceParams {
    geometry: String,
    kappa: f64,
    rho: Option<f64>,
    w0: f64,
    v0: Option<f64>,
    dt: f64,
    horizon: f64,
    cutoff_a: f64,
    offset: f64,
    stride: usize,
    seed: u64,
}

fn trace_parse(cfg: &Config) -> Result<TraceParams> {
    Ok(TraceParams {
        geometry: cfg.choice("geometry", &["chordal", "radial", "wholeplane"])?,
        kappa: cfg.f64("kappa")?,
        rho: cfg.opt_f64("rho")?,
        w0: cfg.f64("w0")?,
        v0: cfg.opt_f64("v0")?,
        dt: cfg.f64("dt")?,
        horizon: cfg.f64("horizon")?,
        cutoff_a: cfg.f64("cutoff_a")?,
        offset: cfg.f64("offset")?,
        stride: cfg.usize("stride")?,
        seed: cfg.u64("seed")?,
    })
}

pub(super) fn trace_check(cfg: &Config) -> Result<()> {
    trace_parse(cfg).map(|_| ())
}

/// Force-point default when `rho` is set but `v0` is not: one unit to the
/// right of the chordal seed, or the antipodal angle in the radial disk.
fn default_v0(geometry: &str, w0: f64) -> f64 {
    if geometry == "chordal" {
        w0 + 1.0
    } else {
        w0 + std::f64::consts::PI
    }
}

/// Compute one Loewner trace and write the driver and tip curves.
pub(super) fn trace_run(cfg: &Config, sink: &mut ArtifactSink) -> Result<Outcome> {
    let p = trace_parse(cfg)?;
    let solver = solver_config(p.offset, p.stride);
    let (driver, trace): (Option<Driver>, TraceCurve) = match p.geometry.as_str() {
        "wholeplane" => {
            let trace = loewner::whole_plane_trace(
                p.kappa, p.rho, p.cutoff_a, p.horizon, p.dt, p.seed, &solver,
            )?;
            (None, trace)
        }
        geometry => {
            let chordal = geometry == "chordal";
            let driver = match p.rho {
                None => loewner::drive_brownian(
                    p.kappa,
                    p.horizon,
                    p.dt,
                    p.seed,
                    if chordal { Geometry::Chordal } else { Geometry::Radial },
                )?,
                Some(rho) => {
                    let v0 = p.v0.unwrap_or_else(|| default_v0(geometry, p.w0));
                    if chordal {
                        loewner::drive_sle_rho_chordal(
                            p.kappa, rho, p.w0, v0, p.horizon, p.dt, p.seed,
                        )?
                    } else {
                        loewner::drive_sle_rho_radial(
                            p.kappa, rho, p.w0, v0, p.horizon, p.dt, p.seed,
                        )?
                    }
                }
            };
            let trace = if chordal {
                loewner::chordal_trace(&driver, &solver)?
            } else {
                loewner::radial_trace(&driver, &solver)?
            };
            (Some(driver), trace)
        }
    };

    if let Some(driver) = &driver {
        let path = sink.file("driver.csv");
        fractal_core::io::write_driver_csv(&path, &driver.times(), driver.w(), driver.v())?;
    }
    fractal_core::io::write_points_csv(&sink.file("trace.csv"), &trace.curve)?;

    let coords = trace.curve.coords();
    let finite = coords.iter().all(|c| c.is_finite());
    let in_domain = finite
        && match p.geometry.as_str() {
            "chordal" => (0..trace.curve.len()).all(|i| trace.curve.point(i)[1] >= -1e-9),
            "radial" => (0..trace.curve.len()).all(|i| {
                let q = trace.curve.point(i);
                q[0] * q[0] + q[1] * q[1] <= 1.0 + 1e-6
            }),
            _ => (0..trace.curve.len()).all(|i| {
                let q = trace.curve.point(i);
                q[0] * q[0] + q[1] * q[1] >= p.cutoff_a * p.cutoff_a * (1.0 - 1e-9)
            }),
        };

    let mut out = Outcome::default();
    out.metric("points", trace.curve.len() as f64);
    out.metric("max_step_displacement", trace.max_step_displacement);
    out.metric("swallowed_points", trace.swallowed_points as f64);
    if let Some(driver) = &driver {
        out.metric("driver_steps", driver.steps() as f64);
    }
    out.predicate("trace_finite", finite);
    out.predicate("trace_in_domain", in_domain);
    Ok(out)
}

pub(super) static TURNING_DEFAULTS: &[(&str, &str)] = &[
    ("dt", "1/10000"),
    ("horizon", "1"),
    ("kappa", "3"),
    ("levels", "3"),
    ("replicates", "50"),
    ("seed", "1"),
    ("stride", "4"),
];

struct TurningParams {
    kappa: f64,
    dt: f64,
    horizon: f64,
    levels: usize,
    replicates: u64,
    stride: usize,
    seed: u64,
}

fn turning_parse(cfg: &Config) -> Result<TurningParams> {
    Ok(TurningParams {
        kappa: cfg.f64("kappa")?,
        dt: cfg.f64("dt")?,
        horizon: cfg.f64("horizon")?,
        levels: cfg.usize("levels")?,
        replicates: cfg.u64("replicates")?,
        stride: cfg.usize("stride")?,
        seed: cfg.u64("seed")?,
    })
}

pub(super) fn turning_check(cfg: &Config) -> Result<()> {
    turning_parse(cfg).map(|_| ())
}

/// Turning profile of chordal SLE traces across refinement levels, median
/// over replicates; the median must grow strictly with refinement.
pub(super) fn turning_run(cfg: &Config, sink: &mut ArtifactSink) -> Result<Outcome> {
    let p = turning_parse(cfg)?;
    let solver = solver_config(0.0, p.stride);
    let mut writer = csv::Writer::from_path(sink.file("profile.csv"))?;
    writer.write_record(["replicate", "level", "scale", "constant"])?;
    let mut per_level: Vec<Vec<f64>> = vec![Vec::new(); p.levels];
    for r in 0..p.replicates {
        let driver = loewner::drive_brownian(
            p.kappa,
            p.horizon,
            p.dt,
            replicate_seed(p.seed, r),
            Geometry::Chordal,
        )?;
        let trace = loewner::chordal_trace(&driver, &solver)?;
        let profile = turning_profile(&trace.curve, p.levels)?;
        for (level, report) in profile.iter().enumerate() {
            per_level[level].push(report.constant);
            writer.write_record([
                r.to_string(),
                level.to_string(),
                format!("{:.17e}", report.scale),
                format!("{:.17e}", report.constant),
            ])?;
        }
    }
    writer.flush()?;

    let medians: Vec<f64> = per_level.iter().map(|v| median(v)).collect();
    let mut out = Outcome::default();
    for (level, m) in medians.iter().enumerate() {
        out.metric(&format!("median_constant_l{level}"), *m);
    }
    out.metric("replicates", p.replicates as f64);
    out.predicate(
        "median_strictly_increasing",
        medians.windows(2).all(|w| w[1] > w[0]),
    );
    Ok(out)
}

pub(super) static VALIDATE_DEFAULTS: &[(&str, &str)] = &[
    ("ks_dt", "1/1000"),
    ("ks_kappa", "2"),
    ("ks_replicates", "1000"),
    ("ode_dt", "1/1000000"),
    ("ode_horizon", "1/10"),
    ("seed", "1"),
];

struct ValidateParams {
    ks_dt: f64,
    ks_kappa: f64,
    ks_replicates: u64,
    ode_dt: f64,
    ode_horizon: f64,
    seed: u64,
}

fn validate_parse(cfg: &Config) -> Result<ValidateParams> {
    Ok(ValidateParams {
        ks_dt: cfg.f64("ks_dt")?,
        ks_kappa: cfg.f64("ks_kappa")?,
        ks_replicates: cfg.u64("ks_replicates")?,
        ode_dt: cfg.f64("ode_dt")?,
        ode_horizon: cfg.f64("ode_horizon")?,
        seed: cfg.u64("seed")?,
    })
}

pub(super) fn validate_check(cfg: &Config) -> Result<()> {
    validate_parse(cfg).map(|_| ())
}

struct Check {
    name: &'static str,
    value: f64,
    bound: f64,
}

/// Zero-driver trace against the exact vertical slit, the elementary
/// forward map against its closed form, hydrodynamic normalization at
/// large |z|, the kappa = 0 force-point gap ODEs against their closed
/// forms, and the rho = 0 reduction to plain drivers in law.
pub(super) fn validate_run(cfg: &Config, sink: &mut ArtifactSink) -> Result<Outcome> {
    let p = validate_parse(cfg)?;
    let solver = SolverConfig::default();
    let mut checks: Vec<Check> = Vec::new();

    // 1. Zero-driver chordal trace is gamma(t) = 2 i sqrt(t).
    {
        let driver = loewner::drive_brownian(0.0, 1.0, 1e-3, p.seed, Geometry::Chordal)?;
        let trace = loewner::chordal_trace(&driver, &solver_config(0.0, 1))?;
        let mut err = 0.0f64;
        let times = trace.curve.times().expect("trace curves are time-stamped");
        for i in 0..trace.curve.len() {
            let q = trace.curve.point(i);
            let want = 2.0 * times[i].sqrt();
            err = err.max(q[0].abs().hypot(q[1] - want));
        }
        checks.push(Check { name: "zero_driver_trace", value: err, bound: 1e-9 });
    }

    // 2. Elementary forward map vs sqrt(z^2 + 4t). A one-step driver makes
    // the composition the exact elementary map; z = 2i, t = 1 lands on the
    // hull tip where the closed form is 0 exactly.
    {
        let driver = Driver::from_values(
            fractal_core::loewner::DriverKind::ChordalBm,
            0.0,
            None,
            1.0,
            vec![0.0, 0.0],
            None,
            p.seed,
        )?;
        let mut rel = 0.0f64;
        for z in [
            Complex64::new(0.0, 2.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(-1.5, 0.25),
            Complex64::new(0.4, 0.1),
        ] {
            let fwd = loewner::forward_map(&driver, z, 1.0, &solver)?;
            // Branch with positive imaginary part: the hull map preserves
            // the upper half plane.
            let mut want = (z * z + Complex64::new(4.0, 0.0)).sqrt();
            if want.im < 0.0 {
                want = -want;
            }
            let err = (fwd.value - want).norm();
            rel = rel.max(err / want.norm().max(z.norm()));
        }
        checks.push(Check { name: "forward_map_closed_form", value: rel, bound: 1e-8 });
    }

    // 3. Hydrodynamic normalization: g_t(z) = z + 2t/z + O(|z|^-2) far out.
    {
        let driver =
            loewner::drive_brownian(p.ks_kappa, 1.0, 1e-3, p.seed, Geometry::Chordal)?;
        let mut worst = 0.0f64;
        for z in [Complex64::new(0.0, 1e3), Complex64::new(600.0, 800.0)] {
            let t = driver.horizon();
            let fwd = loewner::forward_map(&driver, z, t, &solver)?;
            let residual = (fwd.value - z - Complex64::new(2.0 * t, 0.0) / z).norm();
            let allowance = 10.0 * z.norm().powi(-2) * t;
            worst = worst.max(residual / allowance);
        }
        checks.push(Check { name: "hydrodynamic_ratio", value: worst, bound: 1.0 });
    }

    // 4. kappa = 0 chordal gap ODE: with W0 = 0, V0 = 1 the gap D = W - V
    // solves D' = (rho + 2)/D, so D(t) = -sqrt(1 + 2(rho + 2) t) and
    // W(t) = (rho/(rho+2)) (D(t) + 1).
    {
        let rho = 2.0;
        let driver = loewner::drive_sle_rho_chordal(
            0.0, rho, 0.0, 1.0, p.ode_horizon, p.ode_dt, p.seed,
        )?;
        let v = driver.v().expect("rho driver carries a force point");
        let mut err = 0.0f64;
        for (k, (&w, &vk)) in driver.w().iter().zip(v).enumerate() {
            let t = k as f64 * p.ode_dt;
            let d = -(1.0 + 2.0 * (rho + 2.0) * t).sqrt();
            let want_w = rho / (rho + 2.0) * (d + 1.0);
            err = err.max((w - want_w).abs()).max(((w - vk) - d).abs());
        }
        checks.push(Check { name: "gap_ode_chordal", value: err, bound: 1e-6 });
    }

    // 5. kappa = 0 radial gap ODE: the gap G = W - V solves
    // G' = (rho/2 + 1) cot(G/2), i.e. cos(G/2) decays as e^{-c t / 2}.
    {
        let rho = 1.0;
        let g0 = std::f64::consts::FRAC_PI_2;
        let driver = loewner::drive_sle_rho_radial(
            0.0, rho, g0, 0.0, p.ode_horizon, p.ode_dt, p.seed,
        )?;
        let v = driver.v().expect("rho driver carries a force point");
        let c = rho / 2.0 + 1.0;
        let mut err = 0.0f64;
        for (k, (&w, &vk)) in driver.w().iter().zip(v).enumerate() {
            let t = k as f64 * p.ode_dt;
            let gap = (w - vk).rem_euclid(std::f64::consts::TAU);
            let want = 2.0 * ((g0 / 2.0).cos() * (-c * t / 2.0).exp()).acos();
            err = err.max((gap - want).abs());
        }
        checks.push(Check { name: "gap_ode_radial", value: err, bound: 1e-6 });
    }

    // 6 + 7. rho = 0 reduces to the plain driver in law: two-sample KS on
    // terminal driver values at the 1% level.
    {
        let n = p.ks_replicates;
        let crit = stats::ks_two_sample_critical(n as usize, n as usize, 0.01);
        let chordal_bm: Vec<f64> = (0..n)
            .map(|r| {
                let driver = loewner::drive_brownian(
                    p.ks_kappa,
                    1.0,
                    p.ks_dt,
                    replicate_seed(p.seed, r),
                    Geometry::Chordal,
                )?;
                Ok(*driver.w().last().expect("driver has steps"))
            })
            .collect::<Result<_>>()?;
        let chordal_rho: Vec<f64> = (0..n)
            .map(|r| {
                let driver = loewner::drive_sle_rho_chordal(
                    p.ks_kappa,
                    0.0,
                    0.0,
                    1.0,
                    1.0,
                    p.ks_dt,
                    replicate_seed(p.seed, n + r),
                )?;
                Ok(*driver.w().last().expect("driver has steps"))
            })
            .collect::<Result<_>>()?;
        let ks = stats::ks_two_sample(&chordal_bm, &chordal_rho);
        checks.push(Check { name: "rho_zero_ks_chordal", value: ks, bound: crit });

        let radial_bm: Vec<f64> = (0..n)
            .map(|r| {
                let driver = loewner::drive_brownian(
                    p.ks_kappa,
                    1.0,
                    p.ks_dt,
                    replicate_seed(p.seed, 2 * n + r),
                    Geometry::Radial,
                )?;
                Ok(*driver.w().last().expect("driver has steps"))
            })
            .collect::<Result<_>>()?;
        let radial_rho: Vec<f64> = (0..n)
            .map(|r| {
                let driver = loewner::drive_sle_rho_radial(
                    p.ks_kappa,
                    0.0,
                    std::f64::consts::PI,
                    0.0,
                    1.0,
                    p.ks_dt,
                    replicate_seed(p.seed, 3 * n + r),
                )?;
                // Recenter: the rho driver starts at w0 = pi.
                Ok(*driver.w().last().expect("driver has steps") - std::f64::consts::PI)
            })
            .collect::<Result<_>>()?;
        let ks = stats::ks_two_sample(&radial_bm, &radial_rho);
        checks.push(Check { name: "rho_zero_ks_radial", value: ks, bound: crit });
    }

    let mut writer = csv::Writer::from_path(sink.file("checks.csv"))?;
    writer.write_record(["check", "value", "bound", "pass"])?;
    let mut out = Outcome::default();
    for c in &checks {
        let ok = c.value <= c.bound;
        writer.write_record([
            c.name.to_string(),
            format!("{:.17e}", c.value),
            format!("{:.17e}", c.bound),
            (ok as u8).to_string(),
        ])?;
        out.metric(c.name, c.value);
        out.metric(&format!("{}_bound", c.name), c.bound);
        out.predicate(c.name, ok);
    }
    writer.flush()?;
    if checks.is_empty() {
        return Err(CoreError::invalid("validation battery is empty"));
    }
    Ok(out)
}
