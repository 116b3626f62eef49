//! Loewner engines: driving-function generators and trace extraction for
//! chordal, radial, and whole-plane curve families.
//!
//! Drivers are piecewise constant over each time step, so every elementary
//! map of the evolution has a closed form:
//!
//! * chordal step of duration h with driving value c:
//!   forward `g(z) = c + sqrt((z-c)^2 + 4h)`, inverse
//!   `f(w) = c + sqrt((w-c)^2 - 4h)` (branch asymptotic to the identity);
//! * radial step with driving point `xi = e^{i theta}` uses
//!   `m(z) = z / (1+z)^2`, which conjugates the radial flow to pure scaling:
//!   forward `m(g e^{-i theta}) = e^{+h} m(z e^{-i theta})`, inverse with
//!   `e^{-h}`.
//!
//! Traces are extracted by the backward (zipper) method: the tip at step k is
//! the composition of the first k-1 inverse maps applied to a proxy point
//! just above (chordal) or just inside (radial) the k-th driving value.
//! With a zero driver the compositions telescope exactly, which the tests
//! exploit as closed-form oracles.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::geom::PolyCurve;
use crate::rng::{self, tags};

/// Hard cap on driver steps (memory and runtime guard).
pub const MAX_DRIVER_STEPS: usize = 1 << 24;

/// Hard cap on total elementary-map applications in one trace extraction.
pub const MAX_TRACE_OPS: u64 = 4_000_000_000;

/// Minimal |W - V| maintained by the SLE(rho) generators; reaching it
/// reflects the gap and flags the step.
pub const DRIVER_GAP_FLOOR: f64 = 1e-9;

/// Most substeps one Euler step may be split into.
const MAX_SUBSTEPS: usize = 1024;

/// Which Loewner evolution a driver belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DriverKind {
    /// Chordal evolution, Brownian driver W = sqrt(kappa) B.
    ChordalBm,
    /// Chordal SLE_kappa(rho): W with drift rho/(W-V), force point track V.
    ChordalRho,
    /// Radial evolution, driving point e^{iW} with W = sqrt(kappa) B.
    RadialBm,
    /// Radial SLE_kappa(rho) with cotangent drifts.
    RadialRho,
}

impl DriverKind {
    pub fn is_chordal(self) -> bool {
        matches!(self, DriverKind::ChordalBm | DriverKind::ChordalRho)
    }

    pub fn has_force_point(self) -> bool {
        matches!(self, DriverKind::ChordalRho | DriverKind::RadialRho)
    }
}

/// Geometry selector for [`drive_brownian`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    Chordal,
    Radial,
}

/// A sampled driving function on a uniform time grid.
///
/// `w[k]` is the driving value at time `k * dt` (radial kinds store the
/// angular argument, the driving point being `e^{i w[k]}`). For rho kinds,
/// `v` tracks the force point on the same grid.
#[derive(Debug, Clone)]
pub struct Driver {
    kind: DriverKind,
    kappa: f64,
    rho: Option<f64>,
    dt: f64,
    w: Vec<f64>,
    v: Option<Vec<f64>>,
    seed: u64,
    reflected_steps: usize,
}

impl Driver {
    pub fn kind(&self) -> DriverKind {
        self.kind
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn rho(&self) -> Option<f64> {
        self.rho
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn w(&self) -> &[f64] {
        &self.w
    }
    pub fn v(&self) -> Option<&[f64]> {
        self.v.as_deref()
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    /// How many steps were modified by the gap-floor reflection.
    pub fn reflected_steps(&self) -> usize {
        self.reflected_steps
    }
    /// Number of time steps (len of w minus one).
    pub fn steps(&self) -> usize {
        self.w.len() - 1
    }
    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }
    /// Grid times matching `w`.
    pub fn times(&self) -> Vec<f64> {
        (0..self.w.len()).map(|k| k as f64 * self.dt).collect()
    }

    /// Assemble a driver from explicit values (for file import and for
    /// map-level identity tests). Validates shape and finiteness; rho kinds
    /// require a force track of equal length.
    pub fn from_values(
        kind: DriverKind,
        kappa: f64,
        rho: Option<f64>,
        dt: f64,
        w: Vec<f64>,
        v: Option<Vec<f64>>,
        seed: u64,
    ) -> Result<Driver> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(CoreError::invalid("dt must be positive"));
        }
        if w.len() < 2 {
            return Err(CoreError::invalid("driver needs at least two samples"));
        }
        if w.len() > MAX_DRIVER_STEPS {
            return Err(CoreError::capacity(format!(
                "driver length {} exceeds {MAX_DRIVER_STEPS}",
                w.len()
            )));
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::invalid("driver values must be finite"));
        }
        if kind.has_force_point() != v.is_some() {
            return Err(CoreError::invalid(
                "force-point track must be present exactly for rho kinds",
            ));
        }
        if kind.has_force_point() && rho.is_none() {
            return Err(CoreError::invalid("rho kinds need a rho value"));
        }
        if let Some(v) = &v {
            if v.len() != w.len() {
                return Err(CoreError::invalid("W and V must share one length"));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(CoreError::invalid("force values must be finite"));
            }
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(CoreError::invalid("kappa must be finite and >= 0"));
        }
        Ok(Driver { kind, kappa, rho, dt, w, v, seed, reflected_steps: 0 })
    }
}

/// Solver knobs shared by trace extraction and the forward map.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Swallowing tolerance: minimal |g - xi| before a point counts as
    /// absorbed; also the degenerate-tip diagnostic threshold.
    pub singularity_floor: f64,
    /// Lateral offset of the tip proxy above/inside the driving value.
    /// `None` selects 2 sqrt(dt), the lateral scale of one elementary map.
    pub tip_offset: Option<f64>,
    /// Evaluate the tip every this many driver steps (the final step is
    /// always evaluated). Composition cost is quadratic in step count, so
    /// stride trades trace resolution for time.
    pub tip_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { singularity_floor: 1e-9, tip_offset: None, tip_stride: 1 }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.singularity_floor.is_finite() && self.singularity_floor > 0.0) {
            return Err(CoreError::invalid("singularity floor must be positive"));
        }
        if let Some(o) = self.tip_offset {
            if !(o.is_finite() && o > 0.0) {
                return Err(CoreError::invalid("tip offset must be positive"));
            }
        }
        if self.tip_stride == 0 {
            return Err(CoreError::invalid("tip stride must be at least 1"));
        }
        Ok(())
    }
}

/// A traced curve with solver diagnostics.
#[derive(Debug, Clone)]
pub struct TraceCurve {
    /// Planar curve (x, y) = (Re, Im), time-stamped with capacity times.
    pub curve: PolyCurve,
    /// Largest distance between consecutive evaluated tips.
    pub max_step_displacement: f64,
    /// Tips whose imaginary part (chordal) or distance from the boundary
    /// behaviour (radial: modulus above 1) fell below/over the floor —
    /// degenerate evaluations kept for inspection.
    pub swallowed_points: usize,
}

/// Outcome of the forward hull map at one point.
#[derive(Debug, Clone, Copy)]
pub struct ForwardPoint {
    /// g_t(z), integrated to the requested time (or to the swallowing time).
    pub value: Complex64,
    /// Set when the point came within the singularity floor of the driving
    /// value; integration halts there. A status, not an error.
    pub swallowed_at: Option<f64>,
}

fn steps_for(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(CoreError::invalid("dt must be positive"));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(CoreError::invalid("horizon must be positive"));
    }
    if dt > horizon * (1.0 + 1e-9) {
        return Err(CoreError::invalid("dt must not exceed the horizon"));
    }
    let n = (horizon / dt).round();
    if (n * dt - horizon).abs() > 1e-6 * horizon {
        return Err(CoreError::invalid(format!(
            "horizon {horizon} is not an integer number of steps dt = {dt}"
        )));
    }
    let n = n as usize;
    if n + 1 > MAX_DRIVER_STEPS {
        return Err(CoreError::capacity(format!(
            "{n} steps exceed the {MAX_DRIVER_STEPS} cap; increase dt"
        )));
    }
    Ok(n)
}

/// Brownian driver W_t = sqrt(kappa) B_t sampled at step dt.
///
/// The radial kind stores the same angular process; the driving point on the
/// circle is `e^{i W_t}`.
pub fn drive_brownian(
    kappa: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
    geometry: Geometry,
) -> Result<Driver> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(CoreError::invalid("kappa must be finite and >= 0"));
    }
    let n = steps_for(horizon, dt)?;
    let geom_word = match geometry {
        Geometry::Chordal => 0u64,
        Geometry::Radial => 1,
    };
    let mut rng = rng::stream(seed, &[tags::DRIVER, geom_word]);
    let sd = (kappa * dt).sqrt();
    let mut w = Vec::with_capacity(n + 1);
    let mut x = 0.0f64;
    w.push(x);
    for _ in 0..n {
        x += sd * rng::standard_gaussian(&mut rng);
        w.push(x);
    }
    let kind = match geometry {
        Geometry::Chordal => DriverKind::ChordalBm,
        Geometry::Radial => DriverKind::RadialBm,
    };
    Ok(Driver { kind, kappa, rho: None, dt, w, v: None, seed, reflected_steps: 0 })
}

fn validate_rho_params(kappa: f64, rho: f64) -> Result<()> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(CoreError::invalid("kappa must be finite and >= 0"));
    }
    if !rho.is_finite() {
        return Err(CoreError::invalid("rho must be finite"));
    }
    if rho <= -2.0 {
        return Err(CoreError::unsupported(
            "rho <= -2 drives W into the force point non-recoverably at this \
             discretization; boundary-reflection corrections are out of scope",
        ));
    }
    Ok(())
}

/// Chordal SLE_kappa(rho) driver by Euler–Maruyama:
/// dW = sqrt(kappa) dB + rho/(W-V) dt, dV = 2/(V-W) dt.
///
/// Each step is split into substeps small enough that the drift cannot move
/// the pair by more than a tenth of their gap; if the gap still falls below
/// [`DRIVER_GAP_FLOOR`] it is reflected there and the step is counted in
/// `reflected_steps`.
pub fn drive_sle_rho_chordal(
    kappa: f64,
    rho: f64,
    w0: f64,
    v0: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<Driver> {
    validate_rho_params(kappa, rho)?;
    if !(w0.is_finite() && v0.is_finite()) || (w0 - v0).abs() < DRIVER_GAP_FLOOR {
        return Err(CoreError::invalid("w0 and v0 must be finite and distinct"));
    }
    let n = steps_for(horizon, dt)?;
    let mut rng = rng::stream(seed, &[tags::DRIVER, 2]);
    let drift_scale = rho.abs().max(2.0);
    let mut w = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n + 1);
    let (mut wc, mut vc) = (w0, v0);
    w.push(wc);
    v.push(vc);
    let mut reflected = 0usize;
    for _ in 0..n {
        let mut reflected_here = false;
        let gap0: f64 = wc - vc;
        // Per-substep drift displacement <= 0.1 |gap|: h <= 0.1 gap^2 / scale.
        let h_max = 0.1 * gap0 * gap0 / drift_scale;
        let m = ((dt / h_max).ceil() as usize).clamp(1, MAX_SUBSTEPS);
        let h = dt / m as f64;
        let sd = (kappa * h).sqrt();
        for _ in 0..m {
            let gap = wc - vc;
            let sign = if gap >= 0.0 { 1.0 } else { -1.0 };
            wc += sd * rng::standard_gaussian(&mut rng) + rho / gap * h;
            vc += -2.0 / gap * h;
            let g2 = wc - vc;
            if sign * g2 < DRIVER_GAP_FLOOR {
                wc = vc + sign * DRIVER_GAP_FLOOR;
                reflected_here = true;
            }
        }
        if reflected_here {
            reflected += 1;
        }
        w.push(wc);
        v.push(vc);
    }
    Ok(Driver {
        kind: DriverKind::ChordalRho,
        kappa,
        rho: Some(rho),
        dt,
        w,
        v: Some(v),
        seed,
        reflected_steps: reflected,
    })
}

fn wrap_angle(g: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = g % two_pi;
    if r < 0.0 {
        r += two_pi;
    }
    r
}

/// Radial SLE_kappa(rho) driver by Euler–Maruyama on angular coordinates:
/// dW = sqrt(kappa) dB + (rho/2) cot((W-V)/2) dt, dV = -cot((W-V)/2) dt,
/// with the gap W-V kept inside (0, 2 pi) (reflected at the floor).
pub fn drive_sle_rho_radial(
    kappa: f64,
    rho: f64,
    w0: f64,
    v0: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<Driver> {
    validate_rho_params(kappa, rho)?;
    if !(w0.is_finite() && v0.is_finite()) {
        return Err(CoreError::invalid("w0 and v0 must be finite"));
    }
    let gap0 = wrap_angle(w0 - v0);
    if gap0 < DRIVER_GAP_FLOOR || gap0 > std::f64::consts::TAU - DRIVER_GAP_FLOOR {
        return Err(CoreError::invalid(
            "w0 and v0 must be distinct modulo 2 pi",
        ));
    }
    let n = steps_for(horizon, dt)?;
    let mut rng = rng::stream(seed, &[tags::DRIVER, 3]);
    let two_pi = std::f64::consts::TAU;
    let drift_scale = (rho.abs() / 2.0).max(1.0);
    let mut w = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n + 1);
    let (mut wc, mut vc) = (w0, v0);
    w.push(wc);
    v.push(vc);
    let mut reflected = 0usize;
    for _ in 0..n {
        let mut reflected_here = false;
        let g0 = wrap_angle(wc - vc);
        let cot0 = (g0 / 2.0).cos() / (g0 / 2.0).sin();
        // Drift displacement <= 0.1 x the distance to the nearer endpoint.
        let room = g0.min(two_pi - g0);
        let h_max = 0.1 * room / (drift_scale * cot0.abs().max(1e-300));
        let m = ((dt / h_max).ceil() as usize).clamp(1, MAX_SUBSTEPS);
        let h = dt / m as f64;
        let sd = (kappa * h).sqrt();
        for _ in 0..m {
            let g = wrap_angle(wc - vc);
            let cot = (g / 2.0).cos() / (g / 2.0).sin();
            wc += sd * rng::standard_gaussian(&mut rng) + 0.5 * rho * cot * h;
            vc += -cot * h;
            let g2 = wrap_angle(wc - vc);
            if g2 < DRIVER_GAP_FLOOR {
                wc += DRIVER_GAP_FLOOR - g2;
                reflected_here = true;
            } else if g2 > two_pi - DRIVER_GAP_FLOOR {
                wc -= g2 - (two_pi - DRIVER_GAP_FLOOR);
                reflected_here = true;
            }
        }
        if reflected_here {
            reflected += 1;
        }
        w.push(wc);
        v.push(vc);
    }
    Ok(Driver {
        kind: DriverKind::RadialRho,
        kappa,
        rho: Some(rho),
        dt,
        w,
        v: Some(v),
        seed,
        reflected_steps: reflected,
    })
}

/// Principal complex square root (stable quadrant-by-quadrant form).
#[inline]
fn csqrt(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    if y == 0.0 {
        return if x >= 0.0 {
            Complex64::new(x.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-x).sqrt())
        };
    }
    let r = (x * x + y * y).sqrt();
    if x >= 0.0 {
        let u = ((r + x) * 0.5).sqrt();
        Complex64::new(u, y / (2.0 * u))
    } else {
        let t = ((r - x) * 0.5).sqrt();
        Complex64::new(y.abs() / (2.0 * t), t.copysign(y))
    }
}

/// sqrt(d^2 - h4) on the branch asymptotic to d at infinity, mapping the
/// closed upper half-plane into itself. `h4 = +4h` gives the inverse
/// (slit-opening) chordal step, `h4 = -4h` the forward step.
#[inline]
fn slit_sqrt(d: Complex64, h4: f64) -> Complex64 {
    if d.im == 0.0 {
        let s = d.re * d.re - h4;
        return if s >= 0.0 {
            // Stays on the same real side as d.
            Complex64::new(s.sqrt().copysign(d.re), 0.0)
        } else {
            Complex64::new(0.0, (-s).sqrt())
        };
    }
    let z = Complex64::new(d.re * d.re - d.im * d.im - h4, 2.0 * d.re * d.im);
    let g = csqrt(z);
    // Principal root has Re >= 0; the identity-asymptotic branch must match
    // the sign of Re d, which for interior points equals the sign of Im z.
    if z.im < 0.0 || (z.im == 0.0 && z.re >= 0.0 && d.re < 0.0) {
        -g
    } else {
        g
    }
}

/// m(z) = z / (1+z)^2: conjugates the radial flow to scaling; maps the unit
/// disk onto the plane minus the ray [1/4, inf).
#[inline]
fn radial_m(z: Complex64) -> Complex64 {
    let one_plus = Complex64::new(1.0 + z.re, z.im);
    z / (one_plus * one_plus)
}

/// Inverse of m on its small branch (the root inside the unit disk),
/// m_inv(v) = 2v / ((1 - 2v) + sqrt(1 - 4v)).
#[inline]
fn radial_m_inv(v: Complex64) -> Complex64 {
    let root = csqrt(Complex64::new(1.0 - 4.0 * v.re, -4.0 * v.im));
    let den = Complex64::new(1.0 - 2.0 * v.re + root.re, -2.0 * v.im + root.im);
    2.0 * v / den
}

/// Indices at which the tip is evaluated: stride multiples plus the final
/// step.
fn tip_indices(n: usize, stride: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (1..=n / stride).map(|m| m * stride).collect();
    if idx.last() != Some(&n) {
        idx.push(n);
    }
    idx
}

fn check_trace_budget(n: usize, stride: usize) -> Result<()> {
    let m = (n / stride + 1) as u64;
    let ops = m * n as u64 / 2;
    if ops > MAX_TRACE_OPS {
        return Err(CoreError::capacity(format!(
            "trace needs ~{ops} map applications (cap {MAX_TRACE_OPS}); \
             increase tip_stride or dt"
        )));
    }
    Ok(())
}

/// Trace of a chordal driver by inverse-map composition.
///
/// The tip at step k is `F_1 ∘ … ∘ F_{k-1}` applied to the proxy
/// `W_k + i offset`, where `F_j(w) = W_j + sqrt((w - W_j)^2 - 4 dt)`. The
/// curve starts at `(W_0, 0)`. Cost is O(steps^2 / stride).
pub fn chordal_trace(driver: &Driver, config: &SolverConfig) -> Result<TraceCurve> {
    if !driver.kind().is_chordal() {
        return Err(CoreError::invalid("chordal_trace needs a chordal driver"));
    }
    config.validate()?;
    let dt = driver.dt;
    let offset = config.tip_offset.unwrap_or(2.0 * dt.sqrt());
    let n = driver.steps();
    check_trace_budget(n, config.tip_stride)?;
    let w = &driver.w;
    let h4 = 4.0 * dt;

    let mut points = vec![w[0], 0.0];
    let mut times = vec![0.0];
    let mut swallowed = 0usize;
    for k in tip_indices(n, config.tip_stride) {
        let mut z = Complex64::new(w[k], offset);
        for j in (1..k).rev() {
            let c = w[j];
            z = Complex64::new(c + 0.0, 0.0) + slit_sqrt(Complex64::new(z.re - c, z.im), h4);
            // Equivalent to c + slit_sqrt(z - c, 4 dt); kept explicit to
            // avoid a temporary in the hot loop.
        }
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(CoreError::solver(format!(
                "tip composition overflowed at step {k}"
            )));
        }
        if z.im < config.singularity_floor {
            swallowed += 1;
        }
        points.push(z.re);
        points.push(z.im);
        times.push(k as f64 * dt);
    }
    finish_trace(points, times, swallowed)
}

fn finish_trace(points: Vec<f64>, times: Vec<f64>, swallowed: usize) -> Result<TraceCurve> {
    let curve = PolyCurve::new(2, points, Some(times))?;
    let mut max_step = 0.0f64;
    for i in 1..curve.len() {
        max_step = max_step.max(curve.dist(i - 1, i));
    }
    Ok(TraceCurve { curve, max_step_displacement: max_step, swallowed_points: swallowed })
}

/// Trace of a radial driver by inverse-map composition; starts at
/// `e^{i W_0}` on the unit circle and grows toward 0.
pub fn radial_trace(driver: &Driver, config: &SolverConfig) -> Result<TraceCurve> {
    if driver.kind().is_chordal() {
        return Err(CoreError::invalid("radial_trace needs a radial driver"));
    }
    config.validate()?;
    let dt = driver.dt;
    let n = driver.steps();
    check_trace_budget(n, config.tip_stride)?;
    let w = &driver.w;
    let decay = (-dt).exp();
    // Slit-tip radius of one elementary step: m(tau) = e^{-dt} m(1) = e^{-dt}/4.
    let tau = {
        let v = decay / 4.0;
        2.0 * v / ((1.0 - 2.0 * v) + (1.0 - 4.0 * v).sqrt())
    };
    let rots: Vec<Complex64> = w.iter().map(|&th| Complex64::from_polar(1.0, th)).collect();

    let mut points = vec![rots[0].re, rots[0].im];
    let mut times = vec![0.0];
    let mut swallowed = 0usize;
    for k in tip_indices(n, config.tip_stride) {
        let mut z = tau * rots[k];
        for j in (1..k).rev() {
            let rot = rots[j];
            z = rot * radial_m_inv(decay * radial_m(z * rot.conj()));
        }
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(CoreError::solver(format!(
                "tip composition overflowed at step {k}"
            )));
        }
        if z.norm_sqr() > 1.0 + config.singularity_floor {
            swallowed += 1;
        }
        points.push(z.re);
        points.push(z.im);
        times.push(k as f64 * dt);
    }
    finish_trace(points, times, swallowed)
}

/// Whole-plane approximation: radial SLE run for capacity
/// `horizon + ln(1/cutoff_a)` in the unit disk, then inverted by
/// `z -> cutoff_a / z`, so the curve starts near the origin (modulus about
/// `cutoff_a`) and grows toward infinity. Reported times are shifted so
/// capacity 0 is where the curve reaches unit scale; the time grid therefore
/// starts at `-ln(1/cutoff_a)` (rounded to the step grid).
///
/// Shrinking `cutoff_a` refines the approximation; the law of the early
/// curve stabilizes as `cutoff_a -> 0`.
pub fn whole_plane_trace(
    kappa: f64,
    rho: Option<f64>,
    cutoff_a: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
    config: &SolverConfig,
) -> Result<TraceCurve> {
    if !(cutoff_a.is_finite() && cutoff_a > 0.0 && cutoff_a <= 0.25) {
        return Err(CoreError::invalid("cutoff_a must lie in (0, 1/4]"));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(CoreError::invalid("horizon must be positive"));
    }
    let lead = (1.0 / cutoff_a).ln();
    let total = horizon + lead;
    // Snap the total to the step grid (lead is irrational in general).
    let n = (total / dt).round().max(1.0);
    if n + 1.0 > MAX_DRIVER_STEPS as f64 {
        return Err(CoreError::capacity("whole-plane horizon too long for dt"));
    }
    let total_eff = n * dt;
    let driver = match rho {
        None => drive_brownian(kappa, total_eff, dt, seed, Geometry::Radial)?,
        Some(r) => {
            // Force point opposite the seed point on the circle.
            drive_sle_rho_radial(kappa, r, 0.0, std::f64::consts::PI, total_eff, dt, seed)?
        }
    };
    let inner = radial_trace(&driver, config)?;
    let mut points = Vec::with_capacity(inner.curve.len() * 2);
    let mut times = Vec::with_capacity(inner.curve.len());
    let inner_times = inner.curve.times().expect("radial traces are time-stamped");
    for i in 0..inner.curve.len() {
        let p = inner.curve.point(i);
        let z = Complex64::new(p[0], p[1]);
        let r2 = z.norm_sqr();
        if r2 < 1e-300 {
            return Err(CoreError::solver(format!(
                "radial tip collapsed to the origin at index {i}"
            )));
        }
        let img = cutoff_a * z.conj() / r2; // cutoff_a / z
        points.push(img.re);
        points.push(img.im);
        times.push(inner_times[i] - lead);
    }
    let swallowed = inner.swallowed_points;
    finish_trace(points, times, swallowed)
}

/// Forward hull map g_t(z), integrated step by step with the closed-form
/// elementary maps. Halts with a swallowing status when the point comes
/// within the singularity floor of the driving value (or, in the radial
/// case, crosses the scaling cut).
pub fn forward_map(
    driver: &Driver,
    z: Complex64,
    t: f64,
    config: &SolverConfig,
) -> Result<ForwardPoint> {
    config.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(CoreError::invalid("time must be nonnegative"));
    }
    if t > driver.horizon() * (1.0 + 1e-9) {
        return Err(CoreError::invalid("time exceeds the driver horizon"));
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(CoreError::invalid("evaluation point must be finite"));
    }
    let dt = driver.dt;
    let full = ((t / dt) + 1e-9).floor() as usize;
    let full = full.min(driver.steps());
    let rem = (t - full as f64 * dt).max(0.0);
    let floor = config.singularity_floor;
    let chordal = driver.kind().is_chordal();
    let mut g = z;
    let step = |g: &mut Complex64, j: usize, h: f64| -> Option<f64> {
        let swallow_time = (j - 1) as f64 * dt;
        if chordal {
            let c = driver.w[j];
            let d = Complex64::new(g.re - c, g.im);
            if d.norm_sqr() < floor * floor {
                return Some(swallow_time);
            }
            let s = slit_sqrt(d, -4.0 * h);
            *g = Complex64::new(c + s.re, s.im);
        } else {
            let theta = driver.w[j];
            let rot = Complex64::from_polar(1.0, theta);
            if (*g - rot).norm_sqr() < floor * floor {
                return Some(swallow_time);
            }
            let v = h.exp() * radial_m(*g * rot.conj());
            // Crossing the ray [1/4, inf) means collision with the slit.
            if v.im.abs() <= floor && v.re >= 0.25 - floor {
                return Some(swallow_time);
            }
            *g = rot * radial_m_inv(v);
        }
        if !(g.re.is_finite() && g.im.is_finite()) {
            return Some(swallow_time);
        }
        None
    };
    for j in 1..=full {
        if let Some(ts) = step(&mut g, j, dt) {
            return Ok(ForwardPoint { value: g, swallowed_at: Some(ts) });
        }
    }
    if rem > 1e-15 && full < driver.steps() {
        if let Some(ts) = step(&mut g, full + 1, rem) {
            return Ok(ForwardPoint { value: g, swallowed_at: Some(ts) });
        }
    }
    Ok(ForwardPoint { value: g, swallowed_at: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use approx::assert_relative_eq;

    #[test]
    fn brownian_driver_basics() {
        // kappa = 0: identically zero driver.
        let d = drive_brownian(0.0, 1.0, 0.01, 5, Geometry::Chordal).unwrap();
        assert_eq!(d.steps(), 100);
        assert!(d.w().iter().all(|&x| x == 0.0));
        // W_0 = 0 and determinism.
        let a = drive_brownian(4.0, 1.0, 0.01, 5, Geometry::Chordal).unwrap();
        let b = drive_brownian(4.0, 1.0, 0.01, 5, Geometry::Chordal).unwrap();
        assert_eq!(a.w(), b.w());
        assert_eq!(a.w()[0], 0.0);
        // Radial draws a distinct stream but the same law.
        let r = drive_brownian(4.0, 1.0, 0.01, 5, Geometry::Radial).unwrap();
        assert_ne!(a.w()[100], r.w()[100]);
        assert_eq!(r.kind(), DriverKind::RadialBm);
        // Var(W_1) = kappa within 3 sigma over many seeds.
        let n = 10_000;
        let terminals: Vec<f64> = (0..n)
            .map(|s| {
                *drive_brownian(4.0, 1.0, 0.05, s, Geometry::Chordal)
                    .unwrap()
                    .w()
                    .last()
                    .unwrap()
            })
            .collect();
        let var = stats::variance(&terminals);
        let band = 3.0 * (2.0 / n as f64).sqrt() * 4.0;
        assert!((var - 4.0).abs() < band, "var {var} band {band}");
        // Bad parameters.
        assert!(drive_brownian(-1.0, 1.0, 0.01, 0, Geometry::Chordal).is_err());
        assert!(drive_brownian(1.0, 1.0, 2.0, 0, Geometry::Chordal).is_err());
        assert!(drive_brownian(1.0, 1.0, 0.0101, 0, Geometry::Chordal).is_err());
    }

    #[test]
    fn zero_driver_chordal_trace_is_vertical_segment() {
        let d = drive_brownian(0.0, 1.0, 1e-3, 9, Geometry::Chordal).unwrap();
        let cfg = SolverConfig { tip_stride: 16, ..SolverConfig::default() };
        let tr = chordal_trace(&d, &cfg).unwrap();
        assert_eq!(tr.curve.point(0), &[0.0, 0.0]);
        let times = tr.curve.times().unwrap();
        for i in 1..tr.curve.len() {
            let p = tr.curve.point(i);
            let expect = 2.0 * times[i].sqrt();
            assert!(p[0].abs() <= 1e-9, "re {} at t {}", p[0], times[i]);
            assert!((p[1] - expect).abs() <= 1e-9, "im {} vs {expect}", p[1]);
        }
        assert_eq!(tr.swallowed_points, 0);
        assert!(tr.max_step_displacement > 0.0);

        // Constant driver: the same segment translated.
        let n = d.steps();
        let c = 1.5;
        let dc = Driver::from_values(
            DriverKind::ChordalBm,
            0.0,
            None,
            1e-3,
            vec![c; n + 1],
            None,
            0,
        )
        .unwrap();
        let trc = chordal_trace(&dc, &cfg).unwrap();
        for i in 0..trc.curve.len() {
            let p = trc.curve.point(i);
            let q = tr.curve.point(i);
            assert!((p[0] - (q[0] + c)).abs() <= 1e-12);
            assert!((p[1] - q[1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn chordal_trace_brownian_scaling_identity() {
        // lambda-scaled driver gives the lambda-scaled trace exactly at the
        // map level: W'_k = W_k / lambda on step dt / lambda^2.
        let lambda = 2.0;
        let d = drive_brownian(2.0, 1.0, 1e-3, 77, Geometry::Chordal).unwrap();
        let scaled: Vec<f64> = d.w().iter().map(|&x| x / lambda).collect();
        let ds = Driver::from_values(
            DriverKind::ChordalBm,
            2.0,
            None,
            1e-3 / (lambda * lambda),
            scaled,
            None,
            77,
        )
        .unwrap();
        let cfg = SolverConfig { tip_stride: 25, ..SolverConfig::default() };
        let t1 = chordal_trace(&d, &cfg).unwrap();
        let t2 = chordal_trace(&ds, &cfg).unwrap();
        assert_eq!(t1.curve.len(), t2.curve.len());
        for i in 0..t1.curve.len() {
            let p = t1.curve.point(i);
            let q = t2.curve.point(i);
            assert!((p[0] / lambda - q[0]).abs() <= 1e-9);
            assert!((p[1] / lambda - q[1]).abs() <= 1e-9);
        }
        let times1 = t1.curve.times().unwrap();
        let times2 = t2.curve.times().unwrap();
        for i in 0..times1.len() {
            assert_relative_eq!(times2[i], times1[i] / (lambda * lambda), epsilon = 1e-12);
        }
    }

    fn zero_driver_exact(z: Complex64, t: f64) -> Complex64 {
        let g = csqrt(z * z + Complex64::new(4.0 * t, 0.0));
        if (z.re >= 0.0) == (g.re >= 0.0) {
            g
        } else {
            -g
        }
    }

    #[test]
    fn forward_map_closed_form_and_identity() {
        let d = drive_brownian(0.0, 1.0, 1e-3, 1, Geometry::Chordal).unwrap();
        let cfg = SolverConfig::default();
        // t = 0 is the exact identity.
        let z0 = Complex64::new(0.3, 0.7);
        let f = forward_map(&d, z0, 0.0, &cfg).unwrap();
        assert_eq!(f.value, z0);
        assert!(f.swallowed_at.is_none());
        // Zero driver: g_t(z) = sqrt(z^2 + 4t), telescoped exactly.
        for (z, t) in [
            (Complex64::new(1.0, 1.0), 0.5),
            (Complex64::new(-1.5, 0.25), 0.8),
            (Complex64::new(0.4, 0.1), 0.3205), // off the step grid
        ] {
            let f = forward_map(&d, z, t, &cfg).unwrap();
            assert!(f.swallowed_at.is_none());
            let exact = zero_driver_exact(z, t);
            let err = (f.value - exact).norm();
            assert!(
                err <= 1e-8 * (1.0 + exact.norm()),
                "z {z} t {t}: err {err}"
            );
        }
        // z = 2i, t = 1 is the hull tip: the exact value is the driving
        // value itself, g_1(2i) = 0. On a one-step grid the elementary map
        // is the closed form and the result is exact.
        let coarse = drive_brownian(0.0, 1.0, 1.0, 1, Geometry::Chordal).unwrap();
        let tip = Complex64::new(0.0, 2.0);
        let f = forward_map(&coarse, tip, 1.0, &cfg).unwrap();
        let err = (f.value - zero_driver_exact(tip, 1.0)).norm();
        assert!(err <= 1e-8 * (1.0 + zero_driver_exact(tip, 1.0).norm()));
        // On a fine grid the flow derivative toward the singular point
        // telescopes to y_0 / y_final, so roundoff is square-root amplified
        // to ~sqrt(steps x eps); check the documented floor holds.
        let f_fine = forward_map(&d, tip, 1.0, &cfg).unwrap();
        let err_fine = (f_fine.value - zero_driver_exact(tip, 1.0)).norm();
        assert!(err_fine <= 1e-6, "singular-point error {err_fine}");
    }

    #[test]
    fn forward_map_hydrodynamic_normalization() {
        let cfg = SolverConfig::default();
        let t = 1.0;
        for (name, d) in [
            ("zero", drive_brownian(0.0, 1.0, 1e-3, 1, Geometry::Chordal).unwrap()),
            ("kappa2", drive_brownian(2.0, 1.0, 1e-3, 3, Geometry::Chordal).unwrap()),
        ] {
            for z in [
                Complex64::new(1000.0, 0.0),
                Complex64::new(0.0, 1000.0),
                Complex64::new(700.0, 700.0),
            ] {
                let f = forward_map(&d, z, t, &cfg).unwrap();
                assert!(f.swallowed_at.is_none());
                let resid = (f.value - z - 2.0 * t / z).norm();
                let bound = 10.0 * t / z.norm_sqr();
                assert!(resid <= bound, "{name} z {z}: residual {resid} bound {bound}");
            }
        }
    }

    #[test]
    fn forward_map_swallow_status() {
        let d = drive_brownian(0.0, 1.0, 1e-3, 1, Geometry::Chordal).unwrap();
        let cfg = SolverConfig::default();
        // A point within the floor of the driving value is swallowed at once.
        let f = forward_map(&d, Complex64::new(0.0, 1e-10), 0.5, &cfg).unwrap();
        assert_eq!(f.swallowed_at, Some(0.0));
        // Far points are not.
        let f2 = forward_map(&d, Complex64::new(3.0, 0.5), 1.0, &cfg).unwrap();
        assert!(f2.swallowed_at.is_none());
    }

    #[test]
    fn zipper_forward_consistency() {
        // Forward-mapping a traced tip at its own time lands on the driving
        // value: the elementary maps are exact inverses of each other.
        let d = drive_brownian(3.0, 0.5, 1e-3, 21, Geometry::Chordal).unwrap();
        let cfg = SolverConfig { tip_stride: 50, ..SolverConfig::default() };
        let tr = chordal_trace(&d, &cfg).unwrap();
        let times = tr.curve.times().unwrap().to_vec();
        for i in [2usize, 5, 10] {
            let p = tr.curve.point(i);
            let t = times[i];
            let k = (t / d.dt()).round() as usize;
            let f = forward_map(&d, Complex64::new(p[0], p[1]), t, &cfg).unwrap();
            assert!(f.swallowed_at.is_none());
            let err = (f.value - Complex64::new(d.w()[k], 0.0)).norm();
            // Landing on the driving value square-root-amplifies the
            // composition roundoff (observed ~1e-8); 1e-6 leaves headroom.
            assert!(err <= 1e-6, "tip {i}: |g(tip) - W| = {err}");
        }
    }

    #[test]
    fn radial_zero_driver_stays_real_and_telescopes() {
        let d = drive_brownian(0.0, 1.0, 1e-3, 2, Geometry::Radial).unwrap();
        let cfg = SolverConfig { tip_stride: 20, ..SolverConfig::default() };
        let tr = radial_trace(&d, &cfg).unwrap();
        // Starts at xi_0 = 1 on the unit circle.
        assert_eq!(tr.curve.point(0), &[1.0, 0.0]);
        let times = tr.curve.times().unwrap();
        let mut prev = 2.0f64;
        for i in 0..tr.curve.len() {
            let p = tr.curve.point(i);
            assert_eq!(p[1], 0.0, "real driver keeps the trace real");
            assert!(p[0] > 0.0 && p[0] <= 1.0);
            assert!(p[0] < prev, "distance to origin decreases");
            prev = p[0];
            if i > 0 {
                // Composition telescopes: m(r(s)) = e^{-s}/4 exactly.
                let v = (-times[i]).exp() / 4.0;
                let expect = 2.0 * v / ((1.0 - 2.0 * v) + (1.0 - 4.0 * v).sqrt());
                assert!((p[0] - expect).abs() <= 1e-12, "{} vs {expect}", p[0]);
            }
        }
        assert_eq!(tr.swallowed_points, 0);
    }

    #[test]
    fn radial_rotation_equivariance() {
        let d = drive_brownian(2.0, 1.0, 2e-3, 11, Geometry::Radial).unwrap();
        let theta = 0.83;
        let wr: Vec<f64> = d.w().iter().map(|&x| x + theta).collect();
        let dr =
            Driver::from_values(DriverKind::RadialBm, 2.0, None, 2e-3, wr, None, 11).unwrap();
        let cfg = SolverConfig { tip_stride: 10, ..SolverConfig::default() };
        let t1 = radial_trace(&d, &cfg).unwrap();
        let t2 = radial_trace(&dr, &cfg).unwrap();
        let rot = Complex64::from_polar(1.0, theta);
        for i in 0..t1.curve.len() {
            let p = t1.curve.point(i);
            let q = t2.curve.point(i);
            let expect = rot * Complex64::new(p[0], p[1]);
            let err = (expect - Complex64::new(q[0], q[1])).norm();
            assert!(err <= 1e-9, "index {i}: err {err}");
        }
    }

    #[test]
    fn radial_distance_decreasing_at_checkpoints() {
        // Monte Carlo sanity: median over seeds of |tip| is strictly
        // decreasing at coarse capacity checkpoints.
        let cfg = SolverConfig { tip_stride: 125, ..SolverConfig::default() };
        let checkpoints = [0.5, 1.0, 1.5, 2.0];
        let mut by_checkpoint: Vec<Vec<f64>> = vec![Vec::new(); checkpoints.len()];
        for seed in 0..20u64 {
            let d = drive_brownian(3.0, 2.0, 4e-3, seed, Geometry::Radial).unwrap();
            let tr = radial_trace(&d, &cfg).unwrap();
            let times = tr.curve.times().unwrap();
            for (ci, &s) in checkpoints.iter().enumerate() {
                let i = times
                    .iter()
                    .position(|&t| (t - s).abs() < 1e-9)
                    .expect("checkpoint on grid");
                let p = tr.curve.point(i);
                by_checkpoint[ci].push((p[0] * p[0] + p[1] * p[1]).sqrt());
            }
        }
        let medians: Vec<f64> = by_checkpoint.iter().map(|v| stats::median(v)).collect();
        for w in medians.windows(2) {
            assert!(w[1] < w[0], "medians not decreasing: {medians:?}");
        }
    }

    #[test]
    fn whole_plane_zero_driver_is_positive_ray() {
        let cfg = SolverConfig { tip_stride: 50, ..SolverConfig::default() };
        let tr = whole_plane_trace(0.0, None, 0.25, 1.0, 1e-3, 7, &cfg).unwrap();
        let mut prev = 0.0f64;
        for i in 0..tr.curve.len() {
            let p = tr.curve.point(i);
            assert_eq!(p[1], 0.0);
            assert!(p[0] >= 0.25 - 1e-12, "starts at the cutoff radius");
            assert!(p[0] > prev, "moves outward monotonically");
            prev = p[0];
        }
        // Targets infinity: exits the unit disk for a long enough horizon.
        assert!(prev > 1.0, "final modulus {prev}");
        // Times are shifted: first time is -ln(1/a), last is the horizon.
        let times = tr.curve.times().unwrap();
        assert_relative_eq!(times[0], -(4.0f64).ln(), epsilon = 1e-9);
        assert!((times[times.len() - 1] - 1.0).abs() < 2e-3);
        // Parameter validation.
        assert!(whole_plane_trace(0.0, None, 0.3, 1.0, 1e-3, 7, &cfg).is_err());
        assert!(whole_plane_trace(0.0, None, 0.0, 1.0, 1e-3, 7, &cfg).is_err());
    }

    #[test]
    fn whole_plane_cutoff_law_stabilizes() {
        // Tip modulus at whole-plane capacity 1 for cutoff 1/4 vs 1/16:
        // two-sample KS within the 5% band (the truncation bias is small
        // against the sampling spread).
        let dt = 2e-3;
        let sample = |a: f64, base: u64| -> Vec<f64> {
            (0..150u64)
                .map(|s| {
                    let cfg = SolverConfig {
                        tip_stride: usize::MAX,
                        ..SolverConfig::default()
                    };
                    let tr =
                        whole_plane_trace(2.0, None, a, 1.0, dt, base + s, &cfg).unwrap();
                    let p = tr.curve.point(tr.curve.len() - 1);
                    Complex64::new(p[0], p[1]).norm().ln()
                })
                .collect()
        };
        let xs = sample(0.25, 10_000);
        let ys = sample(0.0625, 20_000);
        let ks = stats::ks_two_sample(&xs, &ys);
        let crit = stats::ks_two_sample_critical(xs.len(), ys.len(), 0.05);
        assert!(ks <= crit, "KS {ks} exceeds {crit}");
    }

    #[test]
    fn sle_rho_chordal_matches_gap_ode() {
        // kappa = 0, rho = 2, w0 = 0, v0 = 1: D = W - V solves
        // D' = (rho + 2)/D, so D(t) = -sqrt(1 + 2(rho+2) t) and
        // W(t) = (rho/(rho+2)) (D(t) + 1).
        let rho = 2.0;
        let exact_d = |t: f64| -(1.0 + 2.0 * (rho + 2.0) * t).sqrt();
        let exact_w = |t: f64| rho / (rho + 2.0) * (exact_d(t) + 1.0);

        // Fine step over a short horizon: errors inside 1e-6.
        let d = drive_sle_rho_chordal(0.0, rho, 0.0, 1.0, 0.1, 1e-6, 3).unwrap();
        let (mut werr, mut gerr) = (0.0f64, 0.0f64);
        for (k, (&w, &v)) in d.w().iter().zip(d.v().unwrap()).enumerate() {
            let t = k as f64 * d.dt();
            werr = werr.max((w - exact_w(t)).abs());
            gerr = gerr.max(((w - v) - exact_d(t)).abs());
        }
        assert!(werr <= 1e-6, "W error {werr}");
        assert!(gerr <= 1e-6, "gap error {gerr}");
        assert_eq!(d.reflected_steps(), 0);

        // Coarser step over horizon 1: first-order error, order 1e-5.
        let d2 = drive_sle_rho_chordal(0.0, rho, 0.0, 1.0, 1.0, 1e-5, 3).unwrap();
        let g_end = d2.w().last().unwrap() - d2.v().unwrap().last().unwrap();
        let err = (g_end - exact_d(1.0)).abs();
        assert!(err <= 3e-5, "terminal gap error {err}");
        assert!(err >= 1e-7, "error implausibly small for Euler: {err}");
    }

    #[test]
    fn sle_rho_radial_matches_gap_ode() {
        // kappa = 0: gap G = W - V solves G' = (rho/2 + 1) cot(G/2), so
        // cos(G/2) = cos(G0/2) e^{-c t/2} with c = rho/2 + 1.
        let rho = 1.0;
        let c = rho / 2.0 + 1.0;
        let g0 = std::f64::consts::FRAC_PI_2;
        let d =
            drive_sle_rho_radial(0.0, rho, g0, 0.0, 0.1, 1e-6, 4).unwrap();
        let mut gerr = 0.0f64;
        for (k, (&w, &v)) in d.w().iter().zip(d.v().unwrap()).enumerate() {
            let t = k as f64 * d.dt();
            let gap = wrap_angle(w - v);
            let exact = 2.0 * ((g0 / 2.0).cos() * (-c * t / 2.0).exp()).acos();
            gerr = gerr.max((gap - exact).abs());
            assert!(gap > 0.0 && gap < std::f64::consts::TAU);
        }
        assert!(gerr <= 1e-6, "gap error {gerr}");
    }

    #[test]
    fn sle_rho_zero_matches_brownian_law() {
        // rho = 0 kills the W drift: terminal values match drive_brownian
        // in law (independent streams, two-sample KS at 1%).
        let n = 800;
        let kappa = 3.0;
        let chordal_bm: Vec<f64> = (0..n)
            .map(|s| *drive_brownian(kappa, 1.0, 2e-3, s, Geometry::Chordal).unwrap().w().last().unwrap())
            .collect();
        let chordal_rho: Vec<f64> = (0..n)
            .map(|s| {
                *drive_sle_rho_chordal(kappa, 0.0, 0.0, 1.0, 1.0, 2e-3, s)
                    .unwrap()
                    .w()
                    .last()
                    .unwrap()
            })
            .collect();
        let ks = stats::ks_two_sample(&chordal_bm, &chordal_rho);
        let crit = stats::ks_two_sample_critical(n as usize, n as usize, 0.01);
        assert!(ks <= crit, "chordal KS {ks} > {crit}");

        let radial_bm: Vec<f64> = (0..n)
            .map(|s| *drive_brownian(kappa, 1.0, 2e-3, s, Geometry::Radial).unwrap().w().last().unwrap())
            .collect();
        let radial_rho: Vec<f64> = (0..n)
            .map(|s| {
                *drive_sle_rho_radial(kappa, 0.0, std::f64::consts::PI, 0.0, 1.0, 2e-3, s)
                    .unwrap()
                    .w()
                    .last()
                    .unwrap()
            })
            .collect();
        // Radial rho = 0 starts at w0 = pi; recenter before comparing.
        let radial_rho: Vec<f64> = radial_rho
            .iter()
            .map(|x| x - std::f64::consts::PI)
            .collect();
        let ks = stats::ks_two_sample(&radial_bm, &radial_rho);
        assert!(ks <= crit, "radial KS {ks} > {crit}");
    }

    #[test]
    fn sle_rho_gap_stays_positive_for_large_rho() {
        // rho >= 2: the gap process never reaches the floor (Bessel-type
        // repulsion), so no step is reflected in any of 100 seeds.
        for seed in 0..100u64 {
            let d = drive_sle_rho_chordal(2.0, 2.0, 0.0, 1.0, 1.0, 1e-3, seed).unwrap();
            assert_eq!(d.reflected_steps(), 0, "seed {seed}");
            let min_gap = d
                .w()
                .iter()
                .zip(d.v().unwrap())
                .map(|(&w, &v)| (w - v).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(min_gap > 0.0, "seed {seed}: min gap {min_gap}");
        }
    }

    #[test]
    fn sle_rho_parameter_validation() {
        assert!(matches!(
            drive_sle_rho_chordal(2.0, -2.0, 0.0, 1.0, 1.0, 1e-3, 0),
            Err(CoreError::Unsupported(_))
        ));
        assert!(matches!(
            drive_sle_rho_chordal(2.0, -2.5, 0.0, 1.0, 1.0, 1e-3, 0),
            Err(CoreError::Unsupported(_))
        ));
        assert!(drive_sle_rho_chordal(2.0, 1.0, 0.5, 0.5, 1.0, 1e-3, 0).is_err());
        assert!(drive_sle_rho_radial(2.0, 1.0, 0.0, std::f64::consts::TAU, 1.0, 1e-3, 0).is_err());
        // rho > -2 works even if negative.
        assert!(drive_sle_rho_chordal(2.0, -1.5, 0.0, 1.0, 0.1, 1e-3, 0).is_ok());
    }

    #[test]
    fn trace_kind_and_config_validation() {
        let chordal = drive_brownian(2.0, 0.1, 1e-3, 0, Geometry::Chordal).unwrap();
        let radial = drive_brownian(2.0, 0.1, 1e-3, 0, Geometry::Radial).unwrap();
        let cfg = SolverConfig::default();
        assert!(chordal_trace(&radial, &cfg).is_err());
        assert!(radial_trace(&chordal, &cfg).is_err());
        let bad = SolverConfig { tip_stride: 0, ..SolverConfig::default() };
        assert!(chordal_trace(&chordal, &bad).is_err());
        let bad2 = SolverConfig { singularity_floor: 0.0, ..SolverConfig::default() };
        assert!(chordal_trace(&chordal, &bad2).is_err());
        // Budget guard.
        let long = drive_brownian(2.0, 200.0, 2e-6, 0, Geometry::Chordal);
        assert!(long.is_err() || {
            let d = long.unwrap();
            matches!(chordal_trace(&d, &cfg), Err(CoreError::Capacity(_)))
        });
    }

    #[test]
    fn traces_are_deterministic() {
        let cfg = SolverConfig { tip_stride: 10, ..SolverConfig::default() };
        let d1 = drive_brownian(8.0 / 3.0, 0.5, 1e-3, 99, Geometry::Chordal).unwrap();
        let d2 = drive_brownian(8.0 / 3.0, 0.5, 1e-3, 99, Geometry::Chordal).unwrap();
        let t1 = chordal_trace(&d1, &cfg).unwrap();
        let t2 = chordal_trace(&d2, &cfg).unwrap();
        assert_eq!(t1.curve.coords(), t2.curve.coords());
        let r1 = drive_sle_rho_radial(3.0, 1.0, 1.0, 0.0, 0.5, 1e-3, 99).unwrap();
        let r2 = drive_sle_rho_radial(3.0, 1.0, 1.0, 0.0, 0.5, 1e-3, 99).unwrap();
        assert_eq!(r1.w(), r2.w());
        assert_eq!(r1.v(), r2.v());
    }

    #[test]
    fn turning_profile_grows_under_refinement() {
        // Small-scale version of the turning-divergence signature: the
        // subsample turning constant of a kappa = 3 trace grows as the
        // sampling refines, in the median over seeds.
        let cfg = SolverConfig { tip_stride: 2, ..SolverConfig::default() };
        let mut by_level: Vec<Vec<f64>> = vec![Vec::new(); 3];
        for seed in 0..10u64 {
            let d = drive_brownian(3.0, 1.0, 1e-3, seed, Geometry::Chordal).unwrap();
            let tr = chordal_trace(&d, &cfg).unwrap();
            let prof = crate::geom::turning_profile(&tr.curve, 3).unwrap();
            for (i, rep) in prof.iter().enumerate() {
                by_level[i].push(rep.constant);
            }
        }
        let medians: Vec<f64> = by_level.iter().map(|v| stats::median(v)).collect();
        assert!(
            medians[0] < medians[1] && medians[1] < medians[2],
            "medians {medians:?}"
        );
    }
}
