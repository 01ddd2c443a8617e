//! Machine checks of the structural properties: conservation, entropy decay,
//! the algebraic bounds of the regularized coefficients, `L^p` and
//! third-moment growth, and the empirical constants of the moment and
//! mollifier estimates.
//!
//! A check FAILs when an exact algebraic guarantee is violated and is
//! FLAGged when a discretization-dependent tolerance is exceeded.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Result, VfpError};
use crate::grid::{DistField, SpatialField};
use crate::math::exp;
use crate::moments::{compute_moments, density_temperature_ratio, third_moment};
use crate::regularize::{mollify, MollifierKernel, RegFields};
use crate::solver::Sample;

/// Relative round-off allowance of the algebraic checks.
pub const ROUNDOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass,
    Flag,
    Fail,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Flag => "FLAG",
            Status::Fail => "FAIL",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `NaN` for recorded-only quantities.
    pub bound: f64,
    pub status: Status,
    /// The property the check audits.
    pub anchor: &'static str,
    pub note: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditReport {
    pub checks: Vec<Check>,
    pub metadata: Vec<(String, String)>,
}

impl AuditReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// `value ≤ bound` passes; otherwise `on_violation`.
    pub fn upper(
        &mut self,
        name: impl Into<String>,
        value: f64,
        bound: f64,
        on_violation: Status,
        anchor: &'static str,
    ) {
        let status = if value <= bound { Status::Pass } else { on_violation };
        self.push(name, value, bound, status, anchor);
    }

    /// `value ≥ bound` passes; otherwise `on_violation`.
    pub fn lower(
        &mut self,
        name: impl Into<String>,
        value: f64,
        bound: f64,
        on_violation: Status,
        anchor: &'static str,
    ) {
        let status = if value >= bound { Status::Pass } else { on_violation };
        self.push(name, value, bound, status, anchor);
    }

    /// A recorded quantity without a bound.
    pub fn record(&mut self, name: impl Into<String>, value: f64, anchor: &'static str) {
        let status = if value.is_nan() { Status::Fail } else { Status::Pass };
        self.push(name, value, f64::NAN, status, anchor);
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64, bound: f64, status: Status, anchor: &'static str) {
        // NaN never satisfies a bound
        let status = if value.is_nan() { Status::Fail } else { status };
        self.checks.push(Check {
            name: name.into(),
            value,
            bound,
            status,
            anchor,
            note: String::new(),
        });
    }

    /// Attaches a note to the most recent check.
    pub fn note(&mut self, note: impl Into<String>) {
        if let Some(c) = self.checks.last_mut() {
            c.note = note.into();
        }
    }

    pub fn merge(&mut self, other: AuditReport) {
        self.checks.extend(other.checks);
        self.metadata.extend(other.metadata);
    }

    pub fn status(&self) -> Status {
        self.checks.iter().map(|c| c.status).max().unwrap_or(Status::Pass)
    }

    /// 0 when everything passes, 2 when the worst result is a FLAG, 1 on
    /// any FAIL.
    pub fn exit_code(&self) -> i32 {
        match self.status() {
            Status::Pass => 0,
            Status::Flag => 2,
            Status::Fail => 1,
        }
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `check,value,bound,status,anchor`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,value,bound,status,anchor\n");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{},{}",
                csv_field(&c.name),
                c.value,
                c.bound,
                c.status.as_str(),
                csv_field(c.anchor)
            );
        }
        s
    }

    /// Aligned human-readable table.
    pub fn to_table(&self) -> String {
        let width = self
            .checks
            .iter()
            .map(|c| c.name.chars().count())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut s = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let _ = writeln!(
            s,
            "{:<width$}  {:>14}  {:>14}  {:<6}  anchor",
            "check", "value", "bound", "status"
        );
        for c in &self.checks {
            let bound = if c.bound.is_nan() {
                "-".to_string()
            } else {
                format!("{:.6e}", c.bound)
            };
            let _ = write!(
                s,
                "{:<width$}  {:>14.6e}  {:>14}  {:<6}  {}",
                c.name,
                c.value,
                bound,
                c.status.as_str(),
                c.anchor
            );
            if !c.note.is_empty() {
                let _ = write!(s, " ({})", c.note);
            }
            s.push('\n');
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn rel_drift(x: f64, x0: f64, scale: f64) -> f64 {
    if x0.abs() > ROUNDOFF * scale {
        ((x - x0) / x0).abs()
    } else {
        (x - x0).abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservationTolerance {
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
}

impl Default for ConservationTolerance {
    fn default() -> Self {
        ConservationTolerance {
            mass: 1e-12,
            momentum: 1e-3,
            energy: 1e-3,
        }
    }
}

/// Largest drift of mass, each momentum component and energy over the
/// samples, relative to the initial value (absolute when that is zero).
pub fn conservation_report(samples: &[Sample], dim: usize, tol: ConservationTolerance) -> Result<AuditReport> {
    if samples.len() < 2 {
        return Err(VfpError::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let s0 = &samples[0];
    let scale = s0.mass.abs().max(s0.energy.abs()).max(1.0);
    let max_over = |f: &dyn Fn(&Sample) -> f64| samples.iter().map(f).fold(0.0, f64::max);
    let mut r = AuditReport::new();
    let dm = max_over(&|s| rel_drift(s.mass, s0.mass, scale));
    r.upper("mass_drift", dm, tol.mass, Status::Fail, "mass conservation");
    for k in 0..dim {
        let dp = max_over(&|s| rel_drift(s.momentum[k], s0.momentum[k], scale));
        r.upper(
            format!("momentum_{}_drift", k + 1),
            dp,
            tol.momentum,
            Status::Flag,
            "momentum conservation",
        );
    }
    let de = max_over(&|s| rel_drift(s.energy, s0.energy, scale));
    r.upper("energy_drift", de, tol.energy, Status::Flag, "energy conservation");
    Ok(r)
}

/// Window and tolerance for comparing `−ΔH` with `∫ D dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateWindow {
    pub t0: f64,
    pub t1: f64,
    pub rel_tol: f64,
}

/// Entropy monotonicity (largest per-step increase against `tol_step`) and,
/// with `rate`, the relative mismatch between `H(t0) − H(t1)` and the
/// trapezoidal integral of the recorded dissipation over the window.
pub fn h_theorem_check(samples: &[Sample], tol_step: f64, rate: Option<RateWindow>) -> Result<AuditReport> {
    if samples.len() < 2 {
        return Err(VfpError::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let mut r = AuditReport::new();
    let (worst, at) = samples
        .windows(2)
        .map(|w| (w[1].entropy - w[0].entropy, w[1].time))
        .fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    r.upper(
        "entropy_max_increase",
        worst,
        tol_step,
        Status::Fail,
        "entropy inequality",
    );
    if worst > tol_step {
        r.note(format!("at t = {at}"));
    }
    if let Some(w) = rate {
        let win: Vec<&Sample> = samples
            .iter()
            .filter(|s| s.time >= w.t0 - 1e-12 && s.time <= w.t1 + 1e-12)
            .collect();
        if win.len() < 2 {
            return Err(VfpError::InsufficientSamples {
                needed: 2,
                got: win.len(),
            });
        }
        let drop = win[0].entropy - win[win.len() - 1].entropy;
        let integral: f64 = win
            .windows(2)
            .map(|p| 0.5 * (p[0].dissipation + p[1].dissipation) * (p[1].time - p[0].time))
            .sum();
        let mismatch = if drop.abs().max(integral.abs()) < ROUNDOFF {
            0.0
        } else {
            ((drop - integral) / integral).abs()
        };
        r.upper(
            "dissipation_rate_mismatch",
            mismatch,
            w.rel_tol,
            Status::Flag,
            "entropy dissipation identity",
        );
        r.note(format!("-dH = {drop:e}, int D = {integral:e}"));
    }
    Ok(r)
}

/// The algebraic bounds of the regularized coefficients at one state:
/// `ε‖u^ε‖_∞ ≤ 1`, `0 ≤ δT^{ε,δ} ≤ 1`, `Φ ≥ N(ρT)∗θ_ε ≥ 0`, and `f > 0`
/// when `expect_positive`. `min T^{ε,δ}` is recorded.
pub fn bounds_check(state: &DistField, fields: &RegFields, expect_positive: bool) -> AuditReport {
    let (eps, delta) = (fields.params.eps(), fields.params.delta());
    let slack = 1.0 + ROUNDOFF;
    let mut r = AuditReport::new();
    r.upper(
        "u_eps_times_eps",
        fields.u_eps.max_norm() * eps,
        slack,
        Status::Fail,
        "regularized velocity bound",
    );
    r.upper(
        "t_eps_delta_times_delta",
        fields.t_eps_delta.max() * delta,
        slack,
        Status::Fail,
        "regularized temperature bound",
    );
    r.lower(
        "t_eps_delta_min",
        fields.t_eps_delta.min(),
        0.0,
        Status::Fail,
        "regularized temperature bound",
    );
    let scale = fields.en2_moll.max_abs().max(1.0);
    let excess = fields
        .phi
        .values()
        .iter()
        .zip(fields.thermal_moll.values())
        .fold(f64::INFINITY, |m, (p, t)| m.min(p - t));
    r.lower(
        "phi_minus_thermal_min",
        excess,
        -ROUNDOFF * scale,
        Status::Fail,
        "phi lower bound",
    );
    r.lower(
        "thermal_moll_min",
        fields.thermal_moll.min(),
        -ROUNDOFF * scale,
        Status::Fail,
        "phi lower bound",
    );
    if expect_positive {
        let (at, min) = state
            .values()
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |a, (k, &v)| if v < a.1 { (k, v) } else { a });
        r.push(
            "f_min",
            min,
            0.0,
            if min > 0.0 { Status::Pass } else { Status::Fail },
            "positivity",
        );
        if !(min > 0.0) {
            let nvel = state.grid().n_vel();
            r.note(format!("spatial cell {}, velocity cell {}", at / nvel, at % nvel));
        }
    }
    r.record(
        "t_eps_delta_min_recorded",
        fields.t_eps_delta.min(),
        "temperature lower bound",
    );
    r
}

/// `ρ ≤ C_N ‖f(x,·)‖_∞ T^{N/2}` in every cell. Ratios up to 1.05 are
/// FLAGged (the constant may not be sharp for discrete data), beyond FAIL.
pub fn density_temperature_check(state: &DistField) -> AuditReport {
    let m = compute_moments(state);
    let worst = density_temperature_ratio(state, &m).max();
    let mut r = AuditReport::new();
    let status = if worst <= 1.0 {
        Status::Pass
    } else if worst <= 1.05 {
        Status::Flag
    } else {
        Status::Fail
    };
    r.push(
        "density_temperature_ratio",
        worst,
        1.0,
        status,
        "density-temperature inequality",
    );
    r
}

/// Which `L^p` quantity to audit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LpKind {
    /// `p = 1`: the mass, which must be conserved exactly.
    One,
    Two,
    Four,
    /// `max f` against `e^{Nt} max f_0`.
    Max,
}

/// `max_t ∫∫f^p / (e^{N(p−1)t} ∫∫f_0^p)` against `1 + slack`.
pub fn lp_growth_check(samples: &[Sample], dim: usize, kind: LpKind, slack: f64) -> Result<AuditReport> {
    if samples.len() < 2 {
        return Err(VfpError::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let n = dim as f64;
    let (name, pick, rate): (&str, fn(&Sample) -> f64, f64) = match kind {
        LpKind::One => ("lp_growth_p1", |s| s.mass, 0.0),
        LpKind::Two => ("lp_growth_p2", |s| s.l2, n),
        LpKind::Four => ("lp_growth_p4", |s| s.l4, 3.0 * n),
        LpKind::Max => ("lp_growth_max", |s| s.max_f, n),
    };
    let base = pick(&samples[0]);
    let t0 = samples[0].time;
    let worst = samples
        .iter()
        .map(|s| {
            let allowed = base * exp(rate * (s.time - t0));
            if allowed == 0.0 {
                if pick(s) == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                pick(s) / allowed
            }
        })
        .fold(0.0, f64::max);
    let mut r = AuditReport::new();
    if kind == LpKind::One {
        let dev = samples
            .iter()
            .map(|s| {
                if base == 0.0 {
                    pick(s).abs()
                } else {
                    (pick(s) / base - 1.0).abs()
                }
            })
            .fold(0.0, f64::max);
        r.upper(name, 1.0 + dev, 1.0 + ROUNDOFF, Status::Fail, "L^p growth");
    } else {
        r.upper(name, worst, 1.0 + slack, Status::Flag, "L^p growth");
    }
    Ok(r)
}

/// Grönwall constant and envelope of the third moment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThirdMomentEnvelope {
    /// `max_t max(0, R) / (mass + m3)` with `R` the recorded rate.
    pub rate_constant: f64,
    /// `max_t m3(t) / E(t)`, `E(t) = (m3(0) + mass) e^{Ct} − mass`.
    pub worst_ratio: f64,
}

pub fn third_moment_envelope(samples: &[Sample]) -> Result<ThirdMomentEnvelope> {
    let s0 = samples
        .first()
        .ok_or(VfpError::InsufficientSamples { needed: 1, got: 0 })?;
    let c = samples
        .iter()
        .map(|s| {
            let den = s.mass + s.third_moment;
            if den > 0.0 {
                s.third_moment_rate.max(0.0) / den
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let worst = samples
        .iter()
        .map(|s| {
            let env = (s0.third_moment + s0.mass) * exp(c * (s.time - s0.time)) - s0.mass;
            if env > 0.0 {
                s.third_moment / env
            } else if s.third_moment == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    Ok(ThirdMomentEnvelope {
        rate_constant: c,
        worst_ratio: worst,
    })
}

/// Third moment against twice its Grönwall envelope.
pub fn third_moment_check(samples: &[Sample]) -> Result<AuditReport> {
    let env = third_moment_envelope(samples)?;
    let mut r = AuditReport::new();
    r.record("third_moment_rate_constant", env.rate_constant, "third moment bound");
    r.upper(
        "third_moment_envelope_ratio",
        env.worst_ratio,
        2.0,
        Status::Flag,
        "third moment bound",
    );
    Ok(r)
}

/// Norms of the moment fields at 0.9× their critical exponents, with
/// `M = max(‖f‖_∞, ∫∫|v|³f)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentIntegrability {
    pub exponents: [f64; 3],
    /// `‖ρ‖`, `‖ρu‖`, `‖NρT + ρ|u|²‖`
    pub norms: [f64; 3],
    pub m: f64,
}

impl MomentIntegrability {
    /// `max_k norm_k / (1 + M)`
    pub fn ratio(&self) -> f64 {
        self.norms.iter().fold(0.0, |a, n| a.max(n / (1.0 + self.m)))
    }
}

pub fn moment_integrability(state: &DistField) -> MomentIntegrability {
    let grid = *state.grid();
    let n = grid.dim() as f64;
    let exponents = [
        0.9 * (n + 3.0) / n,
        0.9 * (n + 3.0) / (n + 1.0),
        0.9 * (n + 3.0) / (n + 2.0),
    ];
    let m = compute_moments(state);
    let mom_abs = SpatialField::from_vec(
        grid,
        m.mom
            .values()
            .iter()
            .map(|p| crate::math::sqrt(crate::grid::norm_sq(p)))
            .collect(),
    );
    let norms = [
        m.rho.lp_norm(exponents[0]),
        mom_abs.lp_norm(exponents[1]),
        m.en2.lp_norm(exponents[2]),
    ];
    MomentIntegrability {
        exponents,
        norms,
        m: state.max_value().max(third_moment(state)),
    }
}

pub fn moment_integrability_check(state: &DistField) -> AuditReport {
    let mi = moment_integrability(state);
    let mut r = AuditReport::new();
    for (name, (p, v)) in ["rho", "mom", "energy"].iter().zip(mi.exponents.iter().zip(mi.norms)) {
        r.record(format!("lp_norm_{name}_p{p:.3}"), v, "moment integrability");
    }
    r.record("moment_bound_m", mi.m, "moment integrability");
    r.record("norm_over_one_plus_m", mi.ratio(), "moment integrability");
    r
}

/// `sup_y ∫ θ_ε(x − y) ρ(x) / (θ_ε∗ρ)(x) dx`.
pub fn mollifier_mass_check(rho: &SpatialField, kernel: &MollifierKernel) -> Result<f64> {
    if rho.values().iter().any(|&r| r < 0.0 || !r.is_finite()) {
        return Err(VfpError::param("rho", "must be finite and nonnegative"));
    }
    if !rho.values().iter().any(|&r| r > 0.0) {
        return Err(VfpError::ZeroMass);
    }
    let grid = *rho.grid();
    let smooth = mollify(kernel, rho)?;
    let ratio: Vec<f64> = rho
        .values()
        .iter()
        .zip(smooth.values())
        .map(|(&r, &s)| if r > 0.0 { r / s } else { 0.0 })
        .collect();
    let mut worst = 0.0f64;
    for y in 0..grid.n_space() {
        let mut acc = 0.0;
        for (k, w) in kernel.offsets().iter().zip(kernel.cell_weights()) {
            acc += w * ratio[kernel.shifted(&grid, y, k)];
        }
        worst = worst.max(acc);
    }
    Ok(worst)
}
