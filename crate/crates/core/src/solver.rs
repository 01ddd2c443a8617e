//! Time integration: the Strang-split nonlinear solver, the frozen-coefficient
//! Picard iteration and (ε, δ) continuation studies.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Result, VfpError};
use crate::grid::{DistField, PhaseGrid, Point, MAX_DIM};
use crate::kinetics::{collision_step, third_moment_rate, transport_step, CoefficientSet};
use crate::math::{ceil, sqrt};
use crate::moments::{compute_moments, entropy, entropy_dissipation, lp_integral, third_moment};
use crate::par;
use crate::regularize::{build_mollifier, regularize_initial, MollifierKernel, RegFields, RegParams};

/// Settings of the Picard iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardConfig {
    pub n_max: usize,
    pub tol: f64,
    /// Velocity weight exponent of the `L²_q` residual norm.
    pub q: f64,
    /// Keep every `store_stride`-th time node of an iterate; coefficients in
    /// between are interpolated linearly in time. `1` stores everything.
    pub store_stride: usize,
}

impl PicardConfig {
    /// `q = N + 5`, i.e. 6 in one dimension.
    pub fn for_dim(dim: usize) -> Self {
        PicardConfig {
            n_max: 12,
            tol: 1e-8,
            q: dim as f64 + 5.0,
            store_stride: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub grid: PhaseGrid,
    /// `None` runs with the raw coefficients `(u_f, T_f)`.
    pub reg: Option<RegParams>,
    pub dt: f64,
    pub t_end: f64,
    pub picard: PicardConfig,
    /// Record a [`Sample`] every this many steps (and at the last step).
    pub record_every: usize,
    /// Times at which to keep a copy of the state (rounded up to a step).
    pub snapshot_times: Vec<f64>,
    /// Keep every state of the run in [`Trajectory::states`].
    pub keep_states: bool,
}

/// `0.5·dx/vmax`
pub fn default_dt(grid: &PhaseGrid) -> f64 {
    0.5 * grid.dx() / grid.vmax()
}

impl SolverConfig {
    pub fn new(grid: PhaseGrid, reg: Option<RegParams>, t_end: f64) -> Self {
        SolverConfig {
            grid,
            reg,
            dt: default_dt(&grid),
            t_end,
            picard: PicardConfig::for_dim(grid.dim()),
            record_every: 1,
            snapshot_times: Vec::new(),
            keep_states: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(VfpError::param("dt", "must be positive"));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(VfpError::param("t_end", "must be nonnegative"));
        }
        if self.record_every == 0 {
            return Err(VfpError::param("record_every", "must be at least 1"));
        }
        let p = &self.picard;
        if !(p.q > self.grid.dim() as f64 + 4.0) {
            return Err(VfpError::param("picard.q", "must exceed N + 4"));
        }
        if !(p.tol > 0.0) {
            return Err(VfpError::param("picard.tol", "must be positive"));
        }
        if p.n_max == 0 {
            return Err(VfpError::param("picard.n_max", "must be at least 1"));
        }
        if p.store_stride == 0 {
            return Err(VfpError::param("picard.store_stride", "must be at least 1"));
        }
        Ok(())
    }

    /// `ceil(t_end/dt)`; the step actually taken is `t_end / n_steps`.
    pub fn n_steps(&self) -> usize {
        let n = ceil(self.t_end / self.dt - 1e-9);
        if n < 0.0 {
            0
        } else {
            n as usize
        }
    }

    pub fn effective_dt(&self) -> f64 {
        match self.n_steps() {
            0 => 0.0,
            n => self.t_end / n as f64,
        }
    }
}

/// Extremes of the regularized fields at one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundSummary {
    pub eps: f64,
    pub delta: f64,
    /// `‖u^ε‖_∞`
    pub u_eps_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub phi_min: f64,
    /// `min (Φ − N(ρT)∗θ_ε)`
    pub phi_excess_min: f64,
    /// `min N(ρT)∗θ_ε`
    pub thermal_min: f64,
    pub f_min: f64,
}

impl BoundSummary {
    pub fn from_fields(fields: &RegFields, state: &DistField) -> Self {
        let excess = fields
            .phi
            .values()
            .iter()
            .zip(fields.thermal_moll.values())
            .fold(f64::INFINITY, |m, (p, t)| m.min(p - t));
        BoundSummary {
            eps: fields.params.eps(),
            delta: fields.params.delta(),
            u_eps_max: fields.u_eps.max_norm(),
            t_min: fields.t_eps_delta.min(),
            t_max: fields.t_eps_delta.max(),
            phi_min: fields.phi.min(),
            phi_excess_min: excess,
            thermal_min: fields.thermal_moll.min(),
            f_min: state.min_value(),
        }
    }
}

/// Scalar diagnostics at one recorded time.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub mass: f64,
    pub momentum: Point,
    pub energy: f64,
    pub entropy: f64,
    /// `D(f)` with the state's own moments.
    pub dissipation: f64,
    pub third_moment: f64,
    /// Collision rate of the third moment for the coefficients in use.
    pub third_moment_rate: f64,
    /// `∫∫ f²`
    pub l2: f64,
    /// `∫∫ f⁴`
    pub l4: f64,
    pub max_f: f64,
    pub min_f: f64,
    pub bounds: Option<BoundSummary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub samples: Vec<Sample>,
    pub snapshots: Vec<(f64, DistField)>,
    /// Every state, when [`SolverConfig::keep_states`] is set.
    pub states: Vec<DistField>,
    pub final_state: DistField,
}

/// Time stepper for one configuration.
#[derive(Clone, Debug)]
pub struct Integrator {
    cfg: SolverConfig,
    kernel: Option<MollifierKernel>,
}

impl Integrator {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let kernel = match cfg.reg {
            Some(p) => Some(build_mollifier(&cfg.grid, p.eps())?),
            None => None,
        };
        Ok(Integrator { cfg, kernel })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn kernel(&self) -> Option<&MollifierKernel> {
        self.kernel.as_ref()
    }

    /// Raw or regularized coefficients of `state`.
    pub fn coefficients(&self, state: &DistField) -> Result<(CoefficientSet, Option<RegFields>)> {
        let m = compute_moments(state);
        match (self.cfg.reg, &self.kernel) {
            (Some(p), Some(k)) => {
                let fields = RegFields::compute(&m, k, p)?;
                Ok((CoefficientSet::regularized(&fields), Some(fields)))
            }
            _ => Ok((CoefficientSet::raw(&m), None)),
        }
    }

    /// Coefficients used for a step starting at `state`: those of the
    /// state after the first half transport.
    fn step_coefficients(&self, state: &DistField, dt: f64) -> Result<CoefficientSet> {
        let half = transport_step(state, 0.5 * dt)?;
        Ok(self.coefficients(&half)?.0)
    }

    /// One Strang step `T(dt/2) C(dt) T(dt/2)` with coefficients refreshed
    /// after the first half step.
    pub fn step(&self, state: &DistField, dt: f64) -> Result<DistField> {
        let half = transport_step(state, 0.5 * dt)?;
        let (coeffs, _) = self.coefficients(&half)?;
        let mid = collision_step(&half, &coeffs, dt)?;
        transport_step(&mid, 0.5 * dt)
    }

    /// One Strang step with externally frozen coefficients.
    pub fn step_frozen(&self, state: &DistField, coeffs: &CoefficientSet, dt: f64) -> Result<DistField> {
        let half = transport_step(state, 0.5 * dt)?;
        let mid = collision_step(&half, coeffs, dt)?;
        transport_step(&mid, 0.5 * dt)
    }

    pub fn sample(&self, time: f64, state: &DistField) -> Result<Sample> {
        let m = compute_moments(state);
        let (coeffs, fields) = self.coefficients(state)?;
        Ok(Sample {
            time,
            mass: m.mass(),
            momentum: m.momentum(),
            energy: m.energy(),
            entropy: entropy(state),
            dissipation: entropy_dissipation(state, &m)?,
            third_moment: third_moment(state),
            third_moment_rate: third_moment_rate(state, &coeffs)?,
            l2: lp_integral(state, 2.0),
            l4: lp_integral(state, 4.0),
            max_f: state.max_value(),
            min_f: state.min_value(),
            bounds: fields.map(|f| BoundSummary::from_fields(&f, state)),
        })
    }

    /// Integrates from `initial` (used as is) to `t_end`.
    pub fn run_from(&self, initial: DistField) -> Result<Trajectory> {
        self.cfg.grid.check_same(initial.grid())?;
        initial.validate()?;
        let n = self.cfg.n_steps();
        let dt = self.cfg.effective_dt();
        let mut snaps: Vec<f64> = self.cfg.snapshot_times.clone();
        snaps.sort_by(f64::total_cmp);
        let mut next_snap = 0;
        let mut traj = Trajectory {
            dim: self.cfg.grid.dim(),
            samples: Vec::new(),
            snapshots: Vec::new(),
            states: Vec::new(),
            final_state: initial.clone(),
        };
        let mut state = initial;
        for k in 0..=n {
            let time = k as f64 * dt;
            if k > 0 {
                let next = self.step(&state, dt)?;
                if let Err(e) = next.validate() {
                    return Err(VfpError::Aborted {
                        time,
                        reason: e.to_string(),
                        snapshot: alloc::boxed::Box::new(next),
                    });
                }
                state = next;
            }
            if k % self.cfg.record_every == 0 || k == n {
                traj.samples.push(self.sample(time, &state)?);
            }
            while next_snap < snaps.len() && (snaps[next_snap] <= time + 1e-9 * dt.max(1.0) || k == n) {
                traj.snapshots.push((time, state.clone()));
                next_snap += 1;
            }
            if self.cfg.keep_states {
                traj.states.push(state.clone());
            }
        }
        traj.final_state = state;
        Ok(traj)
    }

    /// Integrates from `f0`, first replacing it by `f_{0,ε}` when the run is
    /// regularized.
    pub fn run(&self, f0: &DistField) -> Result<Trajectory> {
        let initial = match self.cfg.reg {
            Some(p) => regularize_initial(f0, p.eps())?,
            None => f0.clone(),
        };
        self.run_from(initial)
    }
}

/// One Strang step of the nonlinear equation.
pub fn step_nonlinear(state: &DistField, cfg: &SolverConfig) -> Result<DistField> {
    Integrator::new(cfg.clone())?.step(state, cfg.dt)
}

/// Integrates the nonlinear equation; see [`Integrator::run`].
pub fn run(cfg: &SolverConfig, f0: &DistField) -> Result<Trajectory> {
    Integrator::new(cfg.clone())?.run(f0)
}

/// `‖a − b‖_{L²_q}`
pub fn weighted_l2_distance(a: &DistField, b: &DistField, q: f64) -> Result<f64> {
    a.grid().check_same(b.grid())?;
    let grid = *a.grid();
    let nvel = grid.n_vel();
    let weights: Vec<f64> = grid
        .velocities()
        .iter()
        .map(|v| 1.0 + crate::math::pow(sqrt(crate::grid::norm_sq(v)), q))
        .collect();
    let (x, y) = (a.values(), b.values());
    let s = crate::math::pairwise_sum(x.len(), |k| {
        let d = x[k] - y[k];
        weights[k % nvel] * d * d
    });
    Ok(sqrt(s * grid.vel_cell_volume() * grid.space_cell_volume()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PicardOutcome {
    pub final_state: DistField,
    /// `r_n = sup_t ‖f^{n+1} − f^n‖_{L²_q}` over the stored time nodes.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Stored states of the last iterate and their times.
    pub times: Vec<f64>,
    pub states: Vec<DistField>,
}

/// Frozen-coefficient Picard iteration for the regularized equation.
///
/// Iterate 0 is `f0eps` at every time. Iterate `n + 1` solves the linear
/// equation whose coefficients `(u^ε, T^{ε,δ})` at step `k` are computed
/// from iterate `n`, using the same half-step rule as [`Integrator::step`]
/// so that the fixed point is the direct regularized run. Stops when
/// `r_n < tol` or after `n_max` iterations; three consecutive
/// non-decreasing residuals abort with [`VfpError::PicardDivergence`].
pub fn picard_solve(f0eps: &DistField, cfg: &SolverConfig) -> Result<PicardOutcome> {
    if cfg.reg.is_none() {
        return Err(VfpError::param(
            "reg",
            "the Picard iteration needs regularized coefficients",
        ));
    }
    if !(f0eps.min_value() > 0.0) {
        return Err(VfpError::param("f0eps", "must be strictly positive"));
    }
    let integ = Integrator::new(cfg.clone())?;
    cfg.grid.check_same(f0eps.grid())?;
    let n = cfg.n_steps();
    let dt = cfg.effective_dt();
    let stride = cfg.picard.store_stride;
    let mut nodes: Vec<usize> = (0..=n).step_by(stride).collect();
    if *nodes.last().unwrap_or(&0) != n {
        nodes.push(n);
    }
    let times: Vec<f64> = nodes.iter().map(|&k| k as f64 * dt).collect();
    let mut current: Vec<DistField> = alloc::vec![f0eps.clone(); nodes.len()];
    let mut residuals = Vec::new();
    if n == 0 {
        return Ok(PicardOutcome {
            final_state: f0eps.clone(),
            residuals,
            converged: true,
            times,
            states: current,
        });
    }
    let mut converged = false;
    let mut rising = 0;
    for _ in 0..cfg.picard.n_max {
        let node_coeffs: Vec<CoefficientSet> =
            par::map_range(nodes.len(), |i| integ.step_coefficients(&current[i], dt))
                .into_iter()
                .collect::<Result<_>>()?;
        let mut next = Vec::with_capacity(nodes.len());
        let mut state = f0eps.clone();
        next.push(state.clone());
        let mut node = 0;
        for k in 0..n {
            while nodes[node + 1] <= k {
                node += 1;
            }
            let coeffs = if nodes[node] == k {
                node_coeffs[node].clone()
            } else {
                let s = (k - nodes[node]) as f64 / (nodes[node + 1] - nodes[node]) as f64;
                interpolate(&node_coeffs[node], &node_coeffs[node + 1], s)
            };
            state = integ.step_frozen(&state, &coeffs, dt)?;
            if nodes[node + 1] == k + 1 {
                next.push(state.clone());
            }
        }
        let mut r = 0.0f64;
        for (a, b) in next.iter().zip(&current) {
            r = r.max(weighted_l2_distance(a, b, cfg.picard.q)?);
        }
        log::debug!("picard iteration {}: residual {r:e}", residuals.len() + 1);
        if let Some(&prev) = residuals.last() {
            if r >= prev {
                rising += 1;
            } else {
                rising = 0;
            }
        }
        residuals.push(r);
        current = next;
        if rising >= 3 {
            return Err(VfpError::PicardDivergence {
                iterations: residuals.len(),
                residuals,
            });
        }
        if r < cfg.picard.tol {
            converged = true;
            break;
        }
    }
    let final_state = current.last().cloned().unwrap_or_else(|| f0eps.clone());
    Ok(PicardOutcome {
        final_state,
        residuals,
        converged,
        times,
        states: current,
    })
}

fn interpolate(a: &CoefficientSet, b: &CoefficientSet, s: f64) -> CoefficientSet {
    let grid = *a.temp.grid();
    let temp = a
        .temp
        .values()
        .iter()
        .zip(b.temp.values())
        .map(|(x, y)| (1.0 - s) * x + s * y)
        .collect();
    let u =
        a.u.values()
            .iter()
            .zip(b.u.values())
            .map(|(x, y)| {
                let mut p = [0.0; MAX_DIM];
                for k in 0..MAX_DIM {
                    p[k] = (1.0 - s) * x[k] + s * y[k];
                }
                p
            })
            .collect();
    CoefficientSet {
        u: crate::grid::VectorField::from_vec(grid, u),
        temp: crate::grid::SpatialField::from_vec(grid, temp),
        source: a.source,
    }
}

/// `L¹(dx)` distances between the conserved moment fields of two states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentDistance {
    pub rho: f64,
    /// Summed over components.
    pub mom: f64,
    /// `NρT + ρ|u|²`
    pub energy: f64,
}

pub fn moment_distance(a: &DistField, b: &DistField) -> Result<MomentDistance> {
    a.grid().check_same(b.grid())?;
    let (ma, mb) = (compute_moments(a), compute_moments(b));
    Ok(MomentDistance {
        rho: ma.rho.l1_distance(&mb.rho)?,
        mom: ma.mom.l1_distance(&mb.mom)?,
        energy: ma.en2.l1_distance(&mb.en2)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuationRow {
    pub params: RegParams,
    /// Distance to the previous row's final state (`None` on the first row).
    pub successive: Option<MomentDistance>,
    /// Distance to the reference final state, when one was given.
    pub to_reference: Option<MomentDistance>,
}

/// Runs [`run`] for every parameter pair (concurrently) and tabulates the
/// distances between consecutive final moment fields, and to `reference`.
pub fn continuation_study(
    cfg: &SolverConfig,
    params: &[RegParams],
    f0: &DistField,
    reference: Option<&DistField>,
) -> Result<Vec<ContinuationRow>> {
    let finals: Vec<DistField> = par::map_range(params.len(), |i| {
        let mut c = cfg.clone();
        c.reg = Some(params[i]);
        c.snapshot_times.clear();
        c.keep_states = false;
        c.record_every = usize::MAX;
        run(&c, f0).map(|t| t.final_state)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(params.len());
    for (i, f) in finals.iter().enumerate() {
        let successive = if i == 0 {
            None
        } else {
            Some(moment_distance(&finals[i - 1], f)?)
        };
        let to_reference = match reference {
            Some(r) => Some(moment_distance(r, f)?),
            None => None,
        };
        rows.push(ContinuationRow {
            params: params[i],
            successive,
            to_reference,
        });
    }
    Ok(rows)
}

/// `(ε_k, δ)` with `ε_k = eps0 / 2^k`, or `(ε, δ_k)` likewise.
pub fn halving_list(start: f64, count: usize, fixed: f64, vary_eps: bool) -> Result<Vec<RegParams>> {
    let mut out = Vec::with_capacity(count);
    let mut x = start;
    for _ in 0..count {
        out.push(if vary_eps {
            RegParams::new(x, fixed)?
        } else {
            RegParams::new(fixed, x)?
        });
        x *= 0.5;
    }
    if out.is_empty() {
        return Err(VfpError::param(
            "count",
            format!("need at least one entry, got {count}"),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{cos, exp, PI};
    use crate::moments::{global_maxwellian, maxwellian_value};

    fn grid(nx: usize, nv: usize) -> PhaseGrid {
        PhaseGrid::new(1, nx, nv, 8.0, 1.0).unwrap()
    }

    fn bimodal(g: PhaseGrid) -> DistField {
        DistField::sample(g, |_, v| {
            0.5 * maxwellian_value(1, 1.0, &[0.0; 2], 0.5, v) + 0.5 * maxwellian_value(1, 1.0, &[0.0; 2], 2.0, v)
        })
        .unwrap()
    }

    fn perturbed(g: PhaseGrid) -> DistField {
        DistField::sample(g, |x, v| {
            (1.0 + 0.3 * cos(2.0 * PI * x[0])) * exp(-v[0] * v[0] / 2.0) / sqrt(2.0 * PI)
        })
        .unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        let g = grid(32, 64);
        let c = SolverConfig::new(g, None, 1.0);
        assert!((c.dt - 0.5 * g.dx() / 8.0).abs() < 1e-15);
        assert_eq!(c.picard.q, 6.0);
        assert_eq!(c.n_steps(), 512);
        let mut bad = c.clone();
        bad.picard.q = 5.0;
        assert!(bad.validate().is_err());
        bad = c.clone();
        bad.dt = 0.0;
        assert!(bad.validate().is_err());
        bad = c;
        bad.t_end = 0.0;
        assert_eq!(bad.n_steps(), 0);
    }

    #[test]
    fn uniform_maxwellian_is_fixed() {
        let g = grid(16, 64);
        let f = global_maxwellian(&g, 1.0, [0.0; 2], 1.0).unwrap();
        let cfg = SolverConfig::new(g, None, 1.0);
        let out = step_nonlinear(&f, &cfg).unwrap();
        assert!(out.l1_distance(&f).unwrap() < 1e-10);
    }

    #[test]
    fn uniform_data_stays_uniform() {
        let g = grid(8, 64);
        let f = bimodal(g);
        let cfg = SolverConfig::new(g, None, 1.0);
        let out = step_nonlinear(&f, &cfg).unwrap();
        for i in 1..8 {
            assert_eq!(out.cell(i), out.cell(0));
        }
    }

    #[test]
    fn step_conserves_mass() {
        let g = grid(16, 64);
        let f = perturbed(g);
        for reg in [None, Some(RegParams::new(0.2, 0.1).unwrap())] {
            let cfg = SolverConfig::new(g, reg, 1.0);
            let out = step_nonlinear(&f, &cfg).unwrap();
            assert!((out.mass() - f.mass()).abs() < 1e-12 * f.mass());
            assert!(out.min_value() >= 0.0);
        }
    }

    #[test]
    fn run_records_and_is_deterministic() {
        let g = grid(8, 64);
        let mut cfg = SolverConfig::new(g, None, 0.5);
        cfg.record_every = 10;
        cfg.snapshot_times = alloc::vec![0.0, 0.25, 0.5];
        let f = perturbed(g);
        let a = run(&cfg, &f).unwrap();
        let b = run(&cfg, &f).unwrap();
        assert_eq!(a, b);
        let n = cfg.n_steps();
        assert_eq!(a.samples.len(), n / 10 + 1 + usize::from(!n.is_multiple_of(10)));
        assert!(a.samples.windows(2).all(|w| w[0].time < w[1].time));
        assert_eq!(a.snapshots.len(), 3);
        assert!((a.samples.last().unwrap().time - 0.5).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_entropy_decreases() {
        let g = grid(4, 64);
        let cfg = SolverConfig::new(g, None, 1.0);
        let t = run(&cfg, &bimodal(g)).unwrap();
        for w in t.samples.windows(2) {
            assert!(w[1].entropy <= w[0].entropy + 1e-12);
        }
    }

    #[test]
    fn regularized_run_applies_initial_regularization() {
        let g = grid(16, 64);
        let p = RegParams::new(0.2, 0.2).unwrap();
        let cfg = SolverConfig::new(g, Some(p), 0.0);
        let f = perturbed(g);
        let t = run(&cfg, &f).unwrap();
        let expected = f.mass() + 0.2 * sqrt(PI);
        assert!((t.final_state.mass() - expected).abs() < 1e-8);
        assert!(t.samples[0].bounds.is_some());
    }

    #[test]
    fn picard_trivial_cases() {
        let g = grid(16, 64);
        let p = RegParams::new(0.1, 0.1).unwrap();
        let f = regularize_initial(&perturbed(g), 0.1).unwrap();
        let cfg = SolverConfig::new(g, Some(p), 0.0);
        let out = picard_solve(&f, &cfg).unwrap();
        assert!(out.residuals.is_empty());
        assert_eq!(out.final_state, f);
        let raw = SolverConfig::new(g, None, 0.1);
        assert!(picard_solve(&f, &raw).is_err());
    }

    #[test]
    fn picard_converges_to_direct_run() {
        let g = grid(16, 64);
        let p = RegParams::new(0.1, 0.1).unwrap();
        let f = regularize_initial(&perturbed(g), 0.1).unwrap();
        let mut cfg = SolverConfig::new(g, Some(p), 0.1);
        cfg.picard.tol = 1e-10;
        let out = picard_solve(&f, &cfg).unwrap();
        assert!(out.converged, "{:?}", out.residuals);
        let direct = Integrator::new(cfg).unwrap().run_from(f).unwrap();
        assert!(out.final_state.l1_distance(&direct.final_state).unwrap() < 1e-9);
    }

    #[test]
    fn picard_stride_mode_converges() {
        let g = grid(16, 64);
        let p = RegParams::new(0.1, 0.1).unwrap();
        let f = regularize_initial(&perturbed(g), 0.1).unwrap();
        let mut cfg = SolverConfig::new(g, Some(p), 0.1);
        cfg.picard.store_stride = 4;
        let out = picard_solve(&f, &cfg).unwrap();
        assert!(out.converged, "{:?}", out.residuals);
        let direct = Integrator::new(cfg).unwrap().run_from(f).unwrap();
        assert!(out.final_state.l1_distance(&direct.final_state).unwrap() < 1e-3);
    }

    #[test]
    fn continuation_repeated_params_give_zero() {
        let g = grid(16, 64);
        let p = RegParams::new(0.2, 0.1).unwrap();
        let cfg = SolverConfig::new(g, None, 0.1);
        let rows = continuation_study(&cfg, &[p, p], &perturbed(g), None).unwrap();
        let d = rows[1].successive.unwrap();
        assert_eq!((d.rho, d.mom, d.energy), (0.0, 0.0, 0.0));
        assert!(rows[0].successive.is_none());
    }

    #[test]
    fn halving_lists() {
        let l = halving_list(0.2, 3, 0.1, true).unwrap();
        assert_eq!(l.iter().map(|p| p.eps()).collect::<Vec<_>>(), [0.2, 0.1, 0.05]);
        assert!(l.iter().all(|p| p.delta() == 0.1));
        assert!(halving_list(0.2, 0, 0.1, true).is_err());
    }
}
