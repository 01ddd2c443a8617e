//! JSON run configuration and initial-condition presets.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vfp_core::moments::maxwellian_value;
use vfp_core::solver::{default_dt, PicardConfig, SolverConfig};
use vfp_core::{DistField, PhaseGrid, RegParams};

use crate::error::{Error, Result};
use crate::snapshot::read_snapshot;

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub nx: usize,
    pub nv: usize,
    pub vmax: f64,
    #[serde(default = "one")]
    pub period: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegConfig {
    pub eps: f64,
    pub delta: f64,
}

/// Initial condition. Spatial modulations act on the first coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Initial {
    /// `M(ρ, u, T)`, uniform in `x`.
    Maxwellian {
        #[serde(default = "one")]
        rho: f64,
        #[serde(default)]
        u: [f64; 2],
        #[serde(default = "one")]
        temp: f64,
    },
    /// `ρ (1 + a cos 2πkx/L) [w M(1, u_a, T_a) + (1 − w) M(1, u_b, T_b)]`.
    Bimodal {
        #[serde(default = "one")]
        rho: f64,
        #[serde(default = "Initial::half")]
        weight: f64,
        #[serde(default)]
        u_a: [f64; 2],
        #[serde(default)]
        u_b: [f64; 2],
        #[serde(default = "Initial::half")]
        temp_a: f64,
        #[serde(default = "Initial::two")]
        temp_b: f64,
        #[serde(default)]
        amplitude: f64,
        #[serde(default = "one_usize")]
        mode: usize,
    },
    /// `M(ρ(x), u(x), T(x))` with `ρ = ρ₀(1 + a sin s)`, `u = u₀ + a_u sin s`,
    /// `T = T₀(1 + a_T cos s)`, `s = 2πkx/L`.
    SinPerturbedMaxwellian {
        #[serde(default = "one")]
        rho: f64,
        #[serde(default = "Initial::half")]
        amplitude: f64,
        #[serde(default)]
        u: [f64; 2],
        #[serde(default)]
        u_amplitude: [f64; 2],
        #[serde(default = "one")]
        temp: f64,
        #[serde(default)]
        temp_amplitude: f64,
        #[serde(default = "one_usize")]
        mode: usize,
    },
    /// A snapshot file; relative paths are resolved against the config file.
    File { path: PathBuf },
}

impl Default for Initial {
    fn default() -> Self {
        Initial::Maxwellian {
            rho: 1.0,
            u: [0.0; 2],
            temp: 1.0,
        }
    }
}

impl Initial {
    fn half() -> f64 {
        0.5
    }
    fn two() -> f64 {
        2.0
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(
                    format!("initial.{name}"),
                    format!("must be positive, got {x}"),
                ))
            }
        };
        let below_one = |name: &str, x: f64| {
            if x.is_finite() && x.abs() < 1.0 {
                Ok(())
            } else {
                Err(Error::validation(
                    format!("initial.{name}"),
                    format!("must lie in (-1, 1), got {x}"),
                ))
            }
        };
        let finite = |name: &str, u: &[f64; 2]| {
            if u.iter().all(|c| c.is_finite()) {
                Ok(())
            } else {
                Err(Error::validation(format!("initial.{name}"), "must be finite"))
            }
        };
        let mode_ok = |mode: usize| {
            if mode >= 1 {
                Ok(())
            } else {
                Err(Error::validation("initial.mode", "must be at least 1"))
            }
        };
        match self {
            Initial::Maxwellian { rho, u, temp } => {
                positive("rho", *rho)?;
                finite("u", u)?;
                positive("temp", *temp)
            }
            Initial::Bimodal {
                rho,
                weight,
                u_a,
                u_b,
                temp_a,
                temp_b,
                amplitude,
                mode,
            } => {
                positive("rho", *rho)?;
                if !(0.0..=1.0).contains(weight) {
                    return Err(Error::validation(
                        "initial.weight",
                        format!("must lie in [0, 1], got {weight}"),
                    ));
                }
                finite("u_a", u_a)?;
                finite("u_b", u_b)?;
                positive("temp_a", *temp_a)?;
                positive("temp_b", *temp_b)?;
                below_one("amplitude", *amplitude)?;
                mode_ok(*mode)
            }
            Initial::SinPerturbedMaxwellian {
                rho,
                amplitude,
                u,
                u_amplitude,
                temp,
                temp_amplitude,
                mode,
            } => {
                positive("rho", *rho)?;
                below_one("amplitude", *amplitude)?;
                finite("u", u)?;
                finite("u_amplitude", u_amplitude)?;
                positive("temp", *temp)?;
                below_one("temp_amplitude", *temp_amplitude)?;
                mode_ok(*mode)
            }
            Initial::File { .. } => Ok(()),
        }
    }

    /// Samples the preset on `grid`; snapshot files must match `grid` and
    /// pass the sign check.
    pub fn field(&self, grid: &PhaseGrid) -> Result<DistField> {
        let dim = grid.dim();
        let phase = |x: f64, mode: usize| 2.0 * PI * mode as f64 * x / grid.period();
        let f = match *self {
            Initial::Maxwellian { rho, u, temp } => {
                DistField::sample(*grid, |_, v| maxwellian_value(dim, rho, &u, temp, v))?
            }
            Initial::Bimodal {
                rho,
                weight,
                u_a,
                u_b,
                temp_a,
                temp_b,
                amplitude,
                mode,
            } => DistField::sample(*grid, |x, v| {
                let r = rho * (1.0 + amplitude * phase(x[0], mode).cos());
                r * (weight * maxwellian_value(dim, 1.0, &u_a, temp_a, v)
                    + (1.0 - weight) * maxwellian_value(dim, 1.0, &u_b, temp_b, v))
            })?,
            Initial::SinPerturbedMaxwellian {
                rho,
                amplitude,
                u,
                u_amplitude,
                temp,
                temp_amplitude,
                mode,
            } => DistField::sample(*grid, |x, v| {
                let s = phase(x[0], mode);
                let (sn, cs) = (s.sin(), s.cos());
                let uu = [u[0] + u_amplitude[0] * sn, u[1] + u_amplitude[1] * sn];
                maxwellian_value(
                    dim,
                    rho * (1.0 + amplitude * sn),
                    &uu,
                    temp * (1.0 + temp_amplitude * cs),
                    v,
                )
            })?,
            Initial::File { ref path } => {
                let f = self.raw_field(grid)?;
                f.validate()
                    .map_err(|e| Error::validation("initial.path", format!("{}: {e}", path.display())))?;
                f
            }
        };
        Ok(f)
    }

    /// Like [`Initial::field`], but snapshot values are returned unchecked.
    pub fn raw_field(&self, grid: &PhaseGrid) -> Result<DistField> {
        match self {
            Initial::File { path } => {
                let (f, _) = read_snapshot(path)?;
                if f.grid() != grid {
                    return Err(Error::validation(
                        "initial.path",
                        format!("{}: snapshot grid differs from the configured grid", path.display()),
                    ));
                }
                Ok(f)
            }
            _ => self.field(grid),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    #[serde(default = "PicardSection::n_max")]
    pub n_max: usize,
    #[serde(default = "PicardSection::tol")]
    pub tol: f64,
    /// Weight exponent of `L²_q`; defaults to `dim + 5`.
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default = "one_usize")]
    pub store_stride: usize,
    /// Also run the direct integrator and compare with the fixed point.
    #[serde(default = "yes")]
    pub compare_direct: bool,
    #[serde(default = "PicardSection::agreement_tol")]
    pub agreement_tol: f64,
}

impl PicardSection {
    fn n_max() -> usize {
        12
    }
    fn tol() -> f64 {
        1e-8
    }
    fn agreement_tol() -> f64 {
        5e-8
    }
}

impl Default for PicardSection {
    fn default() -> Self {
        PicardSection {
            n_max: Self::n_max(),
            tol: Self::tol(),
            q: None,
            store_stride: 1,
            compare_direct: true,
            agreement_tol: Self::agreement_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSection {
    #[serde(default = "ParticleSection::n_p")]
    pub n_p: usize,
}

impl ParticleSection {
    fn n_p() -> usize {
        100_000
    }
}

impl Default for ParticleSection {
    fn default() -> Self {
        ParticleSection { n_p: Self::n_p() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// ε values of the first stage, run at `delta_for_eps`.
    #[serde(default = "SweepSection::eps")]
    pub eps: Vec<f64>,
    #[serde(default = "SweepSection::delta_for_eps")]
    pub delta_for_eps: f64,
    /// δ values of the second stage, run at `eps_for_delta` (default: the
    /// last ε of the first stage).
    #[serde(default = "SweepSection::delta")]
    pub delta: Vec<f64>,
    #[serde(default)]
    pub eps_for_delta: Option<f64>,
    /// Compare the δ stage with a raw-coefficient run from the same `f_{0,ε}`.
    #[serde(default = "yes")]
    pub reference: bool,
}

impl SweepSection {
    fn eps() -> Vec<f64> {
        vec![0.2, 0.1, 0.05]
    }
    fn delta_for_eps() -> f64 {
        0.1
    }
    fn delta() -> Vec<f64> {
        vec![0.2, 0.1, 0.05, 0.025]
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            eps: Self::eps(),
            delta_for_eps: Self::delta_for_eps(),
            delta: Self::delta(),
            eps_for_delta: None,
            reference: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    /// Comparison times (default: `t_end`).
    #[serde(default)]
    pub times: Vec<f64>,
    /// Estimate the grid error from a run with `nv` doubled and `dt` halved.
    #[serde(default = "yes")]
    pub refine: bool,
    #[serde(default = "CompareSection::z_max")]
    pub z_max: f64,
}

impl CompareSection {
    fn z_max() -> f64 {
        3.0
    }
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            times: Vec::new(),
            refine: true,
            z_max: Self::z_max(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default = "yes")]
    pub conservation: bool,
    #[serde(default = "AuditSection::drift")]
    pub momentum_tol: f64,
    #[serde(default = "AuditSection::drift")]
    pub energy_tol: f64,
    #[serde(default = "yes")]
    pub entropy: bool,
    #[serde(default = "AuditSection::entropy_tol")]
    pub entropy_tol_step: f64,
    /// `[t0, t1]` over which `−ΔH` is compared with `∫D`.
    #[serde(default)]
    pub rate_window: Option<[f64; 2]>,
    #[serde(default = "AuditSection::rate_tol")]
    pub rate_tol: f64,
    #[serde(default = "yes")]
    pub bounds: bool,
    #[serde(default = "yes")]
    pub lp: bool,
    #[serde(default = "AuditSection::lp_slack")]
    pub lp_slack: f64,
    #[serde(default = "yes")]
    pub third_moment: bool,
    #[serde(default = "yes")]
    pub density_temperature: bool,
}

impl AuditSection {
    fn drift() -> f64 {
        1e-3
    }
    fn entropy_tol() -> f64 {
        1e-8
    }
    fn rate_tol() -> f64 {
        0.1
    }
    fn lp_slack() -> f64 {
        0.01
    }
}

impl Default for AuditSection {
    fn default() -> Self {
        AuditSection {
            conservation: true,
            momentum_tol: Self::drift(),
            energy_tol: Self::drift(),
            entropy: true,
            entropy_tol_step: Self::entropy_tol(),
            rate_window: None,
            rate_tol: Self::rate_tol(),
            bounds: true,
            lp: true,
            lp_slack: Self::lp_slack(),
            third_moment: true,
            density_temperature: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub t_end: f64,
    /// Defaults to `0.5·dx/vmax`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Regularization parameters; absent for the raw equation.
    #[serde(default)]
    pub reg: Option<RegConfig>,
    #[serde(default)]
    pub initial: Initial,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Output directory, overridden by `--out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub particles: ParticleSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub audit: AuditSection,
}

impl RunConfig {
    /// Parses and validates; `base` resolves relative snapshot paths.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<RunConfig> {
        let mut cfg: RunConfig = serde_json::from_str(text)?;
        if let (Initial::File { path }, Some(base)) = (&mut cfg.initial, base) {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::parse(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.initial.validate()?;
        if let Some(r) = self.reg {
            RegParams::new(r.eps, r.delta).map_err(|e| Error::validation("reg", e.to_string()))?;
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::validation(
                "t_end",
                format!("must be positive, got {}", self.t_end),
            ));
        }
        if self.record_every == 0 {
            return Err(Error::validation("record_every", "must be at least 1"));
        }
        if self.particles.n_p == 0 {
            return Err(Error::validation("particles.n_p", "must be positive"));
        }
        for (field, list) in [("sweep.eps", &self.sweep.eps), ("sweep.delta", &self.sweep.delta)] {
            if list.is_empty() {
                return Err(Error::validation(field, "must not be empty"));
            }
        }
        for &t in self.compare.times.iter().chain(&self.snapshot_times) {
            if !(t >= 0.0 && t <= self.t_end) {
                return Err(Error::validation("times", format!("{t} outside [0, t_end]")));
            }
        }
        if let Some([t0, t1]) = self.audit.rate_window {
            if !(0.0 <= t0 && t0 < t1) {
                return Err(Error::validation("audit.rate_window", "need 0 <= t0 < t1"));
            }
        }
        self.solver_config()?
            .validate()
            .map_err(|e| Error::validation("solver", e.to_string()))?;
        Ok(())
    }

    pub fn grid(&self) -> Result<PhaseGrid> {
        let g = &self.grid;
        PhaseGrid::new(g.dim, g.nx, g.nv, g.vmax, g.period).map_err(|e| Error::validation("grid", e.to_string()))
    }

    pub fn reg_params(&self) -> Result<Option<RegParams>> {
        self.reg
            .map(|r| RegParams::new(r.eps, r.delta).map_err(|e| Error::validation("reg", e.to_string())))
            .transpose()
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let grid = self.grid()?;
        let mut c = SolverConfig::new(grid, self.reg_params()?, self.t_end);
        if let Some(dt) = self.dt {
            c.dt = dt;
        }
        c.record_every = self.record_every;
        c.snapshot_times = self.snapshot_times.clone();
        c.picard = PicardConfig {
            n_max: self.picard.n_max,
            tol: self.picard.tol,
            q: self.picard.q.unwrap_or(PicardConfig::for_dim(grid.dim()).q),
            store_stride: self.picard.store_stride,
        };
        Ok(c)
    }

    /// The fully resolved form written next to the outputs: defaults made
    /// explicit, `seed` set to the effective seed.
    pub fn resolved(&self, seed: Option<u64>) -> Result<RunConfig> {
        let mut c = self.clone();
        let grid = self.grid()?;
        c.dt = Some(self.dt.unwrap_or_else(|| default_dt(&grid)));
        c.picard.q = Some(self.picard.q.unwrap_or(PicardConfig::for_dim(grid.dim()).q));
        if let Some(s) = seed {
            c.seed = s;
        }
        if c.sweep.eps_for_delta.is_none() {
            c.sweep.eps_for_delta = c.sweep.eps.last().copied();
        }
        if c.compare.times.is_empty() {
            c.compare.times = vec![c.t_end];
        }
        if let Initial::File { path } = &mut c.initial {
            if let Ok(abs) = std::fs::canonicalize(&*path) {
                *path = abs;
            }
        }
        c.out = None;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}
