//! McKean–Vlasov particle oracle for the regularized equation.
//!
//! Particles move by `dX = V dt`, `dV = (u^ε(X) − V) dt + √(2T^{ε,δ}(X)) dW`
//! with coefficients built from the particles' own moment estimates. Every
//! random number is drawn from a ChaCha stream keyed by
//! `(seed, particle, step)`, so results do not depend on the order (or the
//! number of threads) in which particles are advanced.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Result, VfpError};
use crate::grid::{norm_sq, DistField, PhaseGrid, Point, SpatialField, VectorField, MAX_DIM};
use crate::kinetics::{third_moment_rate, CoefficientSet};
use crate::math::{cos, floor, ln, pow, sin, sqrt, PI};
use crate::moments::{compute_moments, entropy, entropy_dissipation, lp_integral, MomentSet, RHO_FLOOR_REL};
use crate::par;
use crate::regularize::{build_mollifier, regularize_initial, MollifierKernel, RegFields};
use crate::solver::{BoundSummary, Sample, SolverConfig};

/// 32-bit words reserved per particle and step (eight `u64` draws).
const WORDS_PER_STEP: u128 = 16;

#[derive(Clone, Debug)]
pub struct Ensemble {
    dim: usize,
    period: f64,
    x: Vec<Point>,
    v: Vec<Point>,
    /// Mass carried by each particle.
    weight: f64,
    seed: u64,
    base: ChaCha8Rng,
    /// Number of steps taken; step `k` draws from word block `k + 1`.
    steps: u64,
}

impl PartialEq for Ensemble {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.period == other.period
            && self.x == other.x
            && self.v == other.v
            && self.weight == other.weight
            && self.seed == other.seed
            && self.steps == other.steps
    }
}

impl Ensemble {
    /// Builds an ensemble from explicit particles, each of weight `weight`.
    pub fn from_particles(grid: &PhaseGrid, x: Vec<Point>, v: Vec<Point>, weight: f64, seed: u64) -> Result<Self> {
        if x.is_empty() || x.len() != v.len() {
            return Err(VfpError::param(
                "particles",
                "need equally many (nonzero) positions and velocities",
            ));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(VfpError::param("weight", "must be positive"));
        }
        let period = grid.period();
        let x = x.into_iter().map(|p| wrap(p, period)).collect();
        Ok(Ensemble {
            dim: grid.dim(),
            period,
            x,
            v,
            weight,
            seed,
            base: ChaCha8Rng::seed_from_u64(seed),
            steps: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.x
    }

    pub fn velocities(&self) -> &[Point] {
        &self.v
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn total_mass(&self) -> f64 {
        self.weight * self.len() as f64
    }

    /// `Σ w |v|^k`
    pub fn velocity_moment(&self, k: f64) -> f64 {
        let s = crate::math::pairwise_sum(self.len(), |p| pow(sqrt(norm_sq(&self.v[p])), k));
        s * self.weight
    }

    /// `Σ w v`
    pub fn momentum(&self) -> Point {
        let mut out = [0.0; MAX_DIM];
        for (k, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = crate::math::pairwise_sum(self.len(), |p| self.v[p][k]) * self.weight;
        }
        out
    }

    fn stream(&self, particle: usize, block: u64) -> Draws {
        let mut rng = self.base.clone();
        rng.set_stream(particle as u64);
        rng.set_word_pos(block as u128 * WORDS_PER_STEP);
        Draws { rng }
    }

    /// Bins the particles into `grid` cells as a phase-space density.
    /// Velocities outside the box are counted in the edge cells.
    pub fn histogram(&self, grid: &PhaseGrid) -> Result<DistField> {
        self.check_grid(grid)?;
        let nvel = grid.n_vel();
        let scale = self.weight / (grid.space_cell_volume() * grid.vel_cell_volume());
        let mut values = alloc::vec![0.0; grid.len()];
        for p in 0..self.len() {
            let i = space_bin(grid, &self.x[p]);
            let mut idx = [0usize; MAX_DIM];
            for (k, slot) in idx.iter_mut().enumerate().take(self.dim) {
                let s = floor((self.v[p][k] + grid.vmax()) / grid.dv());
                *slot = s.max(0.0).min(grid.nv() as f64 - 1.0) as usize;
            }
            values[i * nvel + grid.vel_cell(idx)] += scale;
        }
        DistField::from_raw(*grid, values)
    }

    fn check_grid(&self, grid: &PhaseGrid) -> Result<()> {
        if grid.dim() != self.dim || grid.period() != self.period {
            Err(VfpError::GridMismatch)
        } else {
            Ok(())
        }
    }
}

/// Uniform and normal variates from one particle's stream.
struct Draws {
    rng: ChaCha8Rng,
}

impl Draws {
    /// Uniform on `[0, 1)`.
    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Two independent standard normals (Box–Muller).
    fn normal_pair(&mut self) -> (f64, f64) {
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        let r = sqrt(-2.0 * ln(u1));
        (r * cos(2.0 * PI * u2), r * sin(2.0 * PI * u2))
    }
}

fn wrap(mut p: Point, period: f64) -> Point {
    for c in p.iter_mut() {
        *c -= period * floor(*c / period);
        if *c >= period {
            *c = 0.0;
        }
    }
    p
}

fn space_bin(grid: &PhaseGrid, x: &Point) -> usize {
    let mut idx = [0usize; MAX_DIM];
    for (k, slot) in idx.iter_mut().enumerate().take(grid.dim()) {
        let s = floor(x[k] / grid.dx()) as usize;
        *slot = s.min(grid.nx() - 1);
    }
    grid.space_cell(idx)
}

/// Samples `n_p` particles from `f0 / mass`: a cell is drawn from the
/// discrete law of the cell masses, then the particle is placed uniformly
/// inside that phase-space cell.
pub fn init_ensemble(f0: &DistField, n_p: usize, seed: u64) -> Result<Ensemble> {
    if n_p == 0 {
        return Err(VfpError::param("n_p", "must be positive"));
    }
    f0.validate()?;
    let grid = *f0.grid();
    let mut cdf = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    for &f in f0.values() {
        acc += f;
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(VfpError::ZeroMass);
    }
    let mass = f0.mass();
    let nvel = grid.n_vel();
    let proto = Ensemble::from_particles(
        &grid,
        alloc::vec![[0.0; MAX_DIM]],
        alloc::vec![[0.0; MAX_DIM]],
        1.0,
        seed,
    )?;
    let placed: Vec<(Point, Point)> = par::map_range(n_p, |p| {
        let mut d = proto.stream(p, 0);
        let target = d.uniform() * acc;
        let cell = cdf.partition_point(|&c| c <= target).min(grid.len() - 1);
        let (xp, vp) = (grid.space_point(cell / nvel), grid.velocity(cell % nvel));
        let mut x = [0.0; MAX_DIM];
        let mut v = [0.0; MAX_DIM];
        for k in 0..grid.dim() {
            x[k] = xp[k] + (d.uniform() - 0.5) * grid.dx();
            v[k] = vp[k] + (d.uniform() - 0.5) * grid.dv();
        }
        (x, v)
    });
    let (x, v) = placed.into_iter().unzip();
    Ensemble::from_particles(&grid, x, v, mass / n_p as f64, seed)
}

/// Periodic linear interpolation of a cell-centred field at `x`.
fn interpolate<T, F>(grid: &PhaseGrid, x: &Point, at: F) -> T
where
    T: Default + core::ops::Add<Output = T> + core::ops::Mul<f64, Output = T>,
    F: Fn(usize) -> T,
{
    let n = grid.nx() as isize;
    let mut base = [0isize; MAX_DIM];
    let mut frac = [0.0; MAX_DIM];
    for k in 0..grid.dim() {
        let s = x[k] / grid.dx() - 0.5;
        let f = floor(s);
        base[k] = f as isize;
        frac[k] = s - f;
    }
    let corners = 1usize << grid.dim();
    let mut out = T::default();
    for c in 0..corners {
        let mut idx = [0usize; MAX_DIM];
        let mut w = 1.0;
        for k in 0..grid.dim() {
            let up = (c >> k) & 1 == 1;
            idx[k] = (base[k] + isize::from(up)).rem_euclid(n) as usize;
            w *= if up { frac[k] } else { 1.0 - frac[k] };
        }
        out = out + at(grid.space_cell(idx)) * w;
    }
    out
}

#[derive(Clone, Copy, Default)]
struct Coeff {
    u: Point,
    t: f64,
}

impl core::ops::Add for Coeff {
    type Output = Coeff;
    fn add(self, o: Coeff) -> Coeff {
        Coeff {
            u: [self.u[0] + o.u[0], self.u[1] + o.u[1]],
            t: self.t + o.t,
        }
    }
}

impl core::ops::Mul<f64> for Coeff {
    type Output = Coeff;
    fn mul(self, s: f64) -> Coeff {
        Coeff {
            u: [self.u[0] * s, self.u[1] * s],
            t: self.t * s,
        }
    }
}

/// One Euler–Maruyama step with coefficients linearly interpolated at the
/// old positions: `X ← X + V dt`, `V ← V + (u(X) − V) dt + √(2T(X) dt) ξ`.
pub fn em_step(ens: &Ensemble, coeffs: &CoefficientSet, dt: f64) -> Result<Ensemble> {
    if !(dt > 0.0) {
        return Err(VfpError::param("dt", "must be positive"));
    }
    let grid = *coeffs.temp.grid();
    ens.check_grid(&grid)?;
    let block = ens.steps + 1;
    let moved: Vec<(Point, Point)> = par::map_range(ens.len(), |p| {
        let (x, v) = (ens.x[p], ens.v[p]);
        let c = interpolate(&grid, &x, |i| Coeff {
            u: coeffs.u.values()[i],
            t: coeffs.temp.values()[i],
        });
        let amp = sqrt(2.0 * c.t.max(0.0) * dt);
        let mut d = ens.stream(p, block);
        let (z0, z1) = d.normal_pair();
        let z = [z0, z1];
        let mut xn = [0.0; MAX_DIM];
        let mut vn = [0.0; MAX_DIM];
        for k in 0..ens.dim {
            xn[k] = x[k] + v[k] * dt;
            vn[k] = v[k] + (c.u[k] - v[k]) * dt + amp * z[k];
        }
        (wrap(xn, ens.period), vn)
    });
    let (x, v) = moved.into_iter().unzip();
    Ok(Ensemble {
        x,
        v,
        steps: block,
        ..ens.clone()
    })
}

/// Histogram moment estimates with their standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentEstimate {
    pub moments: MomentSet,
    pub se_rho: SpatialField,
    pub se_mom: VectorField,
    pub se_en2: SpatialField,
}

/// `ρ, ρu, ∫|v|²f` per spatial cell from the particles, optionally
/// mollified by `kernel`, with multinomial standard errors.
pub fn estimate_moments(ens: &Ensemble, grid: &PhaseGrid, kernel: Option<&MollifierKernel>) -> Result<MomentEstimate> {
    ens.check_grid(grid)?;
    let nsp = grid.n_space();
    let c = ens.weight / grid.space_cell_volume();
    // sums and sums of squares of per-particle contributions, cell by cell
    let mut rho = alloc::vec![0.0; nsp];
    let mut mom = alloc::vec![[0.0; MAX_DIM]; nsp];
    let mut en2 = alloc::vec![0.0; nsp];
    let mut count = alloc::vec![0.0; nsp];
    let mut mom_sq = alloc::vec![[0.0; MAX_DIM]; nsp];
    let mut en2_sq = alloc::vec![0.0; nsp];
    for p in 0..ens.len() {
        let i = space_bin(grid, &ens.x[p]);
        let v = ens.v[p];
        let e = norm_sq(&v);
        count[i] += 1.0;
        rho[i] += c;
        en2[i] += c * e;
        en2_sq[i] += c * c * e * e;
        for k in 0..grid.dim() {
            mom[i][k] += c * v[k];
            mom_sq[i][k] += c * c * v[k] * v[k];
        }
    }
    let n = ens.len() as f64;
    let var = |sq: f64, s: f64| (sq - s * s / n).max(0.0);
    let var_rho: Vec<f64> = (0..nsp).map(|i| var(c * c * count[i], rho[i])).collect();
    let var_en2: Vec<f64> = (0..nsp).map(|i| var(en2_sq[i], en2[i])).collect();
    let var_mom: Vec<Vec<f64>> = (0..MAX_DIM)
        .map(|k| (0..nsp).map(|i| var(mom_sq[i][k], mom[i][k])).collect())
        .collect();
    let (rho, mom, en2, var_rho, var_mom, var_en2) = match kernel {
        None => (rho, mom, en2, var_rho, var_mom, var_en2),
        Some(kern) => {
            let r = crate::regularize::mollify(kern, &SpatialField::from_vec(*grid, rho))?;
            let m = crate::regularize::mollify_vector(kern, &VectorField::from_vec(*grid, mom))?;
            let e = crate::regularize::mollify(kern, &SpatialField::from_vec(*grid, en2))?;
            (
                r.values().to_vec(),
                m.values().to_vec(),
                e.values().to_vec(),
                kern.convolve_squared_weights(grid, &var_rho),
                var_mom
                    .iter()
                    .map(|vm| kern.convolve_squared_weights(grid, vm))
                    .collect(),
                kern.convolve_squared_weights(grid, &var_en2),
            )
        }
    };
    let sd = |v: &[f64]| SpatialField::from_vec(*grid, v.iter().map(|x| sqrt(*x)).collect());
    let se_mom = VectorField::from_vec(
        *grid,
        (0..nsp)
            .map(|i| {
                let mut p = [0.0; MAX_DIM];
                for k in 0..grid.dim() {
                    p[k] = sqrt(var_mom[k][i]);
                }
                p
            })
            .collect(),
    );
    let floor_rho = RHO_FLOOR_REL * ens.total_mass() / grid.volume();
    let moments = MomentSet::from_raw(
        SpatialField::from_vec(*grid, rho),
        VectorField::from_vec(*grid, mom),
        SpatialField::from_vec(*grid, en2),
        floor_rho,
    )?;
    Ok(MomentEstimate {
        moments,
        se_rho: sd(&var_rho),
        se_mom,
        se_en2: sd(&var_en2),
    })
}

/// Output of [`run_particles`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleRun {
    pub samples: Vec<Sample>,
    /// Ensembles at the configured snapshot times.
    pub snapshots: Vec<(f64, Ensemble)>,
    /// `(time, Σ w |v|⁴)` at every recorded sample.
    pub fourth_moment: Vec<(f64, f64)>,
    pub ensemble: Ensemble,
}

/// Scalar diagnostics of an ensemble in the grid [`Sample`] layout. Mass,
/// momentum, energy and third moment are exact particle sums; the entropy,
/// dissipation and `L^p` integrals use the phase-space histogram.
pub fn particle_sample(time: f64, ens: &Ensemble, grid: &PhaseGrid, fields: &RegFields) -> Result<Sample> {
    let hist = ens.histogram(grid)?;
    let m = compute_moments(&hist);
    let coeffs = CoefficientSet::regularized(fields);
    Ok(Sample {
        time,
        mass: ens.total_mass(),
        momentum: ens.momentum(),
        energy: ens.velocity_moment(2.0),
        entropy: entropy(&hist),
        dissipation: entropy_dissipation(&hist, &m)?,
        third_moment: ens.velocity_moment(3.0),
        third_moment_rate: third_moment_rate(&hist, &coeffs)?,
        l2: lp_integral(&hist, 2.0),
        l4: lp_integral(&hist, 4.0),
        max_f: hist.max_value(),
        min_f: hist.min_value(),
        bounds: Some(BoundSummary::from_fields(fields, &hist)),
    })
}

/// Self-consistent particle simulation of the regularized equation from
/// `f_{0,ε}`: estimate moments → regularized coefficients → EM step. Uses
/// the time step, cadence and snapshot times of `cfg`.
pub fn run_particles(cfg: &SolverConfig, f0: &DistField, n_p: usize, seed: u64) -> Result<ParticleRun> {
    cfg.validate()?;
    let params = cfg
        .reg
        .ok_or_else(|| VfpError::param("reg", "particle runs need regularized coefficients"))?;
    let grid = cfg.grid;
    grid.check_same(f0.grid())?;
    let kernel = build_mollifier(&grid, params.eps())?;
    let f0eps = regularize_initial(f0, params.eps())?;
    let mut ens = init_ensemble(&f0eps, n_p, seed)?;
    let n = cfg.n_steps();
    let dt = cfg.effective_dt();
    let mut snaps = cfg.snapshot_times.clone();
    snaps.sort_by(f64::total_cmp);
    let mut next_snap = 0;
    let mut out = ParticleRun {
        samples: Vec::new(),
        snapshots: Vec::new(),
        fourth_moment: Vec::new(),
        ensemble: ens.clone(),
    };
    for k in 0..=n {
        let time = k as f64 * dt;
        let est = estimate_moments(&ens, &grid, None)?;
        let fields = RegFields::compute(&est.moments, &kernel, params)?;
        if k % cfg.record_every == 0 || k == n {
            out.samples.push(particle_sample(time, &ens, &grid, &fields)?);
            out.fourth_moment.push((time, ens.velocity_moment(4.0)));
        }
        while next_snap < snaps.len() && (snaps[next_snap] <= time + 1e-9 || k == n) {
            out.snapshots.push((time, ens.clone()));
            next_snap += 1;
        }
        if k < n {
            ens = em_step(&ens, &CoefficientSet::regularized(&fields), dt)?;
        }
    }
    out.ensemble = ens;
    Ok(out)
}
