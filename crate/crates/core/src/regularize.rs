//! Periodic mollifier and the (ε, δ)-regularized velocity and temperature.
//!
//! ```text
//! u^ε     = (ρu∗θ_ε) / (ρ∗θ_ε + ε(1 + |ρu∗θ_ε|²))
//! Φ^{ε,δ} = (NρT + ρ|u|²)∗θ_ε − |ρu∗θ_ε|² / (ρ∗θ_ε + δ(1 + |ρu∗θ_ε|²))
//! T^{ε,δ} = (Φ^{ε,δ} + δ²) / (Nρ∗θ_ε + δ(1 + Φ^{ε,δ}))
//! ```
//!
//! These are bounded by construction: `|u^ε| ≤ 1/ε`, `0 ≤ T^{ε,δ} ≤ 1/δ`,
//! and `Φ^{ε,δ} ≥ N(ρT)∗θ_ε ≥ 0` for nonnegative data.

use alloc::vec::Vec;

use crate::error::{Result, VfpError};
use crate::grid::{norm_sq, DistField, PhaseGrid, SpatialField, VectorField, MAX_DIM};
use crate::math::{exp, floor, sqrt};
use crate::moments::{compute_moments, MomentSet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegParams {
    eps: f64,
    delta: f64,
}

impl RegParams {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(VfpError::param("eps", "must lie in (0, 1)"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(VfpError::param("delta", "must lie in (0, 1)"));
        }
        Ok(RegParams { eps, delta })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Unnormalised bump `exp(−1/(1 − r²))` on `r < 1`.
pub fn bump(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        exp(-1.0 / (1.0 - r * r))
    }
}

/// Discrete periodic mollifier `θ_ε` on the spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MollifierKernel {
    eps: f64,
    dim: usize,
    nx: usize,
    offsets: Vec<[isize; MAX_DIM]>,
    /// Density values `θ_ε(k·dx)`, renormalised so `Σ w·dx^N = 1`.
    weights: Vec<f64>,
    /// `weights · dx^N`
    cell_weights: Vec<f64>,
}

/// Builds `θ_ε` with support `|x| < ε` (radial in two dimensions).
///
/// Kernels narrower than a cell are rejected; widths below two cells are
/// accepted with a warning.
pub fn build_mollifier(grid: &PhaseGrid, eps: f64) -> Result<MollifierKernel> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(VfpError::param("eps", "must be positive"));
    }
    let dx = grid.dx();
    if eps < dx {
        return Err(VfpError::UnderResolvedKernel { eps, dx });
    }
    if eps < 2.0 * dx {
        log::warn!("mollifier width {eps} spans fewer than two cells (dx = {dx})");
    }
    let reach = floor(eps / dx) as isize;
    let dim = grid.dim();
    let mut offsets = Vec::new();
    let mut raw = Vec::new();
    let second = if dim == 2 { reach } else { 0 };
    for k0 in -reach..=reach {
        for k1 in -second..=second {
            let r = sqrt(((k0 * k0 + k1 * k1) as f64) * dx * dx) / eps;
            let w = bump(r);
            if w > 0.0 {
                offsets.push([k0, k1]);
                raw.push(w);
            }
        }
    }
    let dxn = grid.space_cell_volume();
    let total = crate::math::sum_slice(&raw) * dxn;
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let cell_weights = weights.iter().map(|w| w * dxn).collect();
    Ok(MollifierKernel {
        eps,
        dim,
        nx: grid.nx(),
        offsets,
        weights,
        cell_weights,
    })
}

impl MollifierKernel {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn offsets(&self) -> &[[isize; MAX_DIM]] {
        &self.offsets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `θ_ε(k)·dx^N`; sums to one.
    pub fn cell_weights(&self) -> &[f64] {
        &self.cell_weights
    }

    fn check(&self, grid: &PhaseGrid) -> Result<()> {
        if grid.dim() != self.dim || grid.nx() != self.nx {
            Err(VfpError::GridMismatch)
        } else {
            Ok(())
        }
    }

    /// Spatial cell at periodic offset `cell − k`.
    pub(crate) fn shifted(&self, grid: &PhaseGrid, cell: usize, k: &[isize; MAX_DIM]) -> usize {
        let n = self.nx as isize;
        let idx = grid.space_index(cell);
        let mut out = [0usize; MAX_DIM];
        for a in 0..self.dim {
            out[a] = (idx[a] as isize - k[a]).rem_euclid(n) as usize;
        }
        grid.space_cell(out)
    }

    /// `out_i = g_i + Σ_k w_k (g_{i−k} − g_i)`. Equal to `Σ_k w_k g_{i−k}`
    /// since the weights sum to one, but constants pass through bit-exactly.
    fn convolve(&self, grid: &PhaseGrid, values: &[f64]) -> Vec<f64> {
        (0..values.len())
            .map(|i| {
                let gi = values[i];
                let mut acc = 0.0;
                for (k, w) in self.offsets.iter().zip(&self.cell_weights) {
                    acc += w * (values[self.shifted(grid, i, k)] - gi);
                }
                gi + acc
            })
            .collect()
    }

    /// `Σ_k w_k² s_{i−k}`: variance propagation through the convolution.
    pub(crate) fn convolve_squared_weights(&self, grid: &PhaseGrid, values: &[f64]) -> Vec<f64> {
        (0..values.len())
            .map(|i| {
                self.offsets
                    .iter()
                    .zip(&self.cell_weights)
                    .map(|(k, w)| w * w * values[self.shifted(grid, i, k)])
                    .sum()
            })
            .collect()
    }
}

/// Periodic discrete convolution `g ∗ θ_ε`.
pub fn mollify(kernel: &MollifierKernel, field: &SpatialField) -> Result<SpatialField> {
    kernel.check(field.grid())?;
    let grid = *field.grid();
    Ok(SpatialField::from_vec(grid, kernel.convolve(&grid, field.values())))
}

pub fn mollify_vector(kernel: &MollifierKernel, field: &VectorField) -> Result<VectorField> {
    kernel.check(field.grid())?;
    let grid = *field.grid();
    let mut out = alloc::vec![[0.0; MAX_DIM]; grid.n_space()];
    for k in 0..grid.dim() {
        let comp: Vec<f64> = field.values().iter().map(|p| p[k]).collect();
        for (o, c) in out.iter_mut().zip(kernel.convolve(&grid, &comp)) {
            o[k] = c;
        }
    }
    Ok(VectorField::from_vec(grid, out))
}

/// `x ↦ x / (a + b x)`, increasing on `x ≥ 0` for `a, b > 0`.
pub fn increasing_ratio(x: f64, a: f64, b: f64) -> f64 {
    x / (a + b * x)
}

/// Regularized coefficient fields for one state.
#[derive(Clone, Debug, PartialEq)]
pub struct RegFields {
    pub params: RegParams,
    pub u_eps: VectorField,
    pub phi: SpatialField,
    pub t_eps_delta: SpatialField,
    pub rho_moll: SpatialField,
    pub mom_moll: VectorField,
    pub en2_moll: SpatialField,
    /// `N(ρT)∗θ_ε`, the lower bound for `Φ`.
    pub thermal_moll: SpatialField,
}

impl RegFields {
    pub fn compute(moments: &MomentSet, kernel: &MollifierKernel, params: RegParams) -> Result<RegFields> {
        let rho_moll = mollify(kernel, &moments.rho)?;
        let mom_moll = mollify_vector(kernel, &moments.mom)?;
        let en2_moll = mollify(kernel, &moments.en2)?;
        let thermal_moll = mollify(kernel, &moments.thermal_energy())?;
        let u_eps = velocity_from(&rho_moll, &mom_moll, params.eps);
        let (phi, t_eps_delta) = temperature_from(&rho_moll, &mom_moll, &en2_moll, params.delta);
        Ok(RegFields {
            params,
            u_eps,
            phi,
            t_eps_delta,
            rho_moll,
            mom_moll,
            en2_moll,
            thermal_moll,
        })
    }

    pub fn from_field(field: &DistField, kernel: &MollifierKernel, params: RegParams) -> Result<RegFields> {
        Self::compute(&compute_moments(field), kernel, params)
    }
}

fn velocity_from(rho_m: &SpatialField, mom_m: &VectorField, eps: f64) -> VectorField {
    let grid = *rho_m.grid();
    let values = rho_m
        .values()
        .iter()
        .zip(mom_m.values())
        .map(|(&r, m)| {
            let den = r + eps * (1.0 + norm_sq(m));
            [m[0] / den, m[1] / den]
        })
        .collect();
    VectorField::from_vec(grid, values)
}

fn temperature_from(
    rho_m: &SpatialField,
    mom_m: &VectorField,
    en2_m: &SpatialField,
    delta: f64,
) -> (SpatialField, SpatialField) {
    let grid = *rho_m.grid();
    let dim = grid.dim() as f64;
    let mut phi = Vec::with_capacity(grid.n_space());
    let mut temp = Vec::with_capacity(grid.n_space());
    for i in 0..grid.n_space() {
        let r = rho_m.values()[i];
        let m2 = norm_sq(&mom_m.values()[i]);
        let p = en2_m.values()[i] - m2 / (r + delta * (1.0 + m2));
        // (Φ + δ²) / (Nρ + δ(1 + Φ)) written as x / (a + δ x) with x = Φ + δ²
        let a = dim * r + delta * (1.0 - delta * delta);
        phi.push(p);
        temp.push(increasing_ratio(p + delta * delta, a, delta));
    }
    (SpatialField::from_vec(grid, phi), SpatialField::from_vec(grid, temp))
}

/// `u^ε` from a moment set.
pub fn regularized_velocity(moments: &MomentSet, kernel: &MollifierKernel, eps: f64) -> Result<VectorField> {
    let rho_m = mollify(kernel, &moments.rho)?;
    let mom_m = mollify_vector(kernel, &moments.mom)?;
    Ok(velocity_from(&rho_m, &mom_m, eps))
}

/// `(Φ^{ε,δ}, T^{ε,δ})` from a moment set; `ε` is carried by the kernel.
pub fn regularized_temperature(
    moments: &MomentSet,
    kernel: &MollifierKernel,
    delta: f64,
) -> Result<(SpatialField, SpatialField)> {
    let rho_m = mollify(kernel, &moments.rho)?;
    let mom_m = mollify_vector(kernel, &moments.mom)?;
    let en2_m = mollify(kernel, &moments.en2)?;
    Ok(temperature_from(&rho_m, &mom_m, &en2_m, delta))
}

/// 1-D bump weights `w_k`, `|k|·h < eps`, summing to one.
fn bump_weights_1d(h: f64, eps: f64) -> Vec<(isize, f64)> {
    let reach = floor(eps / h) as isize;
    let mut out: Vec<(isize, f64)> = (-reach..=reach)
        .map(|k| (k, bump(k as f64 * h / eps)))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    if out.is_empty() {
        out.push((0, 1.0));
    }
    let total: f64 = out.iter().map(|(_, w)| w).sum();
    for (_, w) in out.iter_mut() {
        *w /= total;
    }
    out
}

/// `f_{0,ε} = η_ε ∗ f_0 + ε e^{−|v|²}`.
///
/// `η_ε` is a product of 1-D bumps of width `ε` in every phase-space
/// coordinate. Along `x` the convolution is periodic; along `v` each source
/// cell spreads its mass over the in-box part of its stencil, renormalised,
/// so the mass of `f_0` is preserved exactly. Widths below one cell reduce to
/// the identity along that axis.
pub fn regularize_initial(f0: &DistField, eps: f64) -> Result<DistField> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(VfpError::param("eps", "must lie in (0, 1)"));
    }
    let grid = *f0.grid();
    let dim = grid.dim();
    let mut values = f0.values().to_vec();
    let wx = bump_weights_1d(grid.dx(), eps);
    let wv = bump_weights_1d(grid.dv(), eps);
    for axis in 0..dim {
        values = smooth_space_axis(&grid, &values, axis, &wx);
    }
    for axis in 0..dim {
        values = smooth_velocity_axis(&grid, &values, axis, &wv);
    }
    let nvel = grid.n_vel();
    let floor: Vec<f64> = grid.velocities().iter().map(|v| eps * exp(-norm_sq(v))).collect();
    for (k, val) in values.iter_mut().enumerate() {
        *val += floor[k % nvel];
    }
    DistField::new(grid, values)
}

fn smooth_space_axis(grid: &PhaseGrid, values: &[f64], axis: usize, w: &[(isize, f64)]) -> Vec<f64> {
    let nvel = grid.n_vel();
    let n = grid.nx() as isize;
    let mut out = alloc::vec![0.0; values.len()];
    for i in 0..grid.n_space() {
        let idx = grid.space_index(i);
        for (k, wk) in w {
            let mut src = idx;
            src[axis] = (idx[axis] as isize - k).rem_euclid(n) as usize;
            let s = grid.space_cell(src);
            let (o, r) = (&mut out[i * nvel..(i + 1) * nvel], &values[s * nvel..(s + 1) * nvel]);
            for (a, b) in o.iter_mut().zip(r) {
                *a += wk * b;
            }
        }
    }
    out
}

fn smooth_velocity_axis(grid: &PhaseGrid, values: &[f64], axis: usize, w: &[(isize, f64)]) -> Vec<f64> {
    let nvel = grid.n_vel();
    let nv = grid.nv() as isize;
    let mut out = alloc::vec![0.0; values.len()];
    for i in 0..grid.n_space() {
        let row = &values[i * nvel..(i + 1) * nvel];
        let orow = &mut out[i * nvel..(i + 1) * nvel];
        for (j, &fj) in row.iter().enumerate() {
            if fj == 0.0 {
                continue;
            }
            let idx = grid.vel_index(j);
            let inside = |k: isize| {
                let t = idx[axis] as isize + k;
                t >= 0 && t < nv
            };
            let norm: f64 = w.iter().filter(|(k, _)| inside(*k)).map(|(_, wk)| wk).sum();
            for (k, wk) in w.iter().filter(|(k, _)| inside(*k)) {
                let mut dst = idx;
                dst[axis] = (idx[axis] as isize + k) as usize;
                orow[grid.vel_cell(dst)] += fj * wk / norm;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::global_maxwellian;
    use alloc::string::ToString;
    use approx::assert_relative_eq;

    fn grid(nx: usize) -> PhaseGrid {
        PhaseGrid::new(1, nx, 64, 8.0, 1.0).unwrap()
    }

    fn uniform_moments(g: PhaseGrid, rho: f64, mom: f64, temp: f64) -> MomentSet {
        let en2 = g.dim() as f64 * rho * temp + mom * mom / rho;
        MomentSet::from_raw(
            SpatialField::constant(g, rho),
            VectorField::constant(g, [mom, 0.0]),
            SpatialField::constant(g, en2),
            1e-12,
        )
        .unwrap()
    }

    #[test]
    fn kernel_unit_mass() {
        let g = grid(64);
        let k = build_mollifier(&g, 0.1).unwrap();
        let s: f64 = k.weights().iter().sum::<f64>() * g.dx();
        assert!((s - 1.0).abs() < 1e-14);
        assert!(k.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn kernel_under_resolved() {
        let g = grid(16);
        let err = build_mollifier(&g, 0.05).unwrap_err();
        assert!(err.to_string().contains("kernel under-resolved"));
    }

    #[test]
    fn mollify_constant_exact() {
        let g = grid(64);
        let k = build_mollifier(&g, 0.1).unwrap();
        let c = SpatialField::constant(g, 0.7316);
        let out = mollify(&k, &c).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.7316));
    }

    #[test]
    fn mollify_preserves_integral_and_reproduces_kernel() {
        let g = grid(64);
        let k = build_mollifier(&g, 0.1).unwrap();
        let vals: Vec<f64> = (0..64)
            .map(|i| 1.0 + 0.5 * crate::math::sin(2.0 * crate::math::PI * g.x_node(i)) + (i % 7) as f64)
            .collect();
        let f = SpatialField::new(g, vals).unwrap();
        let out = mollify(&k, &f).unwrap();
        assert_relative_eq!(out.integral(), f.integral(), max_relative = 1e-12);

        let mut delta = alloc::vec![0.0; 64];
        delta[10] = 1.0 / g.dx();
        let out = mollify(&k, &SpatialField::new(g, delta).unwrap()).unwrap();
        for (off, w) in k.offsets().iter().zip(k.weights()) {
            let cell = (10 + off[0]).rem_euclid(64) as usize;
            assert!((out.values()[cell] - w).abs() < 1e-12 * w.max(1.0));
        }
    }

    #[test]
    fn velocity_examples() {
        let g = grid(32);
        let k = build_mollifier(&g, 0.1).unwrap();
        let u0 = regularized_velocity(&uniform_moments(g, 1.0, 0.0, 1.0), &k, 0.1).unwrap();
        assert!(u0.values().iter().all(|p| p[0] == 0.0));
        let u1 = regularized_velocity(&uniform_moments(g, 1.0, 1.0, 1.0), &k, 0.1).unwrap();
        for p in u1.values() {
            assert_relative_eq!(p[0], 1.0 / 1.2, max_relative = 1e-14);
        }
    }

    #[test]
    fn temperature_examples() {
        let g = grid(32);
        let k = build_mollifier(&g, 0.1).unwrap();
        let (phi, t) = regularized_temperature(&uniform_moments(g, 1.0, 0.0, 1.0), &k, 0.1).unwrap();
        for i in 0..32 {
            assert_relative_eq!(phi.values()[i], 1.0, max_relative = 1e-14);
            assert_relative_eq!(t.values()[i], 1.01 / 1.2, max_relative = 1e-14);
        }
        let vac = crate::moments::compute_moments(&DistField::zeros(g));
        let (phi, t) = regularized_temperature(&vac, &k, 0.1).unwrap();
        for i in 0..32 {
            assert_eq!(phi.values()[i], 0.0);
            assert_relative_eq!(t.values()[i], 0.1, max_relative = 1e-15);
        }
    }

    #[test]
    fn ratio_helper_is_increasing() {
        let (a, b) = (0.7, 0.1);
        let mut last = increasing_ratio(0.0, a, b);
        for k in 1..1000 {
            let x = k as f64 * 0.05;
            let y = increasing_ratio(x, a, b);
            assert!(y > last);
            last = y;
        }
        assert!(last < 1.0 / b);
    }

    #[test]
    fn regularized_initial_of_zero() {
        let g = grid(32);
        let f = regularize_initial(&DistField::zeros(g), 0.5).unwrap();
        for (k, &val) in f.values().iter().enumerate() {
            let v = g.v_node(k % 64);
            assert_relative_eq!(val, 0.5 * exp(-v * v), max_relative = 1e-15);
        }
    }

    #[test]
    fn regularized_initial_mass_and_floor() {
        let g = PhaseGrid::new(1, 32, 128, 8.0, 1.0).unwrap();
        let f0 = DistField::sample(g, |x, v| {
            (1.0 + 0.5 * crate::math::sin(2.0 * crate::math::PI * x[0]))
                * crate::moments::maxwellian_value(1, 1.0, &[0.0; 2], 1.0, v)
        })
        .unwrap();
        let eps = 0.1;
        let f = regularize_initial(&f0, eps).unwrap();
        let expected = f0.mass() + eps * sqrt(crate::math::PI);
        assert!((f.mass() - expected).abs() < 1e-12);
        let vmax = g.vmax();
        assert!(f.min_value() >= eps * exp(-vmax * vmax));
        assert!(f.min_value() > 0.0);
    }

    #[test]
    fn mollified_maxwellian_fields_bounded() {
        let g = grid(32);
        let f = global_maxwellian(&g, 1.0, [0.5, 0.0], 1.0).unwrap();
        let k = build_mollifier(&g, 0.2).unwrap();
        let p = RegParams::new(0.2, 0.3).unwrap();
        let r = RegFields::from_field(&f, &k, p).unwrap();
        assert!(r.u_eps.max_norm() * 0.2 <= 1.0);
        assert!(r.t_eps_delta.max() * 0.3 <= 1.0);
        assert!(r.t_eps_delta.min() > 0.0);
    }

    #[test]
    fn reg_params_validate() {
        assert!(RegParams::new(0.0, 0.5).is_err());
        assert!(RegParams::new(0.5, 1.0).is_err());
        assert!(RegParams::new(0.1, 0.1).is_ok());
    }
}
