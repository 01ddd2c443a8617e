//! Velocity moments, the local Maxwellian, entropy, entropy dissipation and
//! weighted norms.

use alloc::vec::Vec;

use crate::error::{Result, VfpError};
use crate::grid::{norm_sq, DistField, PhaseGrid, Point, SpatialField, VectorField, MAX_DIM};
use crate::math::{exp, ln, pairwise_sum, pow, sqrt, unit_ball_volume, PI};
use crate::par;

/// Relative density floor: cells with `ρ` below `RHO_FLOOR_REL · mass / volume`
/// are treated as vacuum.
pub const RHO_FLOOR_REL: f64 = 1e-12;

/// Integrands with `f` below this contribute nothing to entropy and
/// dissipation (`0·log 0 = 0`).
pub const F_FLOOR: f64 = 1e-300;

/// Observable spatial fields of a distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSet {
    /// `ρ = ∫ f dv`
    pub rho: SpatialField,
    /// `ρu = ∫ v f dv`
    pub mom: VectorField,
    /// `∫ |v|² f dv = NρT + ρ|u|²`
    pub en2: SpatialField,
    pub u: VectorField,
    pub temp: SpatialField,
    /// Density threshold under which the vacuum convention applied.
    pub rho_floor: f64,
}

impl MomentSet {
    /// Builds the derived `u` and `T` from raw moments, applying the vacuum
    /// convention below `rho_floor`.
    pub fn from_raw(rho: SpatialField, mom: VectorField, en2: SpatialField, rho_floor: f64) -> Result<MomentSet> {
        let grid = *rho.grid();
        grid.check_same(mom.grid())?;
        grid.check_same(en2.grid())?;
        let dim = grid.dim() as f64;
        let n = grid.n_space();
        let mut u = Vec::with_capacity(n);
        let mut temp = Vec::with_capacity(n);
        for i in 0..n {
            let r = rho.values()[i];
            if r > rho_floor {
                let m = mom.values()[i];
                u.push([m[0] / r, m[1] / r]);
                let thermal = en2.values()[i] - norm_sq(&m) / r;
                temp.push((thermal / (dim * r)).max(0.0));
            } else {
                u.push([0.0; MAX_DIM]);
                temp.push(0.0);
            }
        }
        Ok(MomentSet {
            rho,
            mom,
            en2,
            u: VectorField::from_vec(grid, u),
            temp: SpatialField::from_vec(grid, temp),
            rho_floor,
        })
    }

    pub fn grid(&self) -> &PhaseGrid {
        self.rho.grid()
    }

    /// `NρT = en2 − |ρu|²/ρ` per cell (zero in vacuum).
    pub fn thermal_energy(&self) -> SpatialField {
        let grid = *self.grid();
        let dim = grid.dim() as f64;
        let values = (0..grid.n_space())
            .map(|i| dim * self.rho.values()[i] * self.temp.values()[i])
            .collect();
        SpatialField::from_vec(grid, values)
    }

    /// `∫ ρ dx`
    pub fn mass(&self) -> f64 {
        self.rho.integral()
    }

    /// `∫ ρu dx`
    pub fn momentum(&self) -> Point {
        let g = self.grid();
        let vals = self.mom.values();
        let mut out = [0.0; MAX_DIM];
        for (k, o) in out.iter_mut().enumerate().take(g.dim()) {
            *o = pairwise_sum(vals.len(), |i| vals[i][k]) * g.space_cell_volume();
        }
        out
    }

    /// `∫ en2 dx = ∫∫ |v|² f`
    pub fn energy(&self) -> f64 {
        self.en2.integral()
    }
}

/// `ρ, ρu, ∫|v|²f` by the midpoint rule, then `u, T` with the vacuum
/// convention.
pub fn compute_moments(field: &DistField) -> MomentSet {
    let grid = *field.grid();
    let nvel = grid.n_vel();
    let dvn = grid.vel_cell_volume();
    let vels = grid.velocities();
    let raw: Vec<[f64; 4]> = par::map_range(grid.n_space(), |i| {
        let row = field.cell(i);
        let r = pairwise_sum(nvel, |j| row[j]);
        let m0 = pairwise_sum(nvel, |j| vels[j][0] * row[j]);
        let m1 = pairwise_sum(nvel, |j| vels[j][1] * row[j]);
        let e = pairwise_sum(nvel, |j| norm_sq(&vels[j]) * row[j]);
        [r * dvn, m0 * dvn, m1 * dvn, e * dvn]
    });
    let rho = SpatialField::from_vec(grid, raw.iter().map(|c| c[0]).collect());
    let mom = VectorField::from_vec(grid, raw.iter().map(|c| [c[1], c[2]]).collect());
    let en2 = SpatialField::from_vec(grid, raw.iter().map(|c| c[3]).collect());
    let floor = RHO_FLOOR_REL * rho.integral().max(0.0) / grid.volume();
    MomentSet::from_raw(rho, mom, en2, floor).expect("fields share the grid")
}

/// Maxwellian density `ρ/(2πT)^{N/2} exp(−|v−u|²/2T)` at one velocity.
pub fn maxwellian_value(dim: usize, rho: f64, u: &Point, temp: f64, v: &Point) -> f64 {
    let d = [v[0] - u[0], v[1] - u[1]];
    rho / pow(2.0 * PI * temp, 0.5 * dim as f64) * exp(-norm_sq(&d) / (2.0 * temp))
}

/// The local Maxwellian with the given moments, sampled on the grid nodes.
pub fn local_maxwellian(moments: &MomentSet, grid: &PhaseGrid) -> Result<DistField> {
    grid.check_same(moments.grid())?;
    let nvel = grid.n_vel();
    let vels = grid.velocities();
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.n_space() {
        let r = moments.rho.values()[i];
        let t = moments.temp.values()[i];
        if r <= moments.rho_floor {
            values.extend(core::iter::repeat_n(0.0, nvel));
            continue;
        }
        if t <= 0.0 {
            return Err(VfpError::DegenerateTemperature { cell: i });
        }
        let u = moments.u.values()[i];
        values.extend(vels.iter().map(|v| maxwellian_value(grid.dim(), r, &u, t, v)));
    }
    DistField::new(*grid, values)
}

/// Uniform-in-`x` Maxwellian with constant `(ρ, u, T)`.
pub fn global_maxwellian(grid: &PhaseGrid, rho: f64, u: Point, temp: f64) -> Result<DistField> {
    if !(temp > 0.0) {
        return Err(VfpError::param("temp", "must be positive"));
    }
    DistField::sample(*grid, |_, v| maxwellian_value(grid.dim(), rho, &u, temp, v))
}

/// `H(f) = ∫∫ f log f` with `0·log 0 = 0`.
pub fn entropy(field: &DistField) -> f64 {
    field.sum_map(|f| if f < F_FLOOR { 0.0 } else { f * ln(f) })
}

/// Entropy dissipation
/// `D(f) = ∫∫ |T∇_v f − (u − v) f|² / (T f)` with `u, T` the given moments.
///
/// The flux `T∇_v f + (v − u) f` is evaluated as `T·M·∇_v(f/M)`, with the
/// gradient of `f/M` taken by centred differences (one-sided at the box
/// edges). `M` only enters through ratios of neighbouring nodes, which are
/// exact, so `D` vanishes to round-off on sampled Maxwellians instead of
/// carrying an `O(dv⁴)` floor, and stays finite as `f → 0`.
pub fn entropy_dissipation(field: &DistField, moments: &MomentSet) -> Result<f64> {
    let grid = *field.grid();
    grid.check_same(moments.grid())?;
    let dim = grid.dim();
    let nv = grid.nv();
    let dv = grid.dv();
    let nvel = grid.n_vel();
    let per_cell: Vec<f64> = par::map_range(grid.n_space(), |i| {
        let t = moments.temp.values()[i];
        if moments.rho.values()[i] <= moments.rho_floor || t <= 0.0 {
            return 0.0;
        }
        let u = moments.u.values()[i];
        let row = field.cell(i);
        pairwise_sum(nvel, |j| {
            let f = row[j];
            if f < F_FLOOR {
                return 0.0;
            }
            let idx = grid.vel_index(j);
            let mut flux_sq = 0.0;
            for axis in 0..dim {
                let a = grid.v_node(idx[axis]) - u[axis];
                let neighbour = |step: isize| {
                    let mut n = idx;
                    n[axis] = (idx[axis] as isize + step) as usize;
                    row[grid.vel_cell(n)]
                };
                // M_j / M_{j±1}
                let ratio_up = exp((2.0 * a * dv + dv * dv) / (2.0 * t));
                let ratio_dn = exp((-2.0 * a * dv + dv * dv) / (2.0 * t));
                let grad = if idx[axis] == 0 {
                    (neighbour(1) * ratio_up - f) / dv
                } else if idx[axis] == nv - 1 {
                    (f - neighbour(-1) * ratio_dn) / dv
                } else {
                    (neighbour(1) * ratio_up - neighbour(-1) * ratio_dn) / (2.0 * dv)
                };
                let flux = t * grad;
                flux_sq += flux * flux;
            }
            let term = flux_sq / (t * f);
            if term.is_finite() {
                term
            } else {
                0.0
            }
        })
    });
    Ok(crate::math::sum_slice(&per_cell) * grid.vel_cell_volume() * grid.space_cell_volume())
}

/// Exponent of a weighted `L^p_q` norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

/// `‖f‖_{L^p_q} = (∫∫ (1 + |v|^q) |f|^p)^{1/p}`, or
/// `max (1 + |v|^q)|f|` for `p = ∞`.
pub fn weighted_norm(field: &DistField, p: Exponent, q: f64) -> Result<f64> {
    if !(q.is_finite() && q >= 0.0) {
        return Err(VfpError::param("q", "must be finite and nonnegative"));
    }
    let grid = *field.grid();
    let nvel = grid.n_vel();
    let weights: Vec<f64> = grid
        .velocities()
        .iter()
        .map(|v| 1.0 + pow(sqrt(norm_sq(v)), q))
        .collect();
    let vals = field.values();
    match p {
        Exponent::Infinity => Ok(vals
            .iter()
            .enumerate()
            .fold(0.0, |m, (k, f)| m.max(weights[k % nvel] * f.abs()))),
        Exponent::Finite(p) => {
            if !(p.is_finite() && p >= 1.0) {
                return Err(VfpError::param("p", "must be at least 1"));
            }
            let s = pairwise_sum(vals.len(), |k| weights[k % nvel] * pow(vals[k].abs(), p))
                * grid.vel_cell_volume()
                * grid.space_cell_volume();
            Ok(pow(s, 1.0 / p))
        }
    }
}

/// `∫∫ |v|³ f`
pub fn third_moment(field: &DistField) -> f64 {
    field.integrate(|_, v| {
        let s = sqrt(norm_sq(v));
        s * s * s
    })
}

/// `∫∫ f^p` (no root).
pub fn lp_integral(field: &DistField, p: f64) -> f64 {
    field.sum_map(|f| pow(f.abs(), p))
}

/// Constant `C_N` in `ρ ≤ C_N ‖f‖_∞ T^{N/2}`.
///
/// Splitting `ρ` at radius `R` around `u` gives
/// `ρ ≤ NρT/R² + |B_1| R^N ‖f‖_∞`; choosing `R^{N+2} = ρT/‖f‖_∞` yields
/// `C_N = (N + |B_1|)^{(N+2)/2}`, i.e. `3√3` for `N = 1` and `(2 + π)²` for
/// `N = 2`. The sharp value (attained by an indicator of a ball) is smaller.
pub fn density_temperature_constant(dim: usize) -> f64 {
    pow(dim as f64 + unit_ball_volume(dim), (dim as f64 + 2.0) / 2.0)
}

/// Per-cell ratio `ρ / (C_N ‖f(x,·)‖_∞ T^{N/2})` (0 in vacuum).
pub fn density_temperature_ratio(field: &DistField, moments: &MomentSet) -> SpatialField {
    let grid = *field.grid();
    let c = density_temperature_constant(grid.dim());
    let values = (0..grid.n_space())
        .map(|i| {
            let r = moments.rho.values()[i];
            let fmax = field.cell(i).iter().copied().fold(0.0, f64::max);
            if r <= moments.rho_floor || fmax <= 0.0 {
                return 0.0;
            }
            let t = moments.temp.values()[i];
            let bound = c * fmax * pow(t, 0.5 * grid.dim() as f64);
            if bound > 0.0 {
                r / bound
            } else {
                f64::INFINITY
            }
        })
        .collect();
    SpatialField::from_vec(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use approx::assert_relative_eq;

    fn grid1(nx: usize, nv: usize, vmax: f64) -> PhaseGrid {
        PhaseGrid::new(1, nx, nv, vmax, 1.0).unwrap()
    }

    #[test]
    fn gaussian_moments() {
        let g = grid1(8, 128, 8.0);
        let f = global_maxwellian(&g, 1.0, [0.0, 0.0], 1.0).unwrap();
        let m = compute_moments(&f);
        for i in 0..g.n_space() {
            assert!((m.rho.values()[i] - 1.0).abs() < 1e-8);
            assert!(m.u.values()[i][0].abs() < 1e-8);
            assert!((m.temp.values()[i] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn vacuum_convention() {
        let g = grid1(8, 16, 4.0);
        let m = compute_moments(&DistField::zeros(g));
        assert!(m.rho.values().iter().all(|&v| v == 0.0));
        assert!(m.u.values().iter().all(|v| v[0] == 0.0));
        assert!(m.temp.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shifted_maxwellian_moments() {
        let g = grid1(8, 128, 8.0);
        let f = global_maxwellian(&g, 2.0, [0.5, 0.0], 0.25).unwrap();
        let m = compute_moments(&f);
        for i in 0..g.n_space() {
            assert!((m.rho.values()[i] - 2.0).abs() < 1e-8);
            assert!((m.mom.values()[i][0] - 1.0).abs() < 1e-8);
            assert!((m.temp.values()[i] - 0.25).abs() < 1e-8);
        }
    }

    #[test]
    fn maxwellian_closure_and_vacuum_region() {
        let g = grid1(8, 128, 8.0);
        let base = global_maxwellian(&g, 1.0, [0.3, 0.0], 0.5).unwrap();
        let m = compute_moments(&base);
        let back = compute_moments(&local_maxwellian(&m, &g).unwrap());
        for i in 0..g.n_space() {
            assert!((back.rho.values()[i] - 1.0).abs() < 1e-8);
            assert!((back.u.values()[i][0] - 0.3).abs() < 1e-8);
            assert!((back.temp.values()[i] - 0.5).abs() < 1e-8);
        }
        // vacuum in the left half
        let half = DistField::sample(g, |x, v| {
            if x[0] < 0.5 {
                0.0
            } else {
                maxwellian_value(1, 1.0, &[0.0, 0.0], 1.0, v)
            }
        })
        .unwrap();
        let mh = local_maxwellian(&compute_moments(&half), &g).unwrap();
        assert!(mh.cell(0).iter().all(|&v| v == 0.0));
        assert!(mh.cell(7).iter().any(|&v| v > 0.0));
    }

    #[test]
    fn degenerate_temperature_is_rejected() {
        let g = grid1(4, 16, 4.0);
        // all mass in one velocity cell: T = 0 exactly
        let f = DistField::sample(g, |_, v| if v[0] == g.v_node(8) { 1.0 } else { 0.0 }).unwrap();
        let m = compute_moments(&f);
        let err = local_maxwellian(&m, &g).unwrap_err();
        assert!(err.to_string().contains("degenerate temperature"));
    }

    #[test]
    fn gaussian_entropy() {
        let g = grid1(8, 128, 8.0);
        let f = global_maxwellian(&g, 1.0, [0.0, 0.0], 1.0).unwrap();
        let expected = -(1.0 + ln(2.0 * PI)) / 2.0;
        assert!((entropy(&f) - expected).abs() < 1e-6);
        assert!((expected + 1.418939).abs() < 1e-6);
        assert_eq!(entropy(&DistField::zeros(g)), 0.0);
    }

    #[test]
    fn entropy_scaling_identity() {
        let g = grid1(8, 64, 8.0);
        let f = global_maxwellian(&g, 1.0, [0.2, 0.0], 0.7).unwrap();
        let f2 = f.lincomb(2.0, &f, 0.0).unwrap();
        let lhs = entropy(&f2);
        let rhs = 2.0 * entropy(&f) + 2.0 * ln(2.0) * f.mass();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn dissipation_vanishes_on_maxwellian() {
        let g = grid1(8, 128, 8.0);
        let f = global_maxwellian(&g, 1.0, [0.4, 0.0], 1.3).unwrap();
        let d = entropy_dissipation(&f, &compute_moments(&f)).unwrap();
        assert!(d.abs() < 1e-6, "D = {d}");
        let z = DistField::zeros(g);
        assert_eq!(entropy_dissipation(&z, &compute_moments(&z)).unwrap(), 0.0);
    }

    /// Closed-form oracle: dense quadrature of `(1/(T f)) (T f' + (v − u) f)²`
    /// with exact derivatives of the bimodal mixture.
    fn bimodal_dissipation_oracle() -> f64 {
        let comp = |t: f64, v: f64| exp(-v * v / (2.0 * t)) / sqrt(2.0 * PI * t);
        let f = |v: f64| 0.5 * comp(0.5, v) + 0.5 * comp(2.0, v);
        let df = |v: f64| 0.5 * comp(0.5, v) * (-v / 0.5) + 0.5 * comp(2.0, v) * (-v / 2.0);
        // u = 0, T = (0.5 + 2)/2
        let t = 1.25;
        let n = 200_000;
        let (a, b) = (-12.0, 12.0);
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for k in 0..n {
            let v = a + (k as f64 + 0.5) * h;
            let fv = f(v);
            if fv > 1e-300 {
                let flux = t * df(v) + v * fv;
                s += flux * flux / (t * fv);
            }
        }
        s * h
    }

    #[test]
    fn dissipation_positive_off_equilibrium() {
        let g = grid1(4, 256, 10.0);
        let f = DistField::sample(g, |_, v| {
            0.5 * maxwellian_value(1, 1.0, &[0.0; 2], 0.5, v) + 0.5 * maxwellian_value(1, 1.0, &[0.0; 2], 2.0, v)
        })
        .unwrap();
        let d = entropy_dissipation(&f, &compute_moments(&f)).unwrap();
        let oracle = bimodal_dissipation_oracle();
        assert!(d > 0.0);
        assert_relative_eq!(d, oracle, max_relative = 5e-3);
    }

    #[test]
    fn weighted_norms() {
        let g = grid1(8, 128, 8.0);
        let f = global_maxwellian(&g, 1.0, [0.0; 2], 1.0).unwrap();
        let n1 = weighted_norm(&f, Exponent::Finite(1.0), 0.0).unwrap();
        assert!((n1 - 2.0).abs() < 1e-8);
        let ninf = weighted_norm(&f, Exponent::Infinity, 0.0).unwrap();
        assert!((ninf - 2.0 * f.max_value()).abs() < 1e-15);
        assert!((ninf - 0.79788).abs() < 5e-3);
        let z = DistField::zeros(g);
        assert_eq!(weighted_norm(&z, Exponent::Finite(2.0), 6.0).unwrap(), 0.0);
        assert_eq!(weighted_norm(&z, Exponent::Infinity, 3.0).unwrap(), 0.0);
        assert!(weighted_norm(&f, Exponent::Finite(0.5), 0.0).is_err());
        assert!(weighted_norm(&f, Exponent::Finite(2.0), -1.0).is_err());
    }

    #[test]
    fn third_moments() {
        let g = grid1(8, 1024, 16.0);
        let f = global_maxwellian(&g, 1.0, [0.0; 2], 1.0).unwrap();
        let c = 2.0 * sqrt(2.0 / PI);
        assert!((third_moment(&f) - c).abs() < 1e-6);
        assert!((c - 1.59577).abs() < 1e-5);
        let f4 = global_maxwellian(&g, 1.0, [0.0; 2], 4.0).unwrap();
        assert!((third_moment(&f4) - 8.0 * c).abs() < 1e-5);
        assert!((8.0 * c - 12.766).abs() < 1e-3);
        assert_eq!(third_moment(&DistField::zeros(g)), 0.0);
    }

    #[test]
    fn density_temperature_constant_values() {
        assert_relative_eq!(density_temperature_constant(1), 3.0 * sqrt(3.0), max_relative = 1e-15);
        assert_relative_eq!(
            density_temperature_constant(2),
            (2.0 + PI) * (2.0 + PI),
            max_relative = 1e-15
        );
    }
}
