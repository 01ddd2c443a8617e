//! The Fokker–Planck operator `∇_v·(T∇_v f + (v − u) f)` and the two
//! sub-steps of the splitting: an implicit Chang–Cooper collision solve per
//! spatial cell and a semi-Lagrangian free-transport shift per velocity row.

use alloc::vec::Vec;

use crate::error::Result;
use crate::grid::{DistField, PhaseGrid, SpatialField, VectorField};
use crate::math::{bernoulli, floor, round};
use crate::moments::MomentSet;
use crate::par;
use crate::regularize::RegFields;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientSource {
    /// `(u_f, T_f)`
    Raw,
    /// `(u^ε, T^{ε,δ})`
    Regularized,
}

/// Drift centre and diffusion coefficient per spatial cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    pub u: VectorField,
    pub temp: SpatialField,
    pub source: CoefficientSource,
}

impl CoefficientSet {
    pub fn raw(moments: &MomentSet) -> Self {
        CoefficientSet {
            u: moments.u.clone(),
            temp: moments.temp.clone(),
            source: CoefficientSource::Raw,
        }
    }

    pub fn regularized(fields: &RegFields) -> Self {
        CoefficientSet {
            u: fields.u_eps.clone(),
            // round-off can leave T^{ε,δ} a hair below zero only for Φ < −δ²,
            // which nonnegative data cannot produce; clamp anyway so the
            // tridiagonal stays an M-matrix
            temp: SpatialField::from_vec(
                *fields.t_eps_delta.grid(),
                fields.t_eps_delta.values().iter().map(|t| t.max(0.0)).collect(),
            ),
            source: CoefficientSource::Regularized,
        }
    }

    /// Same `(u, T)` in every cell.
    pub fn uniform(grid: &PhaseGrid, u: [f64; 2], temp: f64) -> Self {
        CoefficientSet {
            u: VectorField::constant(*grid, u),
            temp: SpatialField::constant(*grid, temp),
            source: CoefficientSource::Raw,
        }
    }
}

/// Centred-difference evaluation of `∇_v·(T∇_v f + (v − u) f)` in flux form
/// with zero flux through the velocity box edges.
///
/// The result is signed; it has the layout of a [`DistField`].
pub fn apply_operator(field: &DistField, coeffs: &CoefficientSet) -> Result<Vec<f64>> {
    let grid = *field.grid();
    grid.check_same(coeffs.temp.grid())?;
    let nvel = grid.n_vel();
    let nv = grid.nv();
    let dv = grid.dv();
    let mut out = alloc::vec![0.0; grid.len()];
    par::for_each_chunk(&mut out, nvel, |i, orow| {
        let row = field.cell(i);
        let t = coeffs.temp.values()[i];
        let u = coeffs.u.values()[i];
        for axis in 0..grid.dim() {
            for_each_line(&grid, axis, |cells| {
                let flux = |j: usize| {
                    let vf = grid.v_node(j) + 0.5 * dv - u[axis];
                    let (a, b) = (row[cells[j]], row[cells[j + 1]]);
                    t * (b - a) / dv + vf * 0.5 * (a + b)
                };
                let mut left = 0.0;
                for j in 0..nv {
                    let right = if j + 1 < nv { flux(j) } else { 0.0 };
                    orow[cells[j]] += (right - left) / dv;
                    left = right;
                }
            });
        }
    });
    Ok(out)
}

/// Collision contribution to `d/dt ∫∫ |v|³ f`:
/// `3∫∫ |v| v·(u − v) f + 3(N + 1)∫∫ |v| T f`.
///
/// Free transport does not change velocity moments on the torus, so this is
/// the full rate for the coefficients in `coeffs`.
pub fn third_moment_rate(field: &DistField, coeffs: &CoefficientSet) -> Result<f64> {
    let grid = *field.grid();
    grid.check_same(coeffs.temp.grid())?;
    let dim = grid.dim() as f64;
    let vels = grid.velocities();
    let nvel = grid.n_vel();
    let per_cell: Vec<f64> = par::map_range(grid.n_space(), |i| {
        let row = field.cell(i);
        let t = coeffs.temp.values()[i];
        let u = coeffs.u.values()[i];
        crate::math::pairwise_sum(nvel, |j| {
            let v = &vels[j];
            let s = crate::math::sqrt(crate::grid::norm_sq(v));
            let drift = v[0] * (u[0] - v[0]) + v[1] * (u[1] - v[1]);
            3.0 * row[j] * s * (drift + (dim + 1.0) * t)
        })
    });
    Ok(crate::math::sum_slice(&per_cell) * grid.vel_cell_volume() * grid.space_cell_volume())
}

/// Calls `f` with the storage indices of every velocity line along `axis`.
fn for_each_line<F: FnMut(&[usize])>(grid: &PhaseGrid, axis: usize, mut f: F) {
    let nv = grid.nv();
    let mut cells = alloc::vec![0usize; nv];
    if grid.dim() == 1 {
        for (j, c) in cells.iter_mut().enumerate() {
            *c = j;
        }
        f(&cells);
        return;
    }
    for other in 0..nv {
        for (j, c) in cells.iter_mut().enumerate() {
            let idx = if axis == 0 { [j, other] } else { [other, j] };
            *c = grid.vel_cell(idx);
        }
        f(&cells);
    }
}

/// Chang–Cooper face coefficients: `G_{j+½} = A_j f_{j+1} − B_j f_j`.
///
/// With `w = (v_{j+½} − u)·dv/T`, `A = (T/dv)·B(−w)` and `B = (T/dv)·B(w)`
/// where `B(z) = z/(e^z − 1)`. The flux vanishes exactly when
/// `f_{j+1}/f_j = exp(−(v_{j+½} − u)·dv/T)`, i.e. on the Maxwellian
/// `exp(−(v − u)²/2T)` sampled at the nodes. `T = 0` degenerates to upwind.
fn face_coefficients(grid: &PhaseGrid, u: f64, t: f64, upper: &mut [f64], lower: &mut [f64]) {
    let dv = grid.dv();
    for j in 0..grid.nv() - 1 {
        let c = grid.v_node(j) + 0.5 * dv - u;
        if t > 0.0 {
            let w = c * dv / t;
            upper[j] = t / dv * bernoulli(-w);
            lower[j] = t / dv * bernoulli(w);
        } else {
            upper[j] = c.max(0.0);
            lower[j] = (-c).max(0.0);
        }
    }
}

/// Backward-Euler step of `∂_t f = ∇_v·(T∇_v f + (v − u) f)` in every
/// spatial cell, with Chang–Cooper fluxes and zero flux at the box edges.
///
/// The system matrix is an M-matrix with unit column sums, so the update is
/// nonnegative and conserves every cell's mass. In two dimensions the
/// velocity axes are treated one after the other; both sweeps fix the
/// sampled Maxwellian.
pub fn collision_step(field: &DistField, coeffs: &CoefficientSet, dt: f64) -> Result<DistField> {
    if !(dt > 0.0) {
        return Err(crate::error::VfpError::param("dt", "must be positive"));
    }
    let grid = *field.grid();
    grid.check_same(coeffs.temp.grid())?;
    let nvel = grid.n_vel();
    let nv = grid.nv();
    let lambda = dt / grid.dv();
    let mut values = field.values().to_vec();
    par::for_each_chunk(&mut values, nvel, |i, row| {
        let t = coeffs.temp.values()[i];
        let u = coeffs.u.values()[i];
        let mut upper = alloc::vec![0.0; nv - 1];
        let mut lower = alloc::vec![0.0; nv - 1];
        let mut work = TridiagWork::new(nv);
        for axis in 0..grid.dim() {
            face_coefficients(&grid, u[axis], t, &mut upper, &mut lower);
            for_each_line(&grid, axis, |cells| {
                for j in 0..nv {
                    let (a_prev, b_prev) = if j > 0 {
                        (upper[j - 1], lower[j - 1])
                    } else {
                        (0.0, 0.0)
                    };
                    let (a_here, b_here) = if j + 1 < nv { (upper[j], lower[j]) } else { (0.0, 0.0) };
                    work.sub[j] = -lambda * b_prev;
                    work.diag[j] = 1.0 + lambda * (b_here + a_prev);
                    work.sup[j] = -lambda * a_here;
                    work.rhs[j] = row[cells[j]];
                }
                work.solve();
                for j in 0..nv {
                    row[cells[j]] = work.rhs[j];
                }
            });
        }
    });
    DistField::from_raw(grid, values)
}

struct TridiagWork {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    rhs: Vec<f64>,
}

impl TridiagWork {
    fn new(n: usize) -> Self {
        TridiagWork {
            sub: alloc::vec![0.0; n],
            diag: alloc::vec![0.0; n],
            sup: alloc::vec![0.0; n],
            rhs: alloc::vec![0.0; n],
        }
    }

    /// Thomas algorithm, in place on `rhs`. No pivoting: the matrix is
    /// column diagonally dominant with positive diagonal.
    fn solve(&mut self) {
        let n = self.rhs.len();
        for j in 1..n {
            let m = self.sub[j] / self.diag[j - 1];
            self.diag[j] -= m * self.sup[j - 1];
            self.rhs[j] -= m * self.rhs[j - 1];
        }
        debug_assert!(self.diag.iter().all(|&d| d > 0.0), "singular collision system");
        self.rhs[n - 1] /= self.diag[n - 1];
        for j in (0..n - 1).rev() {
            self.rhs[j] = (self.rhs[j] - self.sup[j] * self.rhs[j + 1]) / self.diag[j];
        }
    }
}

/// Semi-Lagrangian free transport `f(x, v) ← f(x − v·dt, v)` on the torus.
///
/// Each velocity row is shifted with 4-point cubic Lagrange interpolation.
/// Shifts that land on the lattice are exact copies. If interpolation
/// undershoots below zero, negative values are cut and the positive part is
/// rescaled to the row's original mass.
pub fn transport_step(field: &DistField, dt: f64) -> Result<DistField> {
    let grid = *field.grid();
    let nvel = grid.n_vel();
    let nsp = grid.n_space();
    let rows: Vec<Vec<f64>> = par::map_range(nvel, |j| {
        let mut row: Vec<f64> = (0..nsp).map(|i| field.values()[i * nvel + j]).collect();
        let v = grid.velocity(j);
        let original = crate::math::sum_slice(&row);
        for axis in 0..grid.dim() {
            let shift = v[axis] * dt / grid.dx();
            row = shift_axis(&grid, &row, axis, shift);
        }
        if row.iter().any(|&x| x < 0.0) {
            for x in row.iter_mut() {
                *x = x.max(0.0);
            }
            let kept = crate::math::sum_slice(&row);
            if kept > 0.0 {
                let scale = original / kept;
                for x in row.iter_mut() {
                    *x *= scale;
                }
            }
        }
        row
    });
    let mut values = alloc::vec![0.0; grid.len()];
    for (j, row) in rows.iter().enumerate() {
        for (i, &x) in row.iter().enumerate() {
            values[i * nvel + j] = x;
        }
    }
    DistField::from_raw(grid, values)
}

/// Interpolates `row` at `x_i − shift·dx` along one spatial axis.
fn shift_axis(grid: &PhaseGrid, row: &[f64], axis: usize, shift: f64) -> Vec<f64> {
    let n = grid.nx() as isize;
    let mut out = alloc::vec![0.0; row.len()];
    let nearest = round(shift);
    let lattice = (shift - nearest).abs() < 1e-12;
    let m = floor(shift);
    let beta = 1.0 - (shift - m);
    let (wm1, w1, w2) = (
        -beta * (beta - 1.0) * (beta - 2.0) / 6.0,
        -(beta + 1.0) * beta * (beta - 2.0) / 2.0,
        (beta + 1.0) * beta * (beta - 1.0) / 6.0,
    );
    let m = m as isize;
    let nearest = nearest as isize;
    for (cell, o) in out.iter_mut().enumerate() {
        let idx = grid.space_index(cell);
        let at = |k: isize| {
            let mut src = idx;
            src[axis] = (idx[axis] as isize + k).rem_euclid(n) as usize;
            row[grid.space_cell(src)]
        };
        if lattice {
            *o = at(-nearest);
        } else {
            let base = -m - 1;
            let f0 = at(base);
            *o = f0 + wm1 * (at(base - 1) - f0) + w1 * (at(base + 1) - f0) + w2 * (at(base + 2) - f0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{exp, sin, sqrt, PI};
    use crate::moments::{compute_moments, global_maxwellian, maxwellian_value};
    use approx::assert_relative_eq;

    fn grid(nx: usize, nv: usize) -> PhaseGrid {
        PhaseGrid::new(1, nx, nv, 8.0, 1.0).unwrap()
    }

    fn bimodal(g: PhaseGrid) -> DistField {
        DistField::sample(g, |_, v| {
            0.5 * maxwellian_value(1, 1.0, &[0.0; 2], 0.5, v) + 0.5 * maxwellian_value(1, 1.0, &[0.0; 2], 2.0, v)
        })
        .unwrap()
    }

    fn row_l1(v: &[f64]) -> f64 {
        v.iter().map(|x| x.abs()).sum()
    }

    #[test]
    fn operator_residual_on_maxwellian_is_second_order() {
        let res = |nv| {
            let g = grid(4, nv);
            let f = global_maxwellian(&g, 1.0, [0.3, 0.0], 0.8).unwrap();
            let c = CoefficientSet::raw(&compute_moments(&f));
            let r = apply_operator(&f, &c).unwrap();
            let scale = row_l1(f.values());
            row_l1(&r) / scale
        };
        let (r128, r256) = (res(128), res(256));
        assert!(r128 < 1e-2, "{r128}");
        assert!(r128 / r256 >= 4.0 - 0.1, "{}", r128 / r256);
    }

    #[test]
    fn operator_integrates_to_zero_per_cell() {
        let g = grid(4, 64);
        let f = bimodal(g);
        let c = CoefficientSet::uniform(&g, [0.3, 0.0], 1.7);
        let r = apply_operator(&f, &c).unwrap();
        for i in 0..4 {
            let s: f64 = r[i * 64..(i + 1) * 64].iter().sum();
            assert!(s.abs() * g.dv() < 1e-13);
        }
    }

    #[test]
    fn operator_matches_closed_form() {
        // ∇·(2∇f + v f) = (v² − 1) f for the standard Gaussian
        let err = |nv: usize| {
            let g = grid(4, nv);
            let f = global_maxwellian(&g, 1.0, [0.0; 2], 1.0).unwrap();
            let c = CoefficientSet::uniform(&g, [0.0; 2], 2.0);
            let r = apply_operator(&f, &c).unwrap();
            (0..nv)
                .map(|j| {
                    let v = g.v_node(j);
                    let exact = (v * v - 1.0) * exp(-v * v / 2.0) / sqrt(2.0 * PI);
                    (r[j] - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e256, e512) = (err(256), err(512));
        assert!(e512 < 1e-3, "{e512}");
        let ratio = e256 / e512;
        assert!((3.8..4.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn collision_fixes_sampled_maxwellian() {
        let g = grid(4, 128);
        let f = global_maxwellian(&g, 1.3, [0.4, 0.0], 0.7).unwrap();
        let c = CoefficientSet::uniform(&g, [0.4, 0.0], 0.7);
        for dt in [1e-3, 0.1, 10.0] {
            let out = collision_step(&f, &c, dt).unwrap();
            for (a, b) in out.values().iter().zip(f.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn collision_conserves_cell_mass_and_positivity() {
        let g = grid(8, 64);
        let f = DistField::sample(g, |x, v| {
            (1.0 + 0.5 * sin(2.0 * PI * x[0])) * exp(-crate::math::ipow(v[0] - 1.0, 2))
                + if v[0].abs() < 0.5 { 3.0 } else { 0.0 }
        })
        .unwrap();
        let c = CoefficientSet::uniform(&g, [-0.5, 0.0], 0.3);
        let out = collision_step(&f, &c, 0.05).unwrap();
        assert!(out.values().iter().all(|&v| v >= 0.0));
        for i in 0..8 {
            let a: f64 = f.cell(i).iter().sum();
            let b: f64 = out.cell(i).iter().sum();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        // degenerate diffusion
        let c0 = CoefficientSet::uniform(&g, [0.0, 0.0], 0.0);
        let out = collision_step(&f, &c0, 0.05).unwrap();
        assert!(out.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn linear_relaxation_to_maxwellian() {
        let g = grid(4, 128);
        let f0 = bimodal(g);
        let c = CoefficientSet::uniform(&g, [0.0; 2], 1.0);
        let dt = 0.01;
        let mut f = f0.clone();
        for _ in 0..1000 {
            f = collision_step(&f, &c, dt).unwrap();
        }
        let target = global_maxwellian(&g, 1.0, [0.0; 2], 1.0).unwrap();
        let rho = f0.cell(0).iter().sum::<f64>() * g.dv();
        let target = target
            .lincomb(rho / target.cell(0).iter().sum::<f64>() / g.dv(), &target, 0.0)
            .unwrap();
        assert!(f.l1_distance(&target).unwrap() < 1e-6);
    }

    #[test]
    fn transport_uniform_field_is_unchanged() {
        let g = grid(16, 32);
        let f = global_maxwellian(&g, 1.0, [0.0; 2], 1.0).unwrap();
        let out = transport_step(&f, 0.0123).unwrap();
        assert_eq!(out.values(), f.values());
    }

    #[test]
    fn transport_lattice_shift_is_exact() {
        let g = grid(16, 32);
        let f = DistField::sample(g, |x, v| {
            crate::math::ipow(sin(2.0 * PI * x[0]), 2) * exp(-v[0] * v[0] / 2.0)
        })
        .unwrap();
        let j = 20;
        let v = g.v_node(j);
        let dt = 3.0 * g.dx() / v;
        let out = transport_step(&f, dt).unwrap();
        for i in 0..16 {
            let src = (i + 16 - 3) % 16;
            assert_eq!(out.values()[i * 32 + j], f.values()[src * 32 + j]);
        }
    }

    #[test]
    fn transport_conserves_row_mass() {
        let g = grid(32, 32);
        let f = DistField::sample(g, |x, v| {
            let bump = if (x[0] - 0.5).abs() < 0.1 { 1.0 } else { 0.0 };
            bump * exp(-v[0] * v[0] / 2.0)
        })
        .unwrap();
        let out = transport_step(&f, 0.0137).unwrap();
        assert!(out.values().iter().all(|&v| v >= 0.0));
        for j in 0..32 {
            let a: f64 = (0..32).map(|i| f.values()[i * 32 + j]).sum();
            let b: f64 = (0..32).map(|i| out.values()[i * 32 + j]).sum();
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }

    #[test]
    fn transport_is_high_order() {
        let err = |nx: usize| {
            let g = PhaseGrid::new(1, nx, 8, 1.0, 1.0).unwrap();
            let prof = |x: f64| 2.0 + sin(2.0 * PI * x);
            let f = DistField::sample(g, |x, _| prof(x[0])).unwrap();
            let dt = 0.1234;
            let out = transport_step(&f, dt).unwrap();
            let mut e: f64 = 0.0;
            for i in 0..nx {
                for j in 0..8 {
                    let exact = prof(g.x_node(i) - g.v_node(j) * dt);
                    e = e.max((out.values()[i * 8 + j] - exact).abs());
                }
            }
            e
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn two_dimensional_collision_fixes_maxwellian() {
        let g = PhaseGrid::new(2, 4, 32, 6.0, 1.0).unwrap();
        let f = global_maxwellian(&g, 1.0, [0.2, -0.3], 0.9).unwrap();
        let c = CoefficientSet::uniform(&g, [0.2, -0.3], 0.9);
        let out = collision_step(&f, &c, 0.1).unwrap();
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let tr = transport_step(&f, 0.05).unwrap();
        assert_eq!(tr.values(), f.values());
    }
}
