//! Discrete phase space: a periodic torus in `x` times a truncated velocity
//! box, with cell-centred nodes and midpoint quadrature.
//!
//! Storage is row-major with the spatial cell outermost, so the velocity
//! slice of spatial cell `i` is `values[i * n_vel .. (i + 1) * n_vel]`. In two
//! dimensions both the spatial and the velocity multi-index are flattened
//! axis-0-major.

use alloc::vec::Vec;

use crate::error::{Result, VfpError};
use crate::math::pairwise_sum;

/// Values whose magnitude is below this are treated as round-off zeros when
/// sampling.
pub const SAMPLE_ROUNDOFF: f64 = 1e-300;

/// Maximum supported dimension.
pub const MAX_DIM: usize = 2;

/// A point in `R^N`, `N ≤ 2`. Components past the grid dimension are zero.
pub type Point = [f64; MAX_DIM];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseGrid {
    dim: usize,
    nx: usize,
    nv: usize,
    vmax: f64,
    period: f64,
    dx: f64,
    dv: f64,
}

impl PhaseGrid {
    pub fn new(dim: usize, nx: usize, nv: usize, vmax: f64, period: f64) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(VfpError::InvalidGrid("dim must be 1 or 2"));
        }
        if nx < 4 {
            return Err(VfpError::InvalidGrid("nx must be at least 4"));
        }
        if nv < 8 {
            return Err(VfpError::InvalidGrid("nv must be at least 8"));
        }
        if !nv.is_multiple_of(2) {
            return Err(VfpError::InvalidGrid("nv must be even"));
        }
        if !(vmax.is_finite() && vmax > 0.0) {
            return Err(VfpError::InvalidGrid("vmax must be positive"));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(VfpError::InvalidGrid("period must be positive"));
        }
        Ok(PhaseGrid {
            dim,
            nx,
            nv,
            vmax,
            period,
            dx: period / nx as f64,
            dv: 2.0 * vmax / nv as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nv(&self) -> usize {
        self.nv
    }
    pub fn vmax(&self) -> f64 {
        self.vmax
    }
    pub fn period(&self) -> f64 {
        self.period
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dv(&self) -> f64 {
        self.dv
    }

    /// Number of spatial cells, `nx^N`.
    pub fn n_space(&self) -> usize {
        self.nx.pow(self.dim as u32)
    }

    /// Number of velocity cells, `nv^N`.
    pub fn n_vel(&self) -> usize {
        self.nv.pow(self.dim as u32)
    }

    pub fn len(&self) -> usize {
        self.n_space() * self.n_vel()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `dx^N`
    pub fn space_cell_volume(&self) -> f64 {
        crate::math::ipow(self.dx, self.dim)
    }

    /// `dv^N`
    pub fn vel_cell_volume(&self) -> f64 {
        crate::math::ipow(self.dv, self.dim)
    }

    /// `period^N`
    pub fn volume(&self) -> f64 {
        crate::math::ipow(self.period, self.dim)
    }

    /// Centre of spatial node `i` along one axis.
    pub fn x_node(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    /// Centre of velocity node `j` along one axis.
    pub fn v_node(&self, j: usize) -> f64 {
        -self.vmax + (j as f64 + 0.5) * self.dv
    }

    pub fn space_index(&self, cell: usize) -> [usize; MAX_DIM] {
        split_index(cell, self.nx, self.dim)
    }

    pub fn vel_index(&self, cell: usize) -> [usize; MAX_DIM] {
        split_index(cell, self.nv, self.dim)
    }

    pub fn space_cell(&self, index: [usize; MAX_DIM]) -> usize {
        join_index(index, self.nx, self.dim)
    }

    pub fn vel_cell(&self, index: [usize; MAX_DIM]) -> usize {
        join_index(index, self.nv, self.dim)
    }

    pub fn space_point(&self, cell: usize) -> Point {
        let idx = self.space_index(cell);
        let mut p = [0.0; MAX_DIM];
        for k in 0..self.dim {
            p[k] = self.x_node(idx[k]);
        }
        p
    }

    pub fn velocity(&self, cell: usize) -> Point {
        let idx = self.vel_index(cell);
        let mut p = [0.0; MAX_DIM];
        for k in 0..self.dim {
            p[k] = self.v_node(idx[k]);
        }
        p
    }

    /// All velocity nodes in storage order.
    pub fn velocities(&self) -> Vec<Point> {
        (0..self.n_vel()).map(|j| self.velocity(j)).collect()
    }

    pub(crate) fn check_same(&self, other: &PhaseGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(VfpError::GridMismatch)
        }
    }
}

fn split_index(cell: usize, n: usize, dim: usize) -> [usize; MAX_DIM] {
    match dim {
        1 => [cell, 0],
        _ => [cell / n, cell % n],
    }
}

fn join_index(index: [usize; MAX_DIM], n: usize, dim: usize) -> usize {
    match dim {
        1 => index[0],
        _ => index[0] * n + index[1],
    }
}

pub(crate) fn norm_sq(p: &Point) -> f64 {
    p[0] * p[0] + p[1] * p[1]
}

/// Nonnegative distribution function sampled on a [`PhaseGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct DistField {
    grid: PhaseGrid,
    values: Vec<f64>,
}

impl DistField {
    /// Wraps `values`, rejecting negative or non-finite entries.
    pub fn new(grid: PhaseGrid, values: Vec<f64>) -> Result<Self> {
        let field = Self::from_raw(grid, values)?;
        field.validate()?;
        Ok(field)
    }

    /// Wraps `values` without the sign check. Meant for loading data that is
    /// about to be audited; solver entry points validate on their own.
    pub fn from_raw(grid: PhaseGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(VfpError::GridMismatch);
        }
        Ok(DistField { grid, values })
    }

    pub fn zeros(grid: PhaseGrid) -> Self {
        DistField {
            grid,
            values: alloc::vec![0.0; grid.len()],
        }
    }

    /// `values[i, j] = fun(x_i, v_j)`.
    pub fn sample<F>(grid: PhaseGrid, fun: F) -> Result<Self>
    where
        F: Fn(&Point, &Point) -> f64,
    {
        let nvel = grid.n_vel();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_space() {
            let x = grid.space_point(i);
            for j in 0..nvel {
                let v = grid.velocity(j);
                let mut val = fun(&x, &v);
                let index = i * nvel + j;
                if !val.is_finite() {
                    return Err(VfpError::NonFinite { index });
                }
                if val < 0.0 {
                    if val > -SAMPLE_ROUNDOFF {
                        val = 0.0;
                    } else {
                        return Err(VfpError::NegativeValue { index, value: val });
                    }
                }
                values.push(val);
            }
        }
        Ok(DistField { grid, values })
    }

    pub fn validate(&self) -> Result<()> {
        for (index, &value) in self.values.iter().enumerate() {
            if !value.is_finite() {
                return Err(VfpError::NonFinite { index });
            }
            if value < 0.0 {
                return Err(VfpError::NegativeValue { index, value });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Velocity slice of spatial cell `i`.
    pub fn cell(&self, i: usize) -> &[f64] {
        let n = self.grid.n_vel();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Midpoint rule `Σ f·w·dx^N·dv^N`, velocity-inner, pairwise in both
    /// directions.
    pub fn integrate<W>(&self, weight: W) -> f64
    where
        W: Fn(&Point, &Point) -> f64,
    {
        let g = &self.grid;
        let nvel = g.n_vel();
        let vels = g.velocities();
        let per_cell = |i: usize| {
            let x = g.space_point(i);
            let row = self.cell(i);
            pairwise_sum(nvel, |j| row[j] * weight(&x, &vels[j]))
        };
        pairwise_sum(g.n_space(), per_cell) * g.vel_cell_volume() * g.space_cell_volume()
    }

    /// `∫∫ f`
    pub fn mass(&self) -> f64 {
        self.sum_map(|f| f)
    }

    /// `Σ φ(f_ij) dx^N dv^N`, pairwise over the flat storage.
    pub fn sum_map<F: Fn(f64) -> f64>(&self, phi: F) -> f64 {
        let v = &self.values;
        pairwise_sum(v.len(), |k| phi(v[k])) * self.grid.vel_cell_volume() * self.grid.space_cell_volume()
    }

    /// `∫∫ |f − g|`
    pub fn l1_distance(&self, other: &DistField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let (a, b) = (&self.values, &other.values);
        Ok(
            pairwise_sum(a.len(), |k| (a[k] - b[k]).abs())
                * self.grid.vel_cell_volume()
                * self.grid.space_cell_volume(),
        )
    }

    /// `a·self + b·other`, without the sign check.
    pub fn lincomb(&self, a: f64, other: &DistField, b: f64) -> Result<DistField> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(DistField {
            grid: self.grid,
            values,
        })
    }
}

/// One real per spatial cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialField {
    grid: PhaseGrid,
    values: Vec<f64>,
}

impl SpatialField {
    pub fn new(grid: PhaseGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_space() {
            return Err(VfpError::GridMismatch);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(VfpError::NonFinite { index });
        }
        Ok(SpatialField { grid, values })
    }

    pub(crate) fn from_vec(grid: PhaseGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_space());
        SpatialField { grid, values }
    }

    pub fn constant(grid: PhaseGrid, c: f64) -> Self {
        SpatialField {
            grid,
            values: alloc::vec![c; grid.n_space()],
        }
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ g dx`
    pub fn integral(&self) -> f64 {
        crate::math::sum_slice(&self.values) * self.grid.space_cell_volume()
    }

    /// `∫ |g − h| dx`
    pub fn l1_distance(&self, other: &SpatialField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let (a, b) = (&self.values, &other.values);
        Ok(pairwise_sum(a.len(), |k| (a[k] - b[k]).abs()) * self.grid.space_cell_volume())
    }

    /// `(∫ |g|^p dx)^{1/p}`
    pub fn lp_norm(&self, p: f64) -> f64 {
        let v = &self.values;
        let s = pairwise_sum(v.len(), |k| crate::math::pow(v[k].abs(), p));
        crate::math::pow(s * self.grid.space_cell_volume(), 1.0 / p)
    }
}

/// `N` reals per spatial cell, stored as fixed-size points.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: PhaseGrid,
    values: Vec<Point>,
}

impl VectorField {
    pub(crate) fn from_vec(grid: PhaseGrid, values: Vec<Point>) -> Self {
        debug_assert_eq!(values.len(), grid.n_space());
        VectorField { grid, values }
    }

    pub fn new(grid: PhaseGrid, values: Vec<Point>) -> Result<Self> {
        if values.len() != grid.n_space() {
            return Err(VfpError::GridMismatch);
        }
        if let Some(index) = values.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(VfpError::NonFinite { index });
        }
        Ok(VectorField { grid, values })
    }

    pub fn constant(grid: PhaseGrid, c: Point) -> Self {
        let mut c = c;
        for k in grid.dim()..MAX_DIM {
            c[k] = 0.0;
        }
        VectorField {
            grid,
            values: alloc::vec![c; grid.n_space()],
        }
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Point] {
        &self.values
    }

    pub fn component(&self, k: usize) -> SpatialField {
        SpatialField::from_vec(self.grid, self.values.iter().map(|p| p[k]).collect())
    }

    /// `max_x |w(x)|`
    pub fn max_norm(&self) -> f64 {
        self.values
            .iter()
            .fold(0.0, |m, p| m.max(crate::math::sqrt(norm_sq(p))))
    }

    /// `∫ |w − z| dx` with the Euclidean norm.
    pub fn l1_distance(&self, other: &VectorField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let (a, b) = (&self.values, &other.values);
        Ok(pairwise_sum(a.len(), |k| {
            let d = [a[k][0] - b[k][0], a[k][1] - b[k][1]];
            crate::math::sqrt(norm_sq(&d))
        }) * self.grid.space_cell_volume())
    }

    /// `(∫ |w|^p dx)^{1/p}`
    pub fn lp_norm(&self, p: f64) -> f64 {
        let v = &self.values;
        let s = pairwise_sum(v.len(), |k| crate::math::pow(crate::math::sqrt(norm_sq(&v[k])), p));
        crate::math::pow(s * self.grid.space_cell_volume(), 1.0 / p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{exp, sqrt, PI};
    use alloc::string::ToString;
    use approx::assert_relative_eq;

    fn gauss(v: &Point) -> f64 {
        exp(-0.5 * v[0] * v[0]) / sqrt(2.0 * PI)
    }

    #[test]
    fn build_grid_spacings() {
        let g = PhaseGrid::new(1, 32, 64, 8.0, 1.0).unwrap();
        assert_eq!(g.dx(), 0.03125);
        assert_eq!(g.dv(), 0.25);
        assert_eq!(g.v_node(0), -7.875);
        assert_eq!(g.v_node(63), 7.875);
        // symmetric nodes
        for j in 0..32 {
            assert_eq!(g.v_node(j), -g.v_node(63 - j));
        }
    }

    #[test]
    fn build_grid_rejects_bad_input() {
        let err = PhaseGrid::new(1, 32, 63, 8.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("nv must be even"));
        assert!(PhaseGrid::new(1, 3, 64, 8.0, 1.0).is_err());
        assert!(PhaseGrid::new(1, 32, 6, 8.0, 1.0).is_err());
        assert!(PhaseGrid::new(1, 32, 64, 0.0, 1.0).is_err());
        assert!(PhaseGrid::new(1, 32, 64, 8.0, -1.0).is_err());
        assert!(PhaseGrid::new(3, 32, 64, 8.0, 1.0).is_err());
    }

    #[test]
    fn two_dimensional_cell_count() {
        let g = PhaseGrid::new(2, 16, 32, 6.0, 1.0).unwrap();
        assert_eq!(g.len(), 16 * 16 * 32 * 32);
        assert_eq!(g.n_space(), 256);
        assert_eq!(g.n_vel(), 1024);
        let c = g.vel_cell([3, 17]);
        assert_eq!(g.vel_index(c), [3, 17]);
    }

    #[test]
    fn sample_gaussian_peak() {
        let g = PhaseGrid::new(1, 8, 64, 8.0, 1.0).unwrap();
        let f = DistField::sample(g, |_, v| gauss(v)).unwrap();
        // nearest nodes to 0 sit at ±dv/2
        let expected = exp(-0.5 * 0.125 * 0.125) / sqrt(2.0 * PI);
        assert_relative_eq!(f.max_value(), expected, max_relative = 1e-15);
        assert!((f.max_value() - 0.39894).abs() < 5e-3);
    }

    #[test]
    fn sample_zero_and_negative() {
        let g = PhaseGrid::new(1, 8, 16, 8.0, 1.0).unwrap();
        let z = DistField::sample(g, |_, _| 0.0).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let tiny = DistField::sample(g, |_, _| -1e-310).unwrap();
        assert!(tiny.values().iter().all(|&v| v == 0.0));
        assert!(matches!(
            DistField::sample(g, |_, _| -1.0),
            Err(VfpError::NegativeValue { .. })
        ));
    }

    #[test]
    fn integrate_gaussian_moments() {
        let g = PhaseGrid::new(1, 16, 128, 8.0, 1.0).unwrap();
        let f = DistField::sample(g, |_, v| gauss(v)).unwrap();
        assert!((f.integrate(|_, _| 1.0) - 1.0).abs() < 1e-10);
        assert!(f.integrate(|_, v| v[0]).abs() < 1e-12);
        assert!((f.integrate(|_, v| v[0] * v[0]) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn midpoint_error_drops_quadratically_or_better() {
        // T = 4 Gaussian: visible error on coarse grids.
        let t = 4.0;
        let exact = 1.0;
        let err = |nv| {
            let g = PhaseGrid::new(1, 4, nv, 16.0, 1.0).unwrap();
            let f = DistField::sample(g, |_, v| exp(-v[0] * v[0] / (2.0 * t)) / sqrt(2.0 * PI * t)).unwrap();
            (f.mass() - exact).abs()
        };
        let (e8, e16) = (err(8), err(16));
        assert!(e8 > 1e-6, "coarse error {e8} too small to measure");
        assert!(e8 / e16 >= 4.0, "ratio {}", e8 / e16);
    }

    #[test]
    fn l1_distance_and_lincomb() {
        let g = PhaseGrid::new(1, 4, 8, 4.0, 1.0).unwrap();
        let a = DistField::sample(g, |_, _| 1.0).unwrap();
        let b = DistField::sample(g, |_, _| 3.0).unwrap();
        assert_relative_eq!(a.l1_distance(&b).unwrap(), 2.0 * 8.0, max_relative = 1e-14);
        let c = a.lincomb(2.0, &b, 1.0).unwrap();
        assert!(c.values().iter().all(|&v| v == 5.0));
    }
}
