//! Uniform grids on the unit torus and the scalar/vector fields sampled on them.
//!
//! Samples are stored in physical space with the x index running fastest:
//! the value at grid point `(i, j)` lives at `i + n * j`. Spectral
//! representations are created per operation (see [`spectral`]).

pub mod modes;
mod norms;
pub mod snapshot;
pub mod spectral;

pub use norms::{norm, vector_norm, Norm};
pub use spectral::{
    circular_convolve, dealias, divergence, gradient, grad_magnitude, heat_flow, helmholtz_apply, helmholtz_solve,
    inv_laplacian_div, laplacian, spectral_derivative, spectral_shift, vector_laplacian,
    DerivativeOp, Field,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform periodic grid on `[0, 1)^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PeriodicGrid {
    dim: usize,
    n: usize,
}

impl PeriodicGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per dimension must be a power of two >= 8, got {n}"
            )));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of grid points, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one grid point (the domain has unit volume).
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Integer coordinates `(i, j)` of a flat index (`j = 0` in 1-d).
    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    #[inline]
    pub fn ravel(&self, i: usize, j: usize) -> usize {
        i + self.n * j
    }

    /// Physical coordinates of a grid point, `[x, y]` (`y = 0` in 1-d).
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.unravel(idx);
        let h = self.spacing();
        [i as f64 * h, j as f64 * h]
    }

    /// Flat index of the point displaced by integer offsets, with wrap-around.
    #[inline]
    pub fn offset(&self, idx: usize, di: isize, dj: isize) -> usize {
        let n = self.n as isize;
        let (i, j) = self.unravel(idx);
        let ii = (i as isize + di).rem_euclid(n) as usize;
        if self.dim == 1 {
            ii
        } else {
            let jj = (j as isize + dj).rem_euclid(n) as usize;
            self.ravel(ii, jj)
        }
    }

    /// Signed minimum-image offset of an index along one axis, in grid units.
    #[inline]
    pub fn signed_offset(&self, k: usize) -> isize {
        let n = self.n as isize;
        let k = k as isize;
        if k >= n / 2 {
            k - n
        } else {
            k
        }
    }
}

/// Periodic (minimum-image) distance between two points of the unit torus.
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(1.0);
            let d = d.min(1.0 - d);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Real samples of a function on a [`PeriodicGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field".into()));
        }
        Ok(Self { grid, values })
    }

    /// Construction from values already known to be finite and correctly sized.
    pub(crate) fn from_raw(grid: PeriodicGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: PeriodicGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f([x, y])` at every grid point.
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.point(k))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Domain integral (equal to the mean, the torus has unit volume).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.integral()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_grid(other)?;
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    /// Grid-quadrature inner product `∫ f g`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume())
    }

    pub(crate) fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Exact translation by whole grid cells: the result is `f(· + offset·spacing)`.
    pub fn grid_shift(&self, di: isize, dj: isize) -> Self {
        let g = self.grid;
        let values = (0..g.len()).map(|k| self.values[g.offset(k, di, dj)]).collect();
        Self::from_raw(g, values)
    }
}

/// A `dim`-component vector field; all components share one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: PeriodicGrid,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let grid = components
            .first()
            .ok_or_else(|| Error::DimensionMismatch("vector field without components".into()))?
            .grid();
        if components.len() != grid.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}-d grid needs {} components, got {}",
                grid.dim(),
                grid.dim(),
                components.len()
            )));
        }
        if components.iter().any(|c| c.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    /// Samples a vector-valued function; `f` returns `[v_x, v_y]` (`v_y` ignored in 1-d).
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<Self> {
        let comps = (0..grid.dim())
            .map(|c| ScalarField::from_fn(grid, |p| f(p)[c]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, c: usize) -> &ScalarField {
        &self.components[c]
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let g = self.grid;
        let values = (0..g.len())
            .map(|k| {
                self.components
                    .iter()
                    .map(|c| c.values[k] * c.values[k])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        ScalarField::from_raw(g, values)
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    pub fn axpby(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Self::new(
            self.components
                .iter()
                .zip(&other.components)
                .map(|(x, y)| x.axpby(a, y, b))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn scale(&self, a: f64) -> Result<Self> {
        Self::new(
            self.components
                .iter()
                .map(|c| c.map(|v| a * v))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    /// `∫ u · v`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    pub fn grid_shift(&self, di: isize, dj: isize) -> Self {
        Self {
            grid: self.grid,
            components: self.components.iter().map(|c| c.grid_shift(di, dj)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(PeriodicGrid::new(1, 4).is_err());
        assert!(PeriodicGrid::new(1, 100).is_err());
        assert!(PeriodicGrid::new(3, 16).is_err());
        let g = PeriodicGrid::new(2, 16).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.spacing() * g.n() as f64, 1.0);
    }

    #[test]
    fn fields_reject_non_finite() {
        let g = PeriodicGrid::new(1, 8).unwrap();
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(ScalarField::new(g, v), Err(Error::NonFinite(_))));
    }

    #[test]
    fn vector_field_needs_one_component_per_dimension() {
        let g = PeriodicGrid::new(2, 8).unwrap();
        let c = ScalarField::zeros(g);
        assert!(VectorField::new(vec![c.clone()]).is_err());
        assert!(VectorField::new(vec![c.clone(), c]).is_ok());
    }

    #[test]
    fn grid_shift_wraps() {
        let g = PeriodicGrid::new(1, 8).unwrap();
        let f = ScalarField::new(g, (0..8).map(|k| k as f64).collect()).unwrap();
        let s = f.grid_shift(3, 0);
        assert_eq!(s.values()[0], 3.0);
        assert_eq!(s.values()[6], 1.0);
    }

    #[test]
    fn torus_distance_uses_minimum_image() {
        assert!((torus_distance(&[0.05], &[0.95]) - 0.1).abs() < 1e-15);
        assert!((torus_distance(&[0.0, 0.9], &[0.0, 0.1]) - 0.2).abs() < 1e-15);
    }
}
