use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[0,1]^d` into `n^d` cubes.
///
/// Cells are numbered row-major: axis 0 varies slowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UniformGrid {
    dim: usize,
    n: usize,
}

impl UniformGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("resolution {n} is below 2")));
        }
        let cells = (n as u128).checked_pow(dim as u32);
        if cells.is_none_or(|c| c > u32::MAX as u128) {
            return Err(Error::InvalidGrid(format!("{n}^{dim} cells is too many")));
        }
        Ok(UniformGrid { dim, n })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        (self.n as f64).powi(-(self.dim as i32))
    }

    /// Area of a cell face, `n^{-(d-1)}`.
    #[inline]
    pub fn face_area(&self) -> f64 {
        (self.n as f64).powi(1 - self.dim as i32)
    }

    #[inline]
    pub fn cell_width(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Index offset between neighbours along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Position of `cell` along `axis`.
    #[inline]
    pub fn coordinate(&self, cell: usize, axis: usize) -> usize {
        (cell / self.stride(axis)) % self.n
    }

    pub fn multi_index(&self, cell: usize) -> Vec<usize> {
        (0..self.dim).map(|k| self.coordinate(cell, k)).collect()
    }

    pub fn linear_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dim);
        index.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        let w = self.cell_width();
        (0..self.dim)
            .map(|k| (self.coordinate(cell, k) as f64 + 0.5) * w)
            .collect()
    }

    /// Lower corner of `cell`.
    pub fn cell_origin(&self, cell: usize) -> Vec<f64> {
        let w = self.cell_width();
        (0..self.dim)
            .map(|k| self.coordinate(cell, k) as f64 * w)
            .collect()
    }

    /// The cell containing `x`; points on the upper faces of the cube belong
    /// to the last cell.
    #[inline]
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let n = self.n as f64;
        let mut idx = 0;
        for &v in x {
            if !(0.0..=1.0).contains(&v) {
                return None;
            }
            let i = ((v * n) as usize).min(self.n - 1);
            idx = idx * self.n + i;
        }
        Some(idx)
    }
}

/// Piecewise-constant function on a [`UniformGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: UniformGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::Format(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("grid function has non-finite values".into()));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: UniformGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: UniformGrid, value: f64) -> Self {
        GridFunction {
            grid,
            values: vec![value; grid.cell_count()],
        }
    }

    /// Samples `f` at cell centres.
    pub fn from_fn(grid: UniformGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.cell_count())
            .map(|c| f(&grid.cell_center(c)))
            .collect();
        GridFunction { grid, values }
    }

    pub fn indicator(grid: UniformGrid, cells: &[usize]) -> Self {
        let mut g = Self::zeros(grid);
        for &c in cells {
            g.values[c] = 1.0;
        }
        g
    }

    #[inline]
    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `∫ g`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `∫ f·g`.
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume())
    }

    /// Nonnegative with unit mass, both within `tol`.
    pub fn is_density(&self, tol: f64) -> bool {
        self.values.iter().all(|&v| v >= -tol) && (self.mass() - 1.0).abs() <= tol
    }

    /// Rescales to unit mass; zero-mass functions are returned unchanged.
    pub fn normalized(mut self) -> Self {
        let m = self.mass();
        if m != 0.0 {
            self.values.iter_mut().for_each(|v| *v /= m);
        }
        self
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= c);
        self
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        self.same_grid(other)?;
        Ok(GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Value on the cell containing `x`.
    pub fn value_at(&self, x: &[f64]) -> Option<f64> {
        self.grid.locate(x).map(|c| self.values[c])
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let g = UniformGrid::new(3, 5).unwrap();
        for cell in [0, 7, 63, 124] {
            assert_eq!(g.linear_index(&g.multi_index(cell)), cell);
        }
        assert_eq!(g.stride(0), 25);
        assert_eq!(g.locate(&[0.99, 0.0, 0.21]), Some(4 * 25 + 1));
        assert_eq!(g.locate(&[1.0, 1.0, 1.0]), Some(124));
        assert_eq!(g.locate(&[1.1, 0.0, 0.0]), None);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(UniformGrid::new(2, 1).is_err());
        assert!(UniformGrid::new(0, 4).is_err());
    }

    #[test]
    fn density_flag() {
        let grid = UniformGrid::new(2, 4).unwrap();
        assert!(GridFunction::constant(grid, 1.0).is_density(1e-9));
        assert!(!GridFunction::constant(grid, 2.0).is_density(1e-9));
        assert!(GridFunction::constant(grid, 2.0).normalized().is_density(1e-12));
    }
}
