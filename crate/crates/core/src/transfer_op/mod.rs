//! Ulam discretization of the transfer operator.
//!
//! Row `i` of an [`UlamMatrix`] records where the mass of cell `i` goes:
//! `A[i][j]` is the fraction of sample points of cell `i` whose image lies in
//! cell `j`. Densities are pushed forward as row vectors, `(Lh)_j = Σ_i h_i
//! A[i][j]`. Samples that hit the singular set or leave the cube are counted
//! as escaped and dropped.

mod holes;
pub mod io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_bv::{GridFunction, UniformGrid};
use crate::map_model::PiecewiseMap;

pub use holes::{apply_restricted, compose_restricted, hole_mask, BoundaryDistanceField, HoleMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Independent uniform points per cell.
    MonteCarlo,
    /// A midpoint lattice of `m^d` points per cell, `m = ⌊s^{1/d}⌋`.
    CenteredLattice,
}

impl SamplingMode {
    fn tag(self) -> u8 {
        match self {
            SamplingMode::MonteCarlo => 0,
            SamplingMode::CenteredLattice => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(SamplingMode::MonteCarlo),
            1 => Ok(SamplingMode::CenteredLattice),
            t => Err(Error::Format(format!("unknown sampling mode tag {t}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AssemblyConfig {
    pub samples_per_cell: usize,
    pub seed: u64,
    pub mode: SamplingMode,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        AssemblyConfig {
            samples_per_cell: 256,
            seed: 0,
            mode: SamplingMode::MonteCarlo,
        }
    }
}

impl AssemblyConfig {
    pub fn monte_carlo(samples_per_cell: usize, seed: u64) -> Self {
        AssemblyConfig {
            samples_per_cell,
            seed,
            mode: SamplingMode::MonteCarlo,
        }
    }

    pub fn lattice(samples_per_cell: usize) -> Self {
        AssemblyConfig {
            samples_per_cell,
            seed: 0,
            mode: SamplingMode::CenteredLattice,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples_per_cell == 0 || self.samples_per_cell > u32::MAX as usize {
            return Err(Error::InvalidParameter {
                name: "samples_per_cell".into(),
                value: self.samples_per_cell as f64,
                reason: "must be a positive 32-bit count".into(),
            });
        }
        Ok(())
    }
}

/// Largest `m` with `m^d ≤ s`.
pub fn lattice_side(samples: usize, dim: usize) -> usize {
    let mut m = (samples as f64).powf(1.0 / dim as f64).round().max(1.0) as usize;
    while m > 1 && m.pow(dim as u32) > samples {
        m -= 1;
    }
    while (m + 1).pow(dim as u32) <= samples {
        m += 1;
    }
    m
}

/// Calls `visit` on every sample point of `cell`. Monte Carlo points come
/// from the generator stream `stream`, so rows are independent of the order
/// in which they are processed. Returns the number of points visited.
pub(crate) fn for_each_sample(
    grid: &UniformGrid,
    cfg: &AssemblyConfig,
    cell: usize,
    stream: u64,
    mut visit: impl FnMut(&[f64]),
) -> usize {
    let d = grid.dim();
    let w = grid.cell_width();
    let origin = grid.cell_origin(cell);
    let mut x = vec![0.0; d];
    match cfg.mode {
        SamplingMode::MonteCarlo => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(stream);
            for _ in 0..cfg.samples_per_cell {
                for (xk, ok) in x.iter_mut().zip(&origin) {
                    *xk = ok + w * rng.random::<f64>();
                }
                visit(&x);
            }
            cfg.samples_per_cell
        }
        SamplingMode::CenteredLattice => {
            let m = lattice_side(cfg.samples_per_cell, d);
            let total = m.pow(d as u32);
            let mut idx = vec![0usize; d];
            for _ in 0..total {
                for k in 0..d {
                    x[k] = origin[k] + w * (idx[k] as f64 + 0.5) / m as f64;
                }
                visit(&x);
                for k in (0..d).rev() {
                    idx[k] += 1;
                    if idx[k] < m {
                        break;
                    }
                    idx[k] = 0;
                }
            }
            total
        }
    }
}

/// Sparse Ulam matrix in row-compressed form.
#[derive(Debug, Clone, PartialEq)]
pub struct UlamMatrix {
    grid: UniformGrid,
    config: AssemblyConfig,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<f64>,
    escaped: Vec<f64>,
}

/// Pushes `cell`'s samples through `map` and returns the sorted destination
/// histogram plus the escaped fraction.
fn assemble_row(
    map: &PiecewiseMap,
    grid: &UniformGrid,
    cfg: &AssemblyConfig,
    cell: usize,
) -> (Vec<u32>, Vec<f64>, f64) {
    let mut hits: Vec<u32> = Vec::with_capacity(cfg.samples_per_cell);
    let mut image = vec![0.0; grid.dim()];
    let total = for_each_sample(grid, cfg, cell, cell as u64, |x| {
        if map.evaluate_into(x, &mut image).is_ok() {
            if let Some(j) = grid.locate(&image) {
                hits.push(j as u32);
            }
        }
    });
    let escaped = (total - hits.len()) as f64 / total as f64;
    hits.sort_unstable();
    let mut cols = Vec::new();
    let mut values = Vec::new();
    for chunk in hits.chunk_by(|a, b| a == b) {
        cols.push(chunk[0]);
        values.push(chunk.len() as f64 / total as f64);
    }
    (cols, values, escaped)
}

/// Builds the Ulam matrix of `map` on `grid`.
///
/// Rows are assembled in parallel; each row owns its random stream, so the
/// result does not depend on the thread count.
pub fn assemble_ulam(map: &PiecewiseMap, grid: UniformGrid, cfg: AssemblyConfig) -> Result<UlamMatrix> {
    cfg.validate()?;
    if map.dimension() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.dimension(),
            got: grid.dim(),
        });
    }
    let rows: Vec<_> = (0..grid.cell_count())
        .into_par_iter()
        .map(|cell| assemble_row(map, &grid, &cfg, cell))
        .collect();
    let nnz = rows.iter().map(|r| r.0.len()).sum();
    let mut row_ptr = Vec::with_capacity(rows.len() + 1);
    let mut cols = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    let mut escaped = Vec::with_capacity(rows.len());
    row_ptr.push(0);
    for (c, v, e) in rows {
        cols.extend_from_slice(&c);
        values.extend_from_slice(&v);
        escaped.push(e);
        row_ptr.push(cols.len());
    }
    Ok(UlamMatrix {
        grid,
        config: cfg,
        row_ptr,
        cols,
        values,
        escaped,
    })
}

impl UlamMatrix {
    /// Builds a matrix from raw row-compressed arrays, checking the layout
    /// and that each row's mass plus its escaped fraction is one.
    pub fn from_csr(
        grid: UniformGrid,
        config: AssemblyConfig,
        row_ptr: Vec<usize>,
        cols: Vec<u32>,
        values: Vec<f64>,
        escaped: Vec<f64>,
    ) -> Result<Self> {
        let cells = grid.cell_count();
        let layout_ok = row_ptr.len() == cells + 1
            && escaped.len() == cells
            && row_ptr[0] == 0
            && row_ptr.windows(2).all(|w| w[0] <= w[1])
            && row_ptr[cells] == cols.len()
            && cols.len() == values.len()
            && cols.iter().all(|&c| (c as usize) < cells);
        if !layout_ok {
            return Err(Error::Format("inconsistent row-compressed layout".into()));
        }
        for i in 0..cells {
            let row = &values[row_ptr[i]..row_ptr[i + 1]];
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Format(format!("row {i} has an entry outside [0,1]")));
            }
            let sum: f64 = row.iter().sum::<f64>() + escaped[i];
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Format(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(UlamMatrix {
            grid,
            config,
            row_ptr,
            cols,
            values,
            escaped,
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn config(&self) -> &AssemblyConfig {
        &self.config
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn cols(&self) -> &[u32] {
        &self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Escaped fraction per source cell.
    pub fn escaped(&self) -> &[f64] {
        &self.escaped
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn size(&self) -> usize {
        self.escaped.len()
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.values[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    /// `A[i][j]`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// Rows whose samples all escaped.
    pub fn dead_rows(&self) -> Vec<usize> {
        (0..self.size())
            .filter(|&i| self.row_ptr[i] == self.row_ptr[i + 1])
            .collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.size();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `out = h·A` on raw values. The scatter runs serially in row order so
    /// the floating-point summation order is fixed.
    pub fn apply_slice(&self, h: &[f64], out: &mut [f64]) {
        debug_assert_eq!(h.len(), self.size());
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &hi) in h.iter().enumerate() {
            if hi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[k] as usize] += hi * self.values[k];
            }
        }
    }

    /// `out = A·v`, the adjoint action (Koopman operator on observables).
    pub fn apply_adjoint_slice(&self, v: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            *o = self.row(i).map(|(j, a)| a * v[j]).sum();
        });
    }

    /// Pushes `h` forward once.
    pub fn apply(&self, h: &GridFunction) -> Result<GridFunction> {
        if *h.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = vec![0.0; self.size()];
        self.apply_slice(h.values(), &mut out);
        GridFunction::new(self.grid, out)
    }

    /// `n` successive applications.
    pub fn apply_n(&self, h: &GridFunction, n: usize) -> Result<GridFunction> {
        if *h.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut cur = h.values().to_vec();
        let mut next = vec![0.0; cur.len()];
        for _ in 0..n {
            self.apply_slice(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        GridFunction::new(self.grid, cur)
    }
}

/// Discrete residual of `∫ h·φ∘T = ∫ φ·Lh`.
///
/// The left side is a quadrature of `h·φ∘T` over sample points, with `φ`
/// read off the cell containing `T(x)`; the right side uses the assembled
/// matrix. In lattice mode both sides see the same points, so they agree up
/// to rounding. In Monte Carlo mode the quadrature draws an independent set
/// of points, and the residual measures the sampling error of the matrix.
pub fn duality_residual(
    map: &PiecewiseMap,
    grid: UniformGrid,
    cfg: AssemblyConfig,
    h: &GridFunction,
    phi: &GridFunction,
) -> Result<f64> {
    if *h.grid() != grid || *phi.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let a = assemble_ulam(map, grid, cfg)?;
    let cells = grid.cell_count() as u64;
    let offset = match cfg.mode {
        SamplingMode::CenteredLattice => 0,
        SamplingMode::MonteCarlo => cells,
    };
    let per_cell: Vec<f64> = (0..grid.cell_count())
        .into_par_iter()
        .map(|cell| {
            if h.values()[cell] == 0.0 {
                return 0.0;
            }
            let mut image = vec![0.0; grid.dim()];
            let mut acc = 0.0;
            let total = for_each_sample(&grid, &cfg, cell, cell as u64 + offset, |x| {
                if map.evaluate_into(x, &mut image).is_ok() {
                    if let Some(j) = grid.locate(&image) {
                        acc += phi.values()[j];
                    }
                }
            });
            h.values()[cell] * acc / total as f64
        })
        .collect();
    let vol = grid.cell_volume();
    let lhs = per_cell.iter().sum::<f64>() * vol;
    let rhs = a.apply(h)?.inner(phi)?;
    Ok((lhs - rhs).abs())
}

/// Pointwise transfer operator through preimages,
/// `Lh(x) = Σ_{T(y)=x} h(y) / |det D_yT|`, reading `h` on the grid.
pub fn pointwise_transfer(map: &PiecewiseMap, h: &GridFunction, x: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (y, piece) in map.preimages(x)? {
        let det = map.dynamics().det_jacobian(piece, &y).abs();
        if let Some(v) = h.value_at(&y) {
            total += v / det;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::MapSpec;

    fn ternary() -> PiecewiseMap {
        MapSpec::named("ternary").build().unwrap()
    }

    #[test]
    fn lattice_side_is_integer_root() {
        assert_eq!(lattice_side(27, 1), 27);
        assert_eq!(lattice_side(1024, 2), 32);
        assert_eq!(lattice_side(1023, 2), 31);
        assert_eq!(lattice_side(27, 3), 3);
        assert_eq!(lattice_side(1, 3), 1);
    }

    #[test]
    fn ternary_three_cells() {
        let grid = UniformGrid::new(1, 3).unwrap();
        let a = assemble_ulam(&ternary(), grid, AssemblyConfig::lattice(30)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.get(i, j), 1.0 / 3.0);
            }
        }
        let h = GridFunction::new(grid, vec![3.0, 0.0, 0.0]).unwrap();
        let out = a.apply(&h).unwrap();
        for v in out.values() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_is_identity() {
        let map = MapSpec::named("identity").with_param("d", 2.0).build().unwrap();
        let grid = UniformGrid::new(2, 6).unwrap();
        let a = assemble_ulam(&map, grid, AssemblyConfig::monte_carlo(16, 3)).unwrap();
        assert_eq!(a.nnz(), 36);
        for i in 0..36 {
            assert_eq!(a.get(i, i), 1.0);
        }
    }

    #[test]
    fn grid_mismatch() {
        let grid = UniformGrid::new(1, 3).unwrap();
        let a = assemble_ulam(&ternary(), grid, AssemblyConfig::lattice(3)).unwrap();
        let other = GridFunction::zeros(UniformGrid::new(1, 4).unwrap());
        assert_eq!(a.apply(&other), Err(Error::GridMismatch));
    }

    #[test]
    fn pointwise_matches_ulam_on_markov_grid() {
        let grid = UniformGrid::new(1, 9).unwrap();
        let map = ternary();
        let h = GridFunction::from_fn(grid, |x| 1.0 + x[0]);
        let a = assemble_ulam(&map, grid, AssemblyConfig::lattice(27)).unwrap();
        let lh = a.apply(&h).unwrap();
        // On the Markov grid the Ulam image of a cell-average is the cell
        // average of the true image.
        for j in 0..9 {
            let avg: f64 = (0..30)
                .map(|k| {
                    let x = (j as f64 + (k as f64 + 0.5) / 30.0) / 9.0;
                    pointwise_transfer(&map, &h, &[x]).unwrap()
                })
                .sum::<f64>()
                / 30.0;
            assert!((avg - lh.values()[j]).abs() < 1e-12);
        }
    }
}
