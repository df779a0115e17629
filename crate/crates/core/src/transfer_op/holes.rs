use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::UlamMatrix;
use crate::error::{Error, Result};
use crate::grid_bv::{GridFunction, UniformGrid};
use crate::map_model::PiecewiseMap;

/// Distance from every cell centre to the singularity set, computed once so
/// that masks for many radii cost a comparison per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDistanceField {
    grid: UniformGrid,
    distances: Vec<f64>,
}

impl BoundaryDistanceField {
    pub fn new(map: &PiecewiseMap, grid: UniformGrid) -> Self {
        let distances = (0..grid.cell_count())
            .into_par_iter()
            .map(|c| map.boundary_distance(&grid.cell_center(c)))
            .collect();
        BoundaryDistanceField { grid, distances }
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    /// Cells that may meet the `r`-collar of the singularity set: the centre
    /// lies closer than `r` plus half a cell width (∞-norm).
    ///
    /// Cells that merely touch the singular set along a face are left out
    /// (a 1e-12 slack absorbs rounding in the distance), so `r = 0` gives an
    /// empty mask on grids aligned with the pieces.
    pub fn mask(&self, r: f64) -> HoleMask {
        let reach = r + 0.5 * self.grid.cell_width() - 1e-12;
        HoleMask {
            grid: self.grid,
            radius: r,
            cells: self.distances.iter().map(|&d| d < reach).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleMask {
    grid: UniformGrid,
    radius: f64,
    cells: Vec<bool>,
}

impl HoleMask {
    pub fn empty(grid: UniformGrid) -> Self {
        HoleMask {
            grid,
            radius: 0.0,
            cells: vec![false; grid.cell_count()],
        }
    }

    pub fn full(grid: UniformGrid) -> Self {
        HoleMask {
            grid,
            radius: f64::INFINITY,
            cells: vec![true; grid.cell_count()],
        }
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &HoleMask) -> bool {
        self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }
}

pub fn hole_mask(map: &PiecewiseMap, grid: UniformGrid, r: f64) -> HoleMask {
    BoundaryDistanceField::new(map, grid).mask(r)
}

fn masked_step(a: &UlamMatrix, h: &mut Vec<f64>, scratch: &mut Vec<f64>, mask: Option<&[bool]>) {
    if let Some(mask) = mask {
        for (v, &hole) in h.iter_mut().zip(mask) {
            if hole {
                *v = 0.0;
            }
        }
    }
    a.apply_slice(h, scratch);
    std::mem::swap(h, scratch);
}

/// `L(1_{Ω∖Γ} h)`: mass on the hole is removed before pushing forward.
pub fn apply_restricted(a: &UlamMatrix, h: &GridFunction, mask: &HoleMask) -> Result<GridFunction> {
    if *h.grid() != *a.grid() || mask.grid != *a.grid() {
        return Err(Error::GridMismatch);
    }
    let mut cur = h.values().to_vec();
    let mut scratch = vec![0.0; cur.len()];
    masked_step(a, &mut cur, &mut scratch, Some(&mask.cells));
    GridFunction::new(*a.grid(), cur)
}

/// `L̃_{ε,n} f = L_{ε,0} L_{ε,1} ⋯ L_{ε,n−1} f` with `L_{ε,k} = L(1 − 1_{Γ_{εν^k}})`.
///
/// The rightmost factor acts first, so the `k`-th application (counting from
/// zero) cuts the hole of radius `ε·ν^{n−1−k}`: holes grow as the
/// composition proceeds. With `ε = 0` there is no hole at all.
pub fn compose_restricted(
    a: &UlamMatrix,
    field: &BoundaryDistanceField,
    f: &GridFunction,
    eps: f64,
    nu: f64,
    n: usize,
) -> Result<GridFunction> {
    if *f.grid() != *a.grid() || field.grid != *a.grid() {
        return Err(Error::GridMismatch);
    }
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::InvalidParameter {
            name: "nu".into(),
            value: nu,
            reason: "must lie in (0, 1)".into(),
        });
    }
    let mut cur = f.values().to_vec();
    let mut scratch = vec![0.0; cur.len()];
    for k in 0..n {
        if eps > 0.0 {
            let mask = field.mask(eps * nu.powi((n - 1 - k) as i32));
            masked_step(a, &mut cur, &mut scratch, Some(&mask.cells));
        } else {
            masked_step(a, &mut cur, &mut scratch, None);
        }
    }
    GridFunction::new(*a.grid(), cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::MapSpec;
    use crate::transfer_op::{assemble_ulam, AssemblyConfig};

    #[test]
    fn ternary_collar_cells() {
        let map = MapSpec::named("ternary").build().unwrap();
        let grid = UniformGrid::new(1, 9).unwrap();
        let mask = hole_mask(&map, grid, 0.1);
        // centres 1/18, 3/18, ...; distances to {0,1/3,2/3,1} below 0.1 + 1/18
        let expected: Vec<bool> = (0..9)
            .map(|i| {
                let c = (i as f64 + 0.5) / 9.0;
                [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]
                    .iter()
                    .any(|b: &f64| (c - b).abs() < 0.1 + 1.0 / 18.0)
            })
            .collect();
        assert_eq!(mask.cells(), expected.as_slice());
        assert_eq!(hole_mask(&map, grid, 0.0).count(), 0);
    }

    #[test]
    fn restricted_extremes() {
        let map = MapSpec::named("ternary").build().unwrap();
        let grid = UniformGrid::new(1, 27).unwrap();
        let a = assemble_ulam(&map, grid, AssemblyConfig::lattice(9)).unwrap();
        let h = GridFunction::from_fn(grid, |x| x[0] * x[0]);
        let plain = a.apply(&h).unwrap();
        assert_eq!(apply_restricted(&a, &h, &HoleMask::empty(grid)).unwrap(), plain);
        let zero = apply_restricted(&a, &h, &HoleMask::full(grid)).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let field = BoundaryDistanceField::new(&map, grid);
        assert_eq!(compose_restricted(&a, &field, &h, 0.1, 0.5, 0).unwrap(), h);
        assert_eq!(
            compose_restricted(&a, &field, &h, 0.0, 0.5, 4).unwrap(),
            a.apply_n(&h, 4).unwrap()
        );
    }
}
