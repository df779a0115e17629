//! Fixtures shared by the benchmarks.

use acim_core::transfer_op::assemble_ulam;
use acim_core::{AssemblyConfig, GridFunction, MapSpec, PiecewiseMap, UlamMatrix, UniformGrid};

pub fn liverani() -> PiecewiseMap {
    MapSpec::liverani2d(7.0, 7.0).build().expect("built-in map")
}

pub fn ternary() -> PiecewiseMap {
    MapSpec::named("ternary").build().expect("built-in map")
}

/// Monte Carlo Ulam matrix of the two-dimensional example on an `n × n` grid.
pub fn liverani_matrix(n: usize, samples: usize) -> UlamMatrix {
    let grid = UniformGrid::new(2, n).expect("valid grid");
    assemble_ulam(&liverani(), grid, AssemblyConfig::monte_carlo(samples, 1)).expect("assembly")
}

pub fn ternary_matrix(n: usize) -> UlamMatrix {
    let grid = UniformGrid::new(1, n).expect("valid grid");
    assemble_ulam(&ternary(), grid, AssemblyConfig::lattice(27)).expect("assembly")
}

pub fn uniform(a: &UlamMatrix) -> GridFunction {
    GridFunction::constant(*a.grid(), 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        let a = liverani_matrix(8, 4);
        assert_eq!(a.size(), 64);
        assert_eq!(uniform(&ternary_matrix(9)).mass(), 1.0);
    }
}
