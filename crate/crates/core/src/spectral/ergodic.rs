use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use super::krylov::{partial_schur, KrylovOptions, PartialSchur};
use crate::error::{Error, Result};
use crate::grid_bv::GridFunction;
use crate::transfer_op::UlamMatrix;

/// Invariant subspace for the `k` eigenvalues of largest modulus of the
/// push-forward `h ↦ hA`.
pub fn leading_subspace(a: &UlamMatrix, k: usize, opts: &KrylovOptions) -> Result<PartialSchur> {
    let op = |x: &[f64], y: &mut [f64]| a.apply_slice(x, y);
    partial_schur(&op, a.size(), k, opts)
}

/// The `k` eigenvalues of largest modulus, nonincreasing in modulus.
pub fn top_spectrum(a: &UlamMatrix, k: usize, tol: f64) -> Result<Vec<Complex<f64>>> {
    let opts = KrylovOptions {
        tol: tol.min(1e-8),
        ..Default::default()
    };
    let ps = leading_subspace(a, k, &opts)?;
    Ok(ps.eigenvalues.into_iter().take(k).collect())
}

/// Number of eigenvalues within `tol` of 1.
pub fn unit_multiplicity(eigenvalues: &[Complex<f64>], tol: f64) -> usize {
    eigenvalues
        .iter()
        .filter(|z| (*z - Complex::new(1.0, 0.0)).norm() < tol)
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicDecomposition {
    /// Cell sets `{h_κ > tol·max h_κ}`, ordered by first cell.
    pub components: Vec<Vec<usize>>,
    /// The nonnegative unit-mass densities spanning the unit eigenspace.
    #[serde(skip)]
    pub densities: Vec<GridFunction>,
    pub multiplicity: usize,
    /// Condition number of the recombination matrix.
    pub condition: f64,
    /// Every probed eigenvalue sits at 1: no spectral gap is visible and the
    /// split into components is not meaningful.
    pub degenerate: bool,
}

/// Rows of the eigenbasis that are parallel belong to the same component;
/// returns one unit representative direction per cluster.
fn cluster_rows(v: &DMatrix<f64>, cut: f64) -> Vec<Vec<f64>> {
    let k = v.ncols();
    let mut order: Vec<(usize, f64)> = (0..v.nrows()).map(|i| (i, v.row(i).norm())).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let top = order.first().map_or(0.0, |o| o.1);
    let mut reps: Vec<Vec<f64>> = Vec::new();
    for (i, nrm) in order {
        if nrm <= cut * top {
            break;
        }
        let dir: Vec<f64> = (0..k).map(|c| v[(i, c)] / nrm).collect();
        let matched = reps.iter().any(|r| {
            let cos: f64 = r.iter().zip(&dir).map(|(a, b)| a * b).sum();
            cos.abs() > 1.0 - 1e-6
        });
        if !matched {
            reps.push(dir);
        }
    }
    reps
}

/// Splits the eigenspace at 1 into nonnegative densities with disjoint
/// supports.
pub fn ergodic_components(a: &UlamMatrix, tol: f64) -> Result<ErgodicDecomposition> {
    let probe = a.size().min(8);
    let opts = KrylovOptions {
        tol: tol.min(1e-8),
        ..Default::default()
    };
    let ps = leading_subspace(a, probe, &opts)?;
    let probed: Vec<_> = ps.eigenvalues.iter().take(probe).copied().collect();
    let mult = unit_multiplicity(&probed, tol);
    if mult == 0 {
        return Err(Error::InsufficientData("no eigenvalue near 1".into()));
    }
    let degenerate = mult >= probe;

    // Null space of R − I, lifted back through the basis.
    let p = ps.projected.nrows();
    let shifted = &ps.projected - DMatrix::<f64>::identity(p, p);
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]).then(i.cmp(&j)));
    let n = a.size();
    let mut v = DMatrix::<f64>::zeros(n, mult);
    for (c, &idx) in order.iter().take(mult).enumerate() {
        for (q, basis) in ps.basis.iter().enumerate() {
            let coef = vt[(idx, q)];
            if coef != 0.0 {
                for (cell, b) in basis.iter().enumerate() {
                    v[(cell, c)] += coef * b;
                }
            }
        }
    }

    let reps = cluster_rows(&v, 1e-6);
    if reps.len() != mult {
        return Err(Error::DecompositionAmbiguous {
            condition: f64::INFINITY,
        });
    }
    let c = DMatrix::from_fn(mult, mult, |i, j| reps[i][j]);
    let sv = c.clone().svd(false, false).singular_values;
    let condition = sv.max() / sv.min();
    let c_inv = c.try_inverse().ok_or(Error::DecompositionAmbiguous {
        condition: f64::INFINITY,
    })?;
    let h = &v * c_inv;

    let grid = *a.grid();
    let vol = grid.cell_volume();
    let mut densities = Vec::with_capacity(mult);
    for col in 0..mult {
        let mut vals: Vec<f64> = h.column(col).iter().copied().collect();
        let sum: f64 = vals.iter().sum();
        if sum < 0.0 {
            vals.iter_mut().for_each(|x| *x = -*x);
        }
        let total: f64 = vals.iter().map(|x| x.abs()).sum();
        let negative: f64 = vals.iter().filter(|&&x| x < 0.0).map(|x| -x).sum();
        if total == 0.0 || negative > 1e-6 * total {
            return Err(Error::DecompositionAmbiguous { condition });
        }
        let mass = vals.iter().sum::<f64>() * vol;
        vals.iter_mut().for_each(|x| *x = (*x / mass).max(0.0));
        densities.push(GridFunction::new(grid, vals)?);
    }
    let mut pairs: Vec<(Vec<usize>, GridFunction)> = densities
        .into_iter()
        .map(|d| {
            let top = d.max();
            let support = (0..n).filter(|&i| d.values()[i] > tol * top).collect();
            (support, d)
        })
        .collect();
    pairs.sort_by_key(|(s, _)| s.first().copied().unwrap_or(usize::MAX));
    let (components, densities) = pairs.into_iter().unzip();
    Ok(ErgodicDecomposition {
        components,
        densities,
        multiplicity: mult,
        condition,
        degenerate,
    })
}

/// A group `{e^{2πik/period}}` of peripheral eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicGroup {
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicGroups {
    pub groups: Vec<CyclicGroup>,
    /// Phases (in `[0, 2π)`) not explained by any group of period ≤ 64.
    pub unmatched: Vec<f64>,
    /// All phases were grouped.
    pub cyclic: bool,
}

/// Largest period considered when matching roots of unity.
pub const MAX_PERIOD: usize = 64;

/// Partitions peripheral eigenvalues into complete groups of roots of unity.
///
/// Greedy: the largest period whose full set of roots is still present is
/// taken first, one copy of each root removed, and the search repeated.
pub fn cyclic_groups(peripheral: &[Complex<f64>], tol: f64) -> CyclicGroups {
    use std::f64::consts::TAU;
    let mut phases: Vec<f64> = peripheral
        .iter()
        .map(|z| z.arg().rem_euclid(TAU))
        .collect();
    let close = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(TAU);
        d.min(TAU - d) < tol
    };
    let mut groups = Vec::new();
    'outer: while !phases.is_empty() {
        for period in (1..=MAX_PERIOD.min(phases.len())).rev() {
            let mut taken = Vec::with_capacity(period);
            for r in 0..period {
                let target = TAU * r as f64 / period as f64;
                match (0..phases.len()).find(|&i| !taken.contains(&i) && close(phases[i], target)) {
                    Some(i) => taken.push(i),
                    None => break,
                }
            }
            if taken.len() == period {
                taken.sort_unstable_by(|a, b| b.cmp(a));
                for i in taken {
                    phases.remove(i);
                }
                groups.push(CyclicGroup { period });
                continue 'outer;
            }
        }
        break;
    }
    groups.sort_by_key(|g| std::cmp::Reverse(g.period));
    CyclicGroups {
        cyclic: phases.is_empty(),
        unmatched: phases,
        groups,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(phase: f64) -> Complex<f64> {
        Complex::from_polar(1.0, phase)
    }

    #[test]
    fn groups_of_roots() {
        let g = cyclic_groups(&[unit(0.0)], 1e-6);
        assert_eq!(g.groups, vec![CyclicGroup { period: 1 }]);
        let g = cyclic_groups(&[unit(0.0), unit(2.0 * PI / 3.0), unit(4.0 * PI / 3.0)], 1e-6);
        assert_eq!(g.groups, vec![CyclicGroup { period: 3 }]);
        let g = cyclic_groups(&[unit(0.0), unit(PI), unit(0.0)], 1e-6);
        assert_eq!(g.groups.iter().map(|g| g.period).collect::<Vec<_>>(), vec![2, 1]);
        let g = cyclic_groups(&[unit(0.0), unit(0.5)], 1e-6);
        assert!(!g.cyclic);
        assert_eq!(g.unmatched.len(), 1);
    }
}
