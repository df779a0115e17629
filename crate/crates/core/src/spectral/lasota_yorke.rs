use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_bv::{bv_norm, lp_norm, GridFunction, UniformGrid};
use crate::transfer_op::UlamMatrix;

/// Outcome of testing `‖Lⁿh‖_BV ≤ σⁿ‖h‖_BV + B‖h‖_{L¹}` on random `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LYReport {
    pub sigma: f64,
    /// Smallest `B` that makes every sampled inequality hold.
    pub b: f64,
    /// Number of `(h, n)` pairs evaluated.
    pub samples: usize,
    /// Largest `‖Lⁿh‖_BV − σⁿ‖h‖_BV − B‖h‖_{L¹}` over the samples.
    pub max_violation: f64,
    /// Pairs where `‖Lⁿh‖_{L¹} > ‖h‖_{L¹}`.
    pub l1_violations: usize,
    /// Largest `B` needed at each `n = 1..=n_max`.
    pub b_by_n: Vec<f64>,
    /// `B` needed by rough test functions over `B` needed by coarse ones.
    pub roughness_ratio: f64,
    /// Set when `B` scales with the roughness of `h`, i.e. no uniform `B`
    /// exists on the grid (the operator is not contracting BV).
    pub non_uniform: bool,
}

/// Roughness ratio above which the report flags non-uniformity.
const ROUGHNESS_LIMIT: f64 = 4.0;

/// A signed mixture of `1..=4` grid-aligned boxes. Side lengths are at most
/// `max_width` cells.
pub fn random_box_mixture(grid: UniformGrid, rng: &mut impl Rng, max_width: usize) -> GridFunction {
    let n = grid.n();
    let d = grid.dim();
    let mut values = vec![0.0; grid.cell_count()];
    let count = rng.random_range(1..=4);
    for _ in 0..count {
        let sides: Vec<(usize, usize)> = (0..d)
            .map(|_| {
                let w = rng.random_range(1..=max_width.clamp(1, n));
                let lo = rng.random_range(0..=n - w);
                (lo, lo + w)
            })
            .collect();
        let mut amp = rng.random_range(-1.0..1.0);
        if amp == 0.0 {
            amp = 1.0;
        }
        for (cell, v) in values.iter_mut().enumerate() {
            let inside = sides
                .iter()
                .enumerate()
                .all(|(axis, &(lo, hi))| (lo..hi).contains(&grid.coordinate(cell, axis)));
            if inside {
                *v += amp;
            }
        }
    }
    GridFunction::new(grid, values).expect("finite values")
}

struct TrialOutcome {
    needed: Vec<f64>,
    slack: Vec<(f64, f64)>,
    l1_violations: usize,
    fine: bool,
}

/// Evaluates the two-norm inequality on `trials` random box mixtures for
/// `n = 1..=n_max`. Even trials draw coarse boxes (up to the full grid),
/// odd trials fine ones (at most `N/32` cells a side); comparing the two
/// decides the non-uniformity flag.
pub fn lasota_yorke_check(
    a: &UlamMatrix,
    sigma: f64,
    trials: usize,
    n_max: usize,
    seed: u64,
) -> Result<LYReport> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidParameter {
            name: "sigma".into(),
            value: sigma,
            reason: "must lie in (0, 1)".into(),
        });
    }
    if trials == 0 || n_max == 0 {
        return Err(Error::InsufficientData("need at least one trial and one step".into()));
    }
    let grid = *a.grid();
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let fine = t % 2 == 1;
            let width = if fine { (grid.n() / 32).max(1) } else { grid.n() };
            let mut h = random_box_mixture(grid, &mut rng, width);
            while lp_norm(&h, 1.0) == 0.0 {
                h = random_box_mixture(grid, &mut rng, width);
            }
            let bv0 = bv_norm(&h);
            let l1 = lp_norm(&h, 1.0);
            let mut cur = h.values().to_vec();
            let mut next = vec![0.0; cur.len()];
            let mut needed = Vec::with_capacity(n_max);
            let mut slack = Vec::with_capacity(n_max);
            let mut l1_violations = 0;
            for n in 1..=n_max {
                a.apply_slice(&cur, &mut next);
                std::mem::swap(&mut cur, &mut next);
                let g = GridFunction::new(grid, cur.clone()).expect("finite");
                let excess = bv_norm(&g) - sigma.powi(n as i32) * bv0;
                needed.push((excess / l1).max(0.0));
                slack.push((excess, l1));
                if lp_norm(&g, 1.0) > l1 * (1.0 + 1e-12) + 1e-300 {
                    l1_violations += 1;
                }
            }
            TrialOutcome {
                needed,
                slack,
                l1_violations,
                fine,
            }
        })
        .collect();

    let mut b_by_n = vec![0.0f64; n_max];
    let (mut b_fine, mut b_coarse) = (0.0f64, 0.0f64);
    for o in &outcomes {
        for (k, &b) in o.needed.iter().enumerate() {
            b_by_n[k] = b_by_n[k].max(b);
            if o.fine {
                b_fine = b_fine.max(b);
            } else {
                b_coarse = b_coarse.max(b);
            }
        }
    }
    let b = b_by_n.iter().copied().fold(0.0, f64::max);
    let max_violation = outcomes
        .iter()
        .flat_map(|o| o.slack.iter())
        .map(|&(excess, l1)| excess - b * l1)
        .fold(f64::NEG_INFINITY, f64::max);
    let roughness_ratio = if b_coarse > 0.0 {
        b_fine / b_coarse
    } else if b_fine > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    Ok(LYReport {
        sigma,
        b,
        samples: trials * n_max,
        max_violation,
        l1_violations: outcomes.iter().map(|o| o.l1_violations).sum(),
        b_by_n,
        roughness_ratio,
        non_uniform: trials >= 2 && roughness_ratio > ROUGHNESS_LIMIT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::MapSpec;
    use crate::transfer_op::{assemble_ulam, AssemblyConfig};

    #[test]
    fn identity_is_flagged() {
        let map = MapSpec::named("identity").build().unwrap();
        let a = assemble_ulam(&map, UniformGrid::new(1, 128).unwrap(), AssemblyConfig::lattice(4)).unwrap();
        let r = lasota_yorke_check(&a, 0.9, 20, 6, 1).unwrap();
        assert!(r.non_uniform, "ratio {}", r.roughness_ratio);
        assert_eq!(r.l1_violations, 0);
        // B needed grows like 1 - σⁿ
        assert!(r.b_by_n.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn mixture_is_grid_aligned() {
        let grid = UniformGrid::new(2, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_box_mixture(grid, &mut rng, 16);
        assert!(h.values().iter().any(|&v| v != 0.0));
    }
}
