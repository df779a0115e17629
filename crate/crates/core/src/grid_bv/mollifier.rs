use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{gradient_sup, GridFunction};
use crate::error::{Error, Result};

/// The standard bump `exp(-1/(1-t²))` on `(-1, 1)`, unnormalised.
#[inline]
pub fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

/// Bump tabulated at the grid offsets `k/n`, `|k/n| < δ`, renormalised to
/// sum to one. Entry `radius + k` holds the weight of offset `k`.
pub fn kernel_weights(n: usize, delta: f64) -> Vec<f64> {
    let scale = n as f64 * delta;
    let radius = scale.ceil() as usize;
    let mut w: Vec<f64> = (0..=2 * radius)
        .map(|i| bump((i as f64 - radius as f64) / scale))
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// `C_η` with `‖∇(η̄_δ * h)‖_{L^∞} ≤ C_η δ^{-d} ‖h‖_BV` for every grid the
/// mollifier accepts (`nδ ≥ 2`).
///
/// The discrete bound is `(w_max·nδ)^d`, where `w_max` is the peak tabulated
/// weight; the constant is the sup of that quantity over `nδ`, fitted once.
pub fn mollifier_constant(dim: usize) -> f64 {
    static PEAK: OnceLock<f64> = OnceLock::new();
    let peak = *PEAK.get_or_init(|| {
        let mut best = 0.0f64;
        // nδ from 2 to 64 in steps of 1/64; beyond that the peak has
        // converged to the continuum value to better than 1e-4.
        for step in 0..=62 * 64 {
            let scale = 2.0 + step as f64 / 64.0;
            let radius = scale.ceil() as usize;
            let total: f64 = (0..=2 * radius)
                .map(|i| bump((i as f64 - radius as f64) / scale))
                .sum();
            best = best.max(bump(0.0) / total * scale);
        }
        best * (1.0 + 1e-3)
    });
    peak.powi(dim as i32)
}

/// `h_δ = η̄_δ * h + δ`, with `h` extended by zero outside the cube.
///
/// The product kernel is applied one axis at a time.
pub fn mollify(g: &GridFunction, delta: f64) -> Result<GridFunction> {
    let grid = *g.grid();
    let n = grid.n();
    let min = 2.0 / n as f64;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter {
            name: "delta".into(),
            value: delta,
            reason: "must lie in (0, 1)".into(),
        });
    }
    if delta < min {
        return Err(Error::DeltaTooSmall { delta, min });
    }
    let weights = kernel_weights(n, delta);
    let radius = (weights.len() - 1) / 2;
    let mut current = g.values().to_vec();
    let mut next = vec![0.0; current.len()];
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        for (cell, out) in next.iter_mut().enumerate() {
            let pos = (cell / stride) % n;
            let lo = pos.saturating_sub(radius);
            let hi = (pos + radius).min(n - 1);
            let base = cell - pos * stride;
            let mut acc = 0.0;
            for q in lo..=hi {
                acc += weights[q + radius - pos] * current[base + q * stride];
            }
            *out = acc;
        }
        std::mem::swap(&mut current, &mut next);
    }
    current.iter_mut().for_each(|v| *v += delta);
    GridFunction::new(grid, current)
}

/// Both sides of `h_δ(x) ≤ exp(C_η δ^{-d-1} ‖x - y‖) h_δ(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionCheck {
    pub ratio: f64,
    pub bound: f64,
    /// `‖∇h_δ‖_{L^∞} δ^{d+1} / min h_δ`.
    pub constant: f64,
    pub holds: bool,
}

/// Compares `h_δ(x)/h_δ(y)` with the Lipschitz distortion bound.
///
/// Distances are taken between the centres of the cells containing `x` and
/// `y`, in the ℓ¹ norm: a piecewise-constant function changes only across
/// faces, and a lattice path between the two cells crosses exactly that many
/// faces per unit length.
pub fn distortion_check(h_delta: &GridFunction, x: &[f64], y: &[f64], delta: f64) -> DistortionCheck {
    let grid = h_delta.grid();
    let d = grid.dim() as i32;
    let (cx, cy) = (
        grid.locate(x).expect("x inside the unit cube"),
        grid.locate(y).expect("y inside the unit cube"),
    );
    let ratio = h_delta.values()[cx] / h_delta.values()[cy];
    let distance: f64 = grid
        .cell_center(cx)
        .iter()
        .zip(grid.cell_center(cy))
        .map(|(a, b)| (a - b).abs())
        .sum();
    let floor = h_delta.min();
    let constant = gradient_sup(h_delta) * delta.powi(d + 1) / floor;
    let bound = (constant * delta.powi(-d - 1) * distance).exp();
    DistortionCheck {
        ratio,
        bound,
        constant,
        holds: ratio <= bound * (1.0 + 1e-12),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_bv::{gradient_l1, UniformGrid};

    #[test]
    fn weights_sum_to_one_and_are_symmetric() {
        for (n, delta) in [(16, 0.125), (100, 0.05), (7, 0.9)] {
            let w = kernel_weights(n, delta);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for i in 0..w.len() {
                assert_eq!(w[i], w[w.len() - 1 - i]);
            }
        }
    }

    #[test]
    fn rejects_small_delta() {
        let g = GridFunction::constant(UniformGrid::new(1, 10).unwrap(), 1.0);
        assert!(matches!(
            mollify(&g, 0.1),
            Err(Error::DeltaTooSmall { .. })
        ));
        assert!(mollify(&g, 0.2).is_ok());
    }

    #[test]
    fn constant_interior_is_shifted_constant() {
        let grid = UniformGrid::new(2, 40).unwrap();
        let g = GridFunction::constant(grid, 1.0);
        let delta = 0.1;
        let h = mollify(&g, delta).unwrap();
        for cell in 0..grid.cell_count() {
            let c = grid.cell_center(cell);
            if c.iter().all(|&v| v > delta + 0.5 / 40.0 && v < 1.0 - delta - 0.5 / 40.0) {
                assert!((h.values()[cell] - 1.1).abs() < 1e-12);
            }
            assert!(h.values()[cell] >= delta);
        }
        assert!(gradient_l1(&h) <= crate::grid_bv::bv_norm(&g) + 1e-9);
    }

    #[test]
    fn distortion_same_point() {
        let grid = UniformGrid::new(1, 50).unwrap();
        let h = mollify(&GridFunction::from_fn(grid, |x| 2.0 * x[0]), 0.1).unwrap();
        let c = distortion_check(&h, &[0.3], &[0.3], 0.1);
        assert_eq!(c.ratio, 1.0);
        assert_eq!(c.bound, 1.0);
        assert!(c.holds);
    }
}
