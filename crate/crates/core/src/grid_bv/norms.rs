use serde::{Deserialize, Serialize};

use super::{GridFunction, UniformGrid};

/// Visits every face orthogonal to each axis, passing the jump across it.
/// Boundary faces of the cube see the zero extension.
fn for_each_face(g: &GridFunction, include_boundary: bool, mut visit: impl FnMut(f64)) {
    let grid = g.grid();
    let n = grid.n();
    let v = g.values();
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        for (cell, &value) in v.iter().enumerate() {
            let pos = (cell / stride) % n;
            if pos == 0 && include_boundary {
                visit(value);
            }
            if pos + 1 < n {
                visit(v[cell + stride] - value);
            } else if include_boundary {
                visit(-value);
            }
        }
    }
}

/// Total variation of the zero extension of `g` to `ℝ^d`: the sum over all
/// cell faces, including the faces on `∂[0,1]^d`, of `|jump| × face area`.
pub fn bv_norm(g: &GridFunction) -> f64 {
    let mut total = 0.0;
    for_each_face(g, true, |jump| total += jump.abs());
    total * g.grid().face_area()
}

/// Variation across interior faces only: the discrete `‖∇g‖_{L¹}`.
pub fn gradient_l1(g: &GridFunction) -> f64 {
    let mut total = 0.0;
    for_each_face(g, false, |jump| total += jump.abs());
    total * g.grid().face_area()
}

/// Largest forward-difference slope across interior faces: the discrete
/// `‖∇g‖_{L^∞}`.
pub fn gradient_sup(g: &GridFunction) -> f64 {
    let mut worst = 0.0f64;
    for_each_face(g, false, |jump| worst = worst.max(jump.abs()));
    worst * g.grid().n() as f64
}

/// `‖g‖_{L^p}`; pass `f64::INFINITY` for the sup norm.
pub fn lp_norm(g: &GridFunction, p: f64) -> f64 {
    assert!(p >= 1.0, "L^p needs p >= 1, got {p}");
    if p.is_infinite() {
        return g.values().iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let vol = g.grid().cell_volume();
    if p == 1.0 {
        return g.values().iter().map(|v| v.abs()).sum::<f64>() * vol;
    }
    let sum: f64 = g.values().iter().map(|v| v.abs().powf(p)).sum();
    (sum * vol).powf(1.0 / p)
}

/// The Sobolev exponent `d/(d-1)` (∞ in one dimension).
pub fn sobolev_exponent(grid: &UniformGrid) -> f64 {
    let d = grid.dim() as f64;
    if grid.dim() == 1 {
        f64::INFINITY
    } else {
        d / (d - 1.0)
    }
}

/// Both sides of `‖1_A g‖_{L¹} ≤ m(A)^{1/d} ‖g‖_{L^{d/(d-1)}} ≤ C_d m(A)^{1/d} ‖g‖_BV`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevCheck {
    /// `‖1_A g‖_{L¹}`.
    pub lhs: f64,
    /// `m(A)^{1/d} ‖g‖_{L^{d/(d-1)}}`.
    pub middle: f64,
    /// `‖g‖_{L^{d/(d-1)}} / ‖g‖_BV`, the smallest `C_d` consistent with `g`.
    pub constant: f64,
    /// Whether the Hölder half holds.
    pub holds: bool,
}

/// Evaluates the Hölder/Sobolev chain for `g` on the cell set `cells`.
pub fn check_sobolev(g: &GridFunction, cells: &[usize]) -> SobolevCheck {
    let grid = g.grid();
    let vol = grid.cell_volume();
    let d = grid.dim() as f64;
    let lhs: f64 = cells.iter().map(|&c| g.values()[c].abs()).sum::<f64>() * vol;
    let measure = cells.len() as f64 * vol;
    let strong = lp_norm(g, sobolev_exponent(grid));
    let middle = measure.powf(1.0 / d) * strong;
    let bv = bv_norm(g);
    let constant = if bv > 0.0 { strong / bv } else { 0.0 };
    SobolevCheck {
        lhs,
        middle,
        constant,
        holds: lhs <= middle * (1.0 + 1e-12) + 1e-300,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(d: usize, n: usize) -> UniformGrid {
        UniformGrid::new(d, n).unwrap()
    }

    #[test]
    fn single_cell_indicator() {
        let g2 = grid(2, 10);
        let one = GridFunction::indicator(g2, &[g2.linear_index(&[4, 6])]);
        assert_abs_diff_eq!(bv_norm(&one), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(lp_norm(&one, 1.0), 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(lp_norm(&one, 2.0), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn constant_has_perimeter_variation() {
        for n in [2, 7, 32] {
            let c = GridFunction::constant(grid(2, n), 1.0);
            assert_abs_diff_eq!(bv_norm(&c), 4.0, epsilon = 1e-12);
            assert_abs_diff_eq!(lp_norm(&c, 1.0), 1.0, epsilon = 1e-12);
            assert_eq!(gradient_l1(&c), 0.0);
        }
    }

    #[test]
    fn interval_indicator_1d() {
        let g = GridFunction::indicator(grid(1, 8), &[3, 4]);
        assert_abs_diff_eq!(bv_norm(&g), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn rectangle_indicator_is_its_perimeter() {
        // sides 3/8 by 5/8 on an 8x8 grid
        let gr = grid(2, 8);
        let cells: Vec<usize> = (1..4)
            .flat_map(|i| (2..7).map(move |j| (i, j)))
            .map(|(i, j)| gr.linear_index(&[i, j]))
            .collect();
        let g = GridFunction::indicator(gr, &cells);
        assert_abs_diff_eq!(bv_norm(&g), 2.0 * (3.0 / 8.0 + 5.0 / 8.0), epsilon = 1e-14);
    }

    #[test]
    fn sobolev_on_one_cell() {
        let g2 = grid(2, 10);
        let c = g2.linear_index(&[3, 3]);
        let one = GridFunction::indicator(g2, &[c]);
        let check = check_sobolev(&one, &[c]);
        assert_abs_diff_eq!(check.lhs, 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(check.middle, 0.01, epsilon = 1e-15);
        assert!(check.holds);
    }

    #[test]
    fn sobolev_of_zero() {
        let z = GridFunction::zeros(grid(2, 4));
        let check = check_sobolev(&z, &[0, 1]);
        assert_eq!((check.lhs, check.middle, check.constant), (0.0, 0.0, 0.0));
    }
}
