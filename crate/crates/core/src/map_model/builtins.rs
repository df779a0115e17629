use nalgebra::DMatrix;

use super::{distance_to_points, MapDynamics, Piece, PieceId, SINGULAR_TOL};

fn interval_piece(id: usize, lo: f64, hi: f64) -> Piece {
    Piece {
        id: PieceId(id),
        bounds: vec![[lo, hi]],
        centroid: vec![0.5 * (lo + hi)],
    }
}

/// Returns `(floor(u), fract(u))`, or `None` when `u` is within the singular
/// tolerance of an integer.
#[inline]
fn branch_index(u: f64) -> Option<(usize, f64)> {
    let k = u.floor();
    let frac = u - k;
    if !(SINGULAR_TOL..=1.0 - SINGULAR_TOL).contains(&frac) || k < 0.0 {
        None
    } else {
        Some((k as usize, frac))
    }
}

/// Full-branch linear map `x ↦ k·x mod 1` (ternary for `k = 3`, doubling for
/// `k = 2`).
#[derive(Debug, Clone)]
pub struct UniformBranches {
    slope: usize,
    pieces: Vec<Piece>,
    breakpoints: Vec<f64>,
}

impl UniformBranches {
    pub fn new(slope: usize) -> Self {
        assert!(slope >= 1);
        let k = slope as f64;
        let pieces = (0..slope)
            .map(|i| interval_piece(i, i as f64 / k, (i + 1) as f64 / k))
            .collect();
        let breakpoints = (0..=slope).map(|i| i as f64 / k).collect();
        UniformBranches {
            slope,
            pieces,
            breakpoints,
        }
    }
}

impl MapDynamics for UniformBranches {
    fn dimension(&self) -> usize {
        1
    }

    fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    #[inline]
    fn locate(&self, x: &[f64]) -> Option<PieceId> {
        let (i, _) = branch_index(self.slope as f64 * x[0])?;
        (i < self.slope).then_some(PieceId(i))
    }

    #[inline]
    fn branch_image(&self, piece: PieceId, x: &[f64], out: &mut [f64]) {
        out[0] = self.slope as f64 * x[0] - piece.0 as f64;
    }

    fn jacobian(&self, _piece: PieceId, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.slope as f64)
    }

    fn boundary_distance(&self, x: &[f64]) -> f64 {
        distance_to_points(x[0], &self.breakpoints)
    }

    fn closed_form_preimages(&self, x: &[f64]) -> Option<Vec<(Vec<f64>, PieceId)>> {
        let k = self.slope as f64;
        Some(
            (0..self.slope)
                .map(|i| (vec![(x[0] + i as f64) / k], PieceId(i)))
                .collect(),
        )
    }
}

/// The tent map `x ↦ 1 − |1 − 2x|`.
#[derive(Debug, Clone)]
pub struct Tent {
    pieces: Vec<Piece>,
}

impl Default for Tent {
    fn default() -> Self {
        Tent {
            pieces: vec![interval_piece(0, 0.0, 0.5), interval_piece(1, 0.5, 1.0)],
        }
    }
}

impl MapDynamics for Tent {
    fn dimension(&self) -> usize {
        1
    }

    fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    #[inline]
    fn locate(&self, x: &[f64]) -> Option<PieceId> {
        let (i, _) = branch_index(2.0 * x[0])?;
        (i < 2).then_some(PieceId(i))
    }

    #[inline]
    fn branch_image(&self, piece: PieceId, x: &[f64], out: &mut [f64]) {
        out[0] = if piece.0 == 0 {
            2.0 * x[0]
        } else {
            2.0 - 2.0 * x[0]
        };
    }

    fn jacobian(&self, piece: PieceId, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, if piece.0 == 0 { 2.0 } else { -2.0 })
    }

    fn boundary_distance(&self, x: &[f64]) -> f64 {
        distance_to_points(x[0], &[0.0, 0.5, 1.0])
    }

    fn closed_form_preimages(&self, x: &[f64]) -> Option<Vec<(Vec<f64>, PieceId)>> {
        Some(vec![
            (vec![0.5 * x[0]], PieceId(0)),
            (vec![1.0 - 0.5 * x[0]], PieceId(1)),
        ])
    }
}

/// `x ↦ a·√x mod 1` on the unit interval.
#[derive(Debug, Clone)]
pub struct SqrtBranches {
    a: f64,
    pieces: Vec<Piece>,
    breakpoints: Vec<f64>,
}

impl SqrtBranches {
    pub fn new(a: f64) -> Self {
        assert!(a > 1.0);
        let count = a.ceil() as usize;
        let edge = |k: usize| ((k as f64 / a).powi(2)).min(1.0);
        let pieces = (0..count)
            .map(|k| interval_piece(k, edge(k), edge(k + 1)))
            .collect();
        let breakpoints = (0..=count).map(edge).collect();
        SqrtBranches {
            a,
            pieces,
            breakpoints,
        }
    }
}

impl MapDynamics for SqrtBranches {
    fn dimension(&self) -> usize {
        1
    }

    fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    #[inline]
    fn locate(&self, x: &[f64]) -> Option<PieceId> {
        let (k, _) = branch_index(self.a * x[0].sqrt())?;
        (k < self.pieces.len()).then_some(PieceId(k))
    }

    #[inline]
    fn branch_image(&self, piece: PieceId, x: &[f64], out: &mut [f64]) {
        out[0] = self.a * x[0].sqrt() - piece.0 as f64;
    }

    fn jacobian(&self, _piece: PieceId, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.a / (2.0 * x[0].sqrt()))
    }

    fn inverse_jacobian(&self, _piece: PieceId, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, 2.0 * x[0].sqrt() / self.a))
    }

    fn det_jacobian(&self, _piece: PieceId, x: &[f64]) -> f64 {
        self.a / (2.0 * x[0].sqrt())
    }

    fn boundary_distance(&self, x: &[f64]) -> f64 {
        distance_to_points(x[0], &self.breakpoints)
    }

    fn closed_form_preimages(&self, x: &[f64]) -> Option<Vec<(Vec<f64>, PieceId)>> {
        Some(
            (0..self.pieces.len())
                .filter_map(|k| {
                    let root = (x[0] + k as f64) / self.a;
                    (root < 1.0).then(|| (vec![root * root], PieceId(k)))
                })
                .collect(),
        )
    }
}

/// `T(x, y) = (a√x, b·y + √x) mod 1` on the unit square.
///
/// Pieces are indexed by the integer parts `(i, j)` of the two unreduced
/// coordinates. The singularity set consists of the square's sides, the
/// vertical lines `x = (i/a)²` and the curves `y = (j − √x)/b`.
#[derive(Debug, Clone)]
pub struct Liverani2d {
    a: f64,
    b: f64,
    x_branches: usize,
    y_branches: usize,
    /// `lookup[i * y_branches + j]` is the piece index of branch `(i, j)`.
    lookup: Vec<Option<usize>>,
    branch_of: Vec<(usize, usize)>,
    pieces: Vec<Piece>,
    vertical_lines: Vec<f64>,
}

impl Liverani2d {
    pub fn new(a: f64, b: f64) -> Self {
        assert!(a > 1.0 && b > 1.0);
        let x_branches = a.ceil() as usize;
        // v = b·y + √x ranges over (0, b + 1).
        let y_branches = (b + 1.0).ceil() as usize;
        let mut lookup = vec![None; x_branches * y_branches];
        let mut branch_of = Vec::new();
        let mut pieces = Vec::new();
        for i in 0..x_branches {
            let x_lo = (i as f64 / a).powi(2);
            let x_hi = ((i + 1) as f64 / a).powi(2).min(1.0);
            for j in 0..y_branches {
                // y-interval at the horizontal midpoint; the piece exists iff
                // it is nonempty somewhere in [x_lo, x_hi].
                let y_at = |x: f64| {
                    let s = x.sqrt();
                    (
                        ((j as f64 - s) / b).max(0.0),
                        ((j as f64 + 1.0 - s) / b).min(1.0),
                    )
                };
                let candidates = [0.5 * (x_lo + x_hi), x_lo + 1e-9, x_hi - 1e-9];
                let Some((xc, (ylo, yhi))) = candidates
                    .iter()
                    .map(|&x| (x, y_at(x)))
                    .find(|(_, (lo, hi))| hi - lo > 1e-12)
                else {
                    continue;
                };
                let id = pieces.len();
                lookup[i * y_branches + j] = Some(id);
                branch_of.push((i, j));
                let (lo_all, _) = y_at(x_hi);
                let (_, hi_all) = y_at(x_lo);
                pieces.push(Piece {
                    id: PieceId(id),
                    bounds: vec![[x_lo, x_hi], [lo_all, hi_all]],
                    centroid: vec![xc, 0.5 * (ylo + yhi)],
                });
            }
        }
        let vertical_lines = (1..x_branches)
            .map(|i| (i as f64 / a).powi(2))
            .filter(|&x| x < 1.0)
            .collect();
        Liverani2d {
            a,
            b,
            x_branches,
            y_branches,
            lookup,
            branch_of,
            pieces,
            vertical_lines,
        }
    }

    pub fn branch(&self, piece: PieceId) -> (usize, usize) {
        self.branch_of[piece.0]
    }

    /// ∞-distance from `(px, py)` to the curve `y = (j − √s)/b`, `s ∈ [0,1]`,
    /// restricted to the part inside the unit square.
    fn curve_distance(&self, j: usize, px: f64, py: f64) -> f64 {
        let jf = j as f64;
        let s_lo = (jf - self.b).max(0.0).powi(2);
        if s_lo >= 1.0 {
            return f64::INFINITY;
        }
        let g = |s: f64| (jf - s.sqrt()) / self.b;
        let cost = |s: f64| (s - px).abs().max((g(s) - py).abs());
        // quasiconvex in s: golden-section search
        let (mut lo, mut hi) = (s_lo, 1.0);
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let mut f1 = cost(x1);
        let mut f2 = cost(x2);
        for _ in 0..90 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = cost(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = cost(x2);
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        cost(s_lo).min(cost(1.0)).min(f1).min(f2)
    }
}

impl MapDynamics for Liverani2d {
    fn dimension(&self) -> usize {
        2
    }

    fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    #[inline]
    fn locate(&self, x: &[f64]) -> Option<PieceId> {
        if !(x[0] > 0.0 && x[0] < 1.0 && x[1] > 0.0 && x[1] < 1.0) {
            return None;
        }
        let s = x[0].sqrt();
        let (i, _) = branch_index(self.a * s)?;
        let (j, _) = branch_index(self.b * x[1] + s)?;
        if i >= self.x_branches || j >= self.y_branches {
            return None;
        }
        self.lookup[i * self.y_branches + j].map(PieceId)
    }

    #[inline]
    fn branch_image(&self, piece: PieceId, x: &[f64], out: &mut [f64]) {
        let (i, j) = self.branch_of[piece.0];
        let s = x[0].sqrt();
        out[0] = self.a * s - i as f64;
        out[1] = self.b * x[1] + s - j as f64;
    }

    fn jacobian(&self, _piece: PieceId, x: &[f64]) -> DMatrix<f64> {
        let s = x[0].sqrt();
        DMatrix::from_row_slice(2, 2, &[self.a / (2.0 * s), 0.0, 1.0 / (2.0 * s), self.b])
    }

    fn inverse_jacobian(&self, _piece: PieceId, x: &[f64]) -> Option<DMatrix<f64>> {
        let s = x[0].sqrt();
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[
                2.0 * s / self.a,
                0.0,
                -1.0 / (self.a * self.b),
                1.0 / self.b,
            ],
        ))
    }

    fn det_jacobian(&self, _piece: PieceId, x: &[f64]) -> f64 {
        self.a * self.b / (2.0 * x[0].sqrt())
    }

    fn boundary_distance(&self, x: &[f64]) -> f64 {
        let (px, py) = (x[0], x[1]);
        let mut best = px.min(1.0 - px).min(py).min(1.0 - py).max(0.0);
        for &line in &self.vertical_lines {
            best = best.min((px - line).abs());
        }
        for j in 1..self.y_branches + 1 {
            // curve j occupies the band y ∈ [(j−1)/b, j/b]
            let band_lo = (j as f64 - 1.0) / self.b;
            let band_hi = j as f64 / self.b;
            let gap = (band_lo - py).max(py - band_hi).max(0.0);
            if gap >= best {
                continue;
            }
            best = best.min(self.curve_distance(j, px, py));
        }
        best
    }

    fn closed_form_preimages(&self, x: &[f64]) -> Option<Vec<(Vec<f64>, PieceId)>> {
        let mut out = Vec::new();
        for i in 0..self.x_branches {
            let s = (x[0] + i as f64) / self.a;
            if s >= 1.0 {
                continue;
            }
            for j in 0..self.y_branches {
                let y = (x[1] + j as f64 - s) / self.b;
                if !(y > 0.0 && y < 1.0) {
                    continue;
                }
                if let Some(id) = self.lookup[i * self.y_branches + j] {
                    out.push((vec![s * s, y], PieceId(id)));
                }
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_boundary_distance(map: &Liverani2d, p: [f64; 2], samples: usize) -> f64 {
        let mut best = p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1]);
        for &line in &map.vertical_lines {
            best = best.min((p[0] - line).abs());
        }
        for j in 1..=map.y_branches {
            for k in 0..=samples {
                let s = k as f64 / samples as f64;
                let y = (j as f64 - s.sqrt()) / map.b;
                if (0.0..=1.0).contains(&y) {
                    best = best.min((s - p[0]).abs().max((y - p[1]).abs()));
                }
            }
        }
        best
    }

    #[test]
    fn liverani_boundary_distance_matches_sampling() {
        let map = Liverani2d::new(7.0, 7.0);
        let samples = 200_000;
        for &p in &[[0.25, 0.4], [0.9, 0.05], [0.01, 0.7], [0.5, 0.5], [0.77, 0.93]] {
            let exact = map.boundary_distance(&p);
            let brute = brute_force_boundary_distance(&map, p, samples);
            assert!(exact <= brute + 1e-12, "{p:?}: {exact} vs {brute}");
            assert!(brute - exact <= 2.0 / samples as f64, "{p:?}: {exact} vs {brute}");
        }
    }

    #[test]
    fn liverani_pieces_cover_square() {
        let map = Liverani2d::new(7.0, 7.0);
        assert!(map.pieces.len() <= 7 * 8);
        for &(x, y) in &[(0.25, 0.4), (0.01, 0.01), (0.99, 0.99), (0.6, 0.3)] {
            assert!(map.locate(&[x, y]).is_some());
        }
    }

    #[test]
    fn sqrt_pieces() {
        let m = SqrtBranches::new(7.0);
        assert_eq!(m.pieces.len(), 7);
        assert_eq!(m.locate(&[0.25]), Some(PieceId(3)));
    }
}
