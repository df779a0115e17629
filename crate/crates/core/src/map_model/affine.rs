use nalgebra::{DMatrix, DVector};

use super::{MapDynamics, Piece, PieceId, SINGULAR_TOL};
use crate::error::{Error, Result};

/// One affine branch `x ↦ M·x + c` on an open box.
#[derive(Debug, Clone)]
pub struct AffineBranch {
    pub bounds: Vec<[f64; 2]>,
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
    inverse: DMatrix<f64>,
    det: f64,
}

impl AffineBranch {
    pub fn new(bounds: Vec<[f64; 2]>, matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let d = bounds.len();
        if d == 0 || matrix.nrows() != d || matrix.ncols() != d || offset.len() != d {
            return Err(Error::InvalidMap(format!(
                "affine piece needs a {d}×{d} matrix and length-{d} offset"
            )));
        }
        for &[lo, hi] in &bounds {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
                return Err(Error::InvalidMap(format!(
                    "box side [{lo}, {hi}] is not a nondegenerate subinterval of [0,1]"
                )));
            }
        }
        let det = matrix.determinant();
        if det.abs() < 1e-14 {
            return Err(Error::InvalidMap("affine piece is not invertible".into()));
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidMap("affine piece is not invertible".into()))?;
        Ok(AffineBranch {
            bounds,
            matrix,
            offset,
            inverse,
            det,
        })
    }

    fn contains_strictly(&self, x: &[f64]) -> bool {
        self.bounds
            .iter()
            .zip(x)
            .all(|(&[lo, hi], &v)| v > lo + SINGULAR_TOL && v < hi - SINGULAR_TOL)
    }

    /// ∞-distance from `x` to the boundary of this box.
    fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        let inside = self
            .bounds
            .iter()
            .zip(x)
            .all(|(&[lo, hi], &v)| v >= lo && v <= hi);
        if inside {
            self.bounds
                .iter()
                .zip(x)
                .map(|(&[lo, hi], &v)| (v - lo).min(hi - v))
                .fold(f64::INFINITY, f64::min)
        } else {
            self.bounds
                .iter()
                .zip(x)
                .map(|(&[lo, hi], &v)| (lo - v).max(v - hi).max(0.0))
                .fold(0.0, f64::max)
        }
    }

    fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.bounds.len();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|k| self.bounds[k][(mask >> k) & 1])
                    .collect()
            })
            .collect()
    }
}

/// A user-supplied finite family of affine branches on disjoint boxes.
#[derive(Debug, Clone)]
pub struct AffinePieces {
    dim: usize,
    branches: Vec<AffineBranch>,
    pieces: Vec<Piece>,
}

impl AffinePieces {
    /// Validates the family: common dimension, pairwise disjoint boxes and
    /// images inside the unit cube.
    pub fn new(branches: Vec<AffineBranch>) -> Result<Self> {
        let Some(first) = branches.first() else {
            return Err(Error::InvalidMap("no pieces given".into()));
        };
        let dim = first.bounds.len();
        if branches.iter().any(|b| b.bounds.len() != dim) {
            return Err(Error::InvalidMap("pieces disagree on dimension".into()));
        }
        for (i, p) in branches.iter().enumerate() {
            for q in &branches[i + 1..] {
                let overlap = p
                    .bounds
                    .iter()
                    .zip(&q.bounds)
                    .all(|(a, b)| a[0].max(b[0]) < a[1].min(b[1]));
                if overlap {
                    return Err(Error::InvalidMap(format!("piece {i} overlaps another piece")));
                }
            }
            for corner in p.corners() {
                let image = &p.matrix * DVector::from_vec(corner) + &p.offset;
                if image.iter().any(|&v| !(-1e-9..=1.0 + 1e-9).contains(&v)) {
                    return Err(Error::InvalidMap(format!(
                        "piece {i} maps outside the unit cube"
                    )));
                }
            }
        }
        let pieces = branches
            .iter()
            .enumerate()
            .map(|(i, b)| Piece {
                id: PieceId(i),
                bounds: b.bounds.clone(),
                centroid: b.bounds.iter().map(|&[lo, hi]| 0.5 * (lo + hi)).collect(),
            })
            .collect();
        Ok(AffinePieces {
            dim,
            branches,
            pieces,
        })
    }

    pub fn branches(&self) -> &[AffineBranch] {
        &self.branches
    }
}

impl MapDynamics for AffinePieces {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    #[inline]
    fn locate(&self, x: &[f64]) -> Option<PieceId> {
        self.branches
            .iter()
            .position(|b| b.contains_strictly(x))
            .map(PieceId)
    }

    #[inline]
    fn branch_image(&self, piece: PieceId, x: &[f64], out: &mut [f64]) {
        let b = &self.branches[piece.0];
        for (i, o) in out.iter_mut().enumerate() {
            *o = b.offset[i]
                + x.iter()
                    .enumerate()
                    .map(|(j, &v)| b.matrix[(i, j)] * v)
                    .sum::<f64>();
        }
    }

    fn jacobian(&self, piece: PieceId, _x: &[f64]) -> DMatrix<f64> {
        self.branches[piece.0].matrix.clone()
    }

    fn inverse_jacobian(&self, piece: PieceId, _x: &[f64]) -> Option<DMatrix<f64>> {
        Some(self.branches[piece.0].inverse.clone())
    }

    fn det_jacobian(&self, piece: PieceId, _x: &[f64]) -> f64 {
        self.branches[piece.0].det
    }

    fn boundary_distance(&self, x: &[f64]) -> f64 {
        self.branches
            .iter()
            .map(|b| b.distance_to_boundary(x))
            .fold(f64::INFINITY, f64::min)
    }
}
