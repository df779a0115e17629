//! Piecewise smooth maps of the unit cube.
//!
//! A map is a finite list of open pieces, each carrying a smooth branch that
//! extends to a neighbourhood of the piece. [`MapDynamics`] is the contract a
//! concrete family implements; [`PiecewiseMap`] wraps one with a name and
//! parameter table and adds the domain checks and the generic Newton
//! inversion.

mod affine;
mod builtins;
mod spec;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use affine::{AffineBranch, AffinePieces};
pub use builtins::{Liverani2d, SqrtBranches, Tent, UniformBranches};
pub use spec::{AffinePieceSpec, MapSpec, REGISTRY};

/// Points closer than this to a piece boundary count as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Newton inversion: iteration cap, convergence threshold (∞-norm) and
/// damping factor applied on overshoot.
pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_DAMPING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PieceId(pub usize);

impl fmt::Display for PieceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Descriptor of one smoothness domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub id: PieceId,
    /// Axis-aligned bounding box, one `[lo, hi]` per axis.
    pub bounds: Vec<[f64; 2]>,
    /// A point inside the piece, used as the Newton starting guess.
    pub centroid: Vec<f64>,
}

/// The per-family contract behind a [`PiecewiseMap`].
///
/// `branch_image`, `jacobian` and friends take the piece explicitly and must
/// be defined on a neighbourhood of the piece (the smooth extension of the
/// branch), so that finite differences and Newton steps may leave the piece
/// slightly.
pub trait MapDynamics: Send + Sync + fmt::Debug {
    fn dimension(&self) -> usize;

    fn pieces(&self) -> &[Piece];

    /// The piece containing `x`, or `None` if `x` is within
    /// [`SINGULAR_TOL`] of a piece boundary or outside every piece.
    fn locate(&self, x: &[f64]) -> Option<PieceId>;

    fn branch_image(&self, piece: PieceId, x: &[f64], out: &mut [f64]);

    fn jacobian(&self, piece: PieceId, x: &[f64]) -> DMatrix<f64>;

    fn inverse_jacobian(&self, piece: PieceId, x: &[f64]) -> Option<DMatrix<f64>> {
        self.jacobian(piece, x).try_inverse()
    }

    fn det_jacobian(&self, piece: PieceId, x: &[f64]) -> f64 {
        self.jacobian(piece, x).determinant()
    }

    /// ∞-norm distance from `x` to the union of piece boundaries.
    fn boundary_distance(&self, x: &[f64]) -> f64;

    /// Exhaustive preimages when the family knows them in closed form.
    fn closed_form_preimages(&self, _x: &[f64]) -> Option<Vec<(Vec<f64>, PieceId)>> {
        None
    }
}

/// A named piecewise smooth map `T: Ω → [0,1]^d`.
#[derive(Clone)]
pub struct PiecewiseMap {
    name: String,
    params: BTreeMap<String, f64>,
    dynamics: Arc<dyn MapDynamics>,
}

impl fmt::Debug for PiecewiseMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PiecewiseMap")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("pieces", &self.dynamics.pieces().len())
            .finish()
    }
}

impl PiecewiseMap {
    pub fn new(
        name: impl Into<String>,
        params: BTreeMap<String, f64>,
        dynamics: Arc<dyn MapDynamics>,
    ) -> Self {
        PiecewiseMap {
            name: name.into(),
            params,
            dynamics,
        }
    }

    pub fn from_dynamics<D: MapDynamics + 'static>(name: impl Into<String>, dynamics: D) -> Self {
        Self::new(name, BTreeMap::new(), Arc::new(dynamics))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn dimension(&self) -> usize {
        self.dynamics.dimension()
    }

    pub fn pieces(&self) -> &[Piece] {
        self.dynamics.pieces()
    }

    pub fn dynamics(&self) -> &dyn MapDynamics {
        self.dynamics.as_ref()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        let d = self.dimension();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        if x.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::OutOfDomain(x.to_vec()));
        }
        Ok(())
    }

    /// The piece containing `x`.
    pub fn locate(&self, x: &[f64]) -> Result<PieceId> {
        self.check_point(x)?;
        self.dynamics
            .locate(x)
            .ok_or_else(|| Error::SingularPoint(x.to_vec()))
    }

    /// Writes `T(x)` into `out` and returns the containing piece.
    #[inline]
    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) -> Result<PieceId> {
        let piece = self.locate(x)?;
        self.dynamics.branch_image(piece, x, out);
        Ok(piece)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<(Vec<f64>, PieceId)> {
        let mut out = vec![0.0; self.dimension()];
        let piece = self.evaluate_into(x, &mut out)?;
        Ok((out, piece))
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let piece = self.locate(x)?;
        Ok(self.dynamics.jacobian(piece, x))
    }

    pub fn inverse_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let piece = self.locate(x)?;
        self.dynamics
            .inverse_jacobian(piece, x)
            .ok_or_else(|| Error::SingularPoint(x.to_vec()))
    }

    pub fn det_jacobian(&self, x: &[f64]) -> Result<f64> {
        let piece = self.locate(x)?;
        Ok(self.dynamics.det_jacobian(piece, x))
    }

    /// Distance (∞-norm) from `x` to the singularity set.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        self.dynamics.boundary_distance(x)
    }

    /// All preimages of `x`, one candidate per piece.
    ///
    /// Closed-form families answer directly; otherwise each piece is inverted
    /// by damped Newton from its centroid and the result kept only if it
    /// lands back in that piece. Failed inversions are skipped.
    pub fn preimages(&self, x: &[f64]) -> Result<Vec<(Vec<f64>, PieceId)>> {
        self.check_point(x)?;
        if let Some(found) = self.dynamics.closed_form_preimages(x) {
            return Ok(found);
        }
        Ok(self
            .pieces()
            .iter()
            .filter_map(|piece| {
                let y = newton_invert(self.dynamics.as_ref(), piece, x).ok()?;
                (self.dynamics.locate(&y) == Some(piece.id)).then_some((y, piece.id))
            })
            .collect())
    }
}

/// Why a Newton inversion stopped without converging.
#[derive(Debug, Clone, PartialEq)]
pub enum NewtonFailure {
    SingularJacobian,
    Diverged { residual: f64 },
}

/// Solves `branch(piece, y) = target` by damped Newton iteration.
pub fn newton_invert(
    dynamics: &dyn MapDynamics,
    piece: &Piece,
    target: &[f64],
) -> std::result::Result<Vec<f64>, NewtonFailure> {
    let d = target.len();
    let mut y = piece.centroid.clone();
    let mut image = vec![0.0; d];
    let residual_of = |y: &[f64], image: &mut [f64]| {
        dynamics.branch_image(piece.id, y, image);
        image
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
    };
    let mut residual = residual_of(&y, &mut image);
    for _ in 0..NEWTON_MAX_ITER {
        if residual < NEWTON_TOL {
            return Ok(y);
        }
        let inv = dynamics
            .inverse_jacobian(piece.id, &y)
            .ok_or(NewtonFailure::SingularJacobian)?;
        let rhs = DMatrix::from_fn(d, 1, |i, _| image[i] - target[i]);
        let step = inv * rhs;
        let mut scale = 1.0;
        let mut trial = vec![0.0; d];
        let mut trial_image = vec![0.0; d];
        loop {
            for k in 0..d {
                trial[k] = y[k] - scale * step[k];
            }
            let r = residual_of(&trial, &mut trial_image);
            if r.is_finite() && r < residual || scale < 1e-6 {
                residual = r;
                break;
            }
            scale *= NEWTON_DAMPING;
        }
        y.copy_from_slice(&trial);
        image.copy_from_slice(&trial_image);
        if !residual.is_finite() {
            break;
        }
    }
    if residual < NEWTON_TOL {
        Ok(y)
    } else {
        Err(NewtonFailure::Diverged { residual })
    }
}

/// ∞-norm (maximum absolute row sum) of a matrix.
pub fn matrix_inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Central finite-difference Jacobian of the branch at `x`.
pub fn finite_difference_jacobian(
    dynamics: &dyn MapDynamics,
    piece: PieceId,
    x: &[f64],
    step: f64,
) -> DMatrix<f64> {
    let d = x.len();
    let mut jac = DMatrix::zeros(d, d);
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    let mut xp = x.to_vec();
    for j in 0..d {
        xp[j] = x[j] + step;
        dynamics.branch_image(piece, &xp, &mut plus);
        xp[j] = x[j] - step;
        dynamics.branch_image(piece, &xp, &mut minus);
        xp[j] = x[j];
        for i in 0..d {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    jac
}

/// Distance from a scalar to the nearest of `points`.
pub(crate) fn distance_to_points(x: f64, points: &[f64]) -> f64 {
    points
        .iter()
        .map(|p| (x - p).abs())
        .fold(f64::INFINITY, f64::min)
}
