//! Numerical ergodic theory for multidimensional piecewise expanding maps.
//!
//! The transfer operator of a map `T` of the unit cube is discretized on a
//! uniform grid (Ulam's method) and the resulting sparse matrix is used to
//! compute invariant densities, peripheral spectra and correlation decay,
//! to check Lasota–Yorke type inequalities in the discrete BV norm, and to
//! study the dynamics with holes cut around the singularity set.

// `!(x > 0.0)` is used on purpose: it rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid_bv;
pub mod hypothesis;
pub mod map_model;
pub mod open_dynamics;
pub mod spectral;
pub mod transfer_op;

pub use error::{Error, Result};
pub use grid_bv::{GridFunction, UniformGrid};
pub use hypothesis::{HypothesisReport, Verdict};
pub use map_model::{MapSpec, PieceId, PiecewiseMap};
pub use open_dynamics::PositivityCertificate;
pub use spectral::{LYReport, SpectralReport};
pub use transfer_op::{AssemblyConfig, HoleMask, SamplingMode, UlamMatrix};
