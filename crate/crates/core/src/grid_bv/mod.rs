//! Piecewise-constant functions on uniform grids of `[0,1]^d`, their
//! bounded-variation norms and the smoothing used in the positivity argument.

mod grid;
pub mod io;
mod mollifier;
mod norms;

pub use grid::{GridFunction, UniformGrid};
pub use mollifier::{
    bump, distortion_check, kernel_weights, mollifier_constant, mollify, DistortionCheck,
};
pub use norms::{
    bv_norm, check_sobolev, gradient_l1, gradient_sup, lp_norm, sobolev_exponent, SobolevCheck,
};
