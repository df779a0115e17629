//! Spectral analysis of an assembled Ulam matrix: invariant densities,
//! leading eigenvalues, Cesàro averages, correlation decay, two-norm
//! inequalities and the ergodic decomposition.

mod density;
mod ergodic;
pub mod krylov;
mod lasota_yorke;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_bv::GridFunction;
use crate::transfer_op::UlamMatrix;

pub use density::{
    acim, cesaro_projector, correlation, correlation_series, decay_rate_fit, Acim, CesaroAverage,
    DecaySeries, CORRELATION_FLOOR,
};
pub use ergodic::{
    cyclic_groups, ergodic_components, leading_subspace, top_spectrum, unit_multiplicity,
    CyclicGroup, CyclicGroups, ErgodicDecomposition, MAX_PERIOD,
};
pub use krylov::{dense_eigenvalues, KrylovOptions};
pub use lasota_yorke::{lasota_yorke_check, random_box_mixture, LYReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    /// Eigenvalues requested from the Krylov solver.
    pub top: usize,
    /// Distance to the unit circle (or to 1) under which eigenvalues count
    /// as peripheral (or as the eigenvalue 1).
    pub tol: f64,
    /// L¹ stopping tolerance of the density iteration.
    pub density_tol: f64,
    pub max_iter: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            top: 6,
            tol: 1e-6,
            density_tol: 1e-12,
            max_iter: 10_000,
        }
    }
}

/// Summary of the spectral picture of one Ulam matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// `[re, im]` of the eigenvalue of largest modulus.
    pub leading_eigenvalue: [f64; 2],
    /// Leading eigenvalues as `[re, im]`, nonincreasing in modulus.
    pub eigenvalues: Vec<[f64; 2]>,
    #[serde(skip)]
    pub invariant_density: Option<GridFunction>,
    /// Largest modulus strictly inside the peripheral annulus, if one was
    /// resolved among the computed eigenvalues.
    pub subdominant_modulus: Option<f64>,
    pub peripheral_eigenvalues: Vec<[f64; 2]>,
    pub cyclic_groups: CyclicGroups,
    pub unit_multiplicity: usize,
    pub ergodic_components: Option<ErgodicDecomposition>,
    /// Why the decomposition failed, if it did.
    pub decomposition_error: Option<String>,
    pub density_iterations: usize,
    pub density_residual: f64,
    pub tol: f64,
}

fn pair(z: &Complex<f64>) -> [f64; 2] {
    [z.re, z.im]
}

/// Computes the leading spectrum, the invariant density and, when the
/// eigenvalue 1 is resolved, the ergodic components.
pub fn analyze(a: &UlamMatrix, opts: &SpectralOptions) -> Result<SpectralReport> {
    let eig = top_spectrum(a, opts.top, opts.tol)?;
    let density = acim(a, opts.density_tol, opts.max_iter)?;
    let peripheral: Vec<Complex<f64>> = eig
        .iter()
        .copied()
        .filter(|z| z.norm() > 1.0 - opts.tol)
        .collect();
    let subdominant_modulus = eig
        .iter()
        .map(|z| z.norm())
        .find(|&m| m <= 1.0 - opts.tol);
    let groups = cyclic_groups(&peripheral, opts.tol.max(1e-9) * 10.0);
    let (components, decomposition_error) = match ergodic_components(a, opts.tol) {
        Ok(c) => (Some(c), None),
        Err(e @ Error::DecompositionAmbiguous { .. }) | Err(e @ Error::InsufficientData(_)) => {
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    Ok(SpectralReport {
        // among several peripheral eigenvalues the one nearest 1 leads
        leading_eigenvalue: peripheral
            .iter()
            .min_by(|x, y| {
                let one = Complex::new(1.0, 0.0);
                (*x - one).norm().total_cmp(&(*y - one).norm())
            })
            .or(eig.first())
            .map(pair)
            .unwrap_or([0.0, 0.0]),
        eigenvalues: eig.iter().map(pair).collect(),
        invariant_density: Some(density.density),
        subdominant_modulus,
        peripheral_eigenvalues: peripheral.iter().map(pair).collect(),
        cyclic_groups: groups,
        unit_multiplicity: unit_multiplicity(&eig, opts.tol),
        ergodic_components: components,
        decomposition_error,
        density_iterations: density.iterations,
        density_residual: density.residual,
        tol: opts.tol,
    })
}
