//! Numerical checks of the standing assumptions on a piecewise expanding
//! map, and the constants (`λ`, `δ`, `α`, `C`, `a`, `ν₀`) they supply to
//! the rest of the library.
//!
//! The assumptions are analytic statements; sampling can refute some of
//! them but confirm none. Verdicts say which of the two happened.

mod checks;
mod lines;
mod sampling;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::map_model::PiecewiseMap;

pub use checks::{
    check_h0, check_h5_integrability, check_h6_scaling, check_structure, estimate_nu0,
    IntegrabilityCheck, OrbitCheck, ProductMean, ScalingCheck,
};
pub use sampling::linear_fit;
pub use lines::{
    check_h3_expansion, check_h4_boundary_integral, BoundaryIntegralCheck, ExpansionCheck,
    LineInterval, LINE_RESOLUTION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Holds by construction of the map family.
    VerifiedStructurally,
    /// Sampling found nothing against it.
    Consistent,
    /// Sampling refutes it.
    Violated,
    NotCheckable,
}

impl Verdict {
    pub fn is_violated(self) -> bool {
        self == Verdict::Violated
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::VerifiedStructurally => "verified-structurally",
            Verdict::Consistent => "consistent",
            Verdict::Violated => "violated",
            Verdict::NotCheckable => "not-checkable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub verdict: Verdict,
    pub evidence: String,
}

impl HypothesisCheck {
    pub fn new(verdict: Verdict, evidence: impl Into<String>) -> Self {
        HypothesisCheck {
            verdict,
            evidence: evidence.into(),
        }
    }
}

/// Sampling budgets and grids for [`check_all`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisOptions {
    pub seed: u64,
    /// Uniform samples for the collar, integrability and `ν₀` estimates.
    pub samples: usize,
    /// Anchored lines per axis for the window sums and collar integrals.
    pub lines: usize,
    pub orbit_samples: usize,
    pub orbit_steps: usize,
    pub deltas: Vec<f64>,
    pub boundary_eps: Vec<f64>,
    pub collar_eps: Vec<f64>,
}

impl Default for HypothesisOptions {
    fn default() -> Self {
        HypothesisOptions {
            seed: 0,
            samples: 1 << 18,
            lines: 64,
            orbit_samples: 20_000,
            orbit_steps: 10,
            deltas: vec![1e-4, 1e-3, 1e-2, 5e-2],
            boundary_eps: vec![0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001],
            collar_eps: vec![1e-3, 2e-3, 4e-3, 8e-3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub map: String,
    pub params: BTreeMap<String, f64>,
    pub dimension: usize,
    /// Verdicts indexed by hypothesis number, 0 through 6.
    pub verdicts: Vec<HypothesisCheck>,
    /// Expansion factor and window size; absent unless the window sum
    /// stayed below 1.
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub c: Option<f64>,
    pub a: Option<f64>,
    pub nu0: f64,
    /// Midpoint of `(ν₀^{1/a}, 1)`, absent when that interval is empty.
    pub nu_default: Option<f64>,
    pub orbits: OrbitCheck,
    pub expansion: ExpansionCheck,
    pub boundary_integral: BoundaryIntegralCheck,
    pub integrability: IntegrabilityCheck,
    pub scaling: ScalingCheck,
}

impl HypothesisReport {
    pub fn verdict(&self, hypothesis: usize) -> Verdict {
        self.verdicts[hypothesis].verdict
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::error::Error::Format(e.to_string()))
    }
}

/// Runs every check and assembles the report.
pub fn check_all(map: &PiecewiseMap, opts: &HypothesisOptions) -> Result<HypothesisReport> {
    let seed = opts.seed;
    let orbits = check_h0(map, opts.orbit_steps, opts.orbit_samples, seed);
    let (h1, h2) = check_structure(map, 4096.min(opts.samples), seed);
    let expansion = check_h3_expansion(map, &opts.deltas, opts.lines, seed)?;
    let boundary_integral = check_h4_boundary_integral(map, &opts.boundary_eps, opts.lines, seed)?;
    let integrability = check_h5_integrability(map, opts.samples, seed)?;
    let scaling = check_h6_scaling(map, &opts.collar_eps, opts.samples, seed)?;
    let nu0 = estimate_nu0(map, opts.samples, seed);

    let verdicts = vec![
        HypothesisCheck::new(
            orbits.verdict,
            format!(
                "{} of {} orbits met the singular set within {} steps",
                orbits.hits, orbits.samples, orbits.n_max
            ),
        ),
        h1,
        h2,
        HypothesisCheck::new(
            expansion.verdict,
            format!(
                "window sum {:.6} at δ = {:e} over {} lines",
                expansion.window_sum, expansion.delta, expansion.lines
            ),
        ),
        HypothesisCheck::new(
            boundary_integral.verdict,
            format!(
                "collar integrals {:?} for ε = {:?}",
                boundary_integral.values, boundary_integral.eps
            ),
        ),
        HypothesisCheck::new(
            integrability.verdict,
            format!(
                "largest product mean {:.6} over {} samples",
                integrability.estimate, integrability.samples
            ),
        ),
        HypothesisCheck::new(
            scaling.verdict,
            format!(
                "collar exponent {:.4}, blow-up exponent {}",
                scaling.alpha_fitted,
                scaling
                    .a_fitted
                    .map_or("n/a (no gradient)".to_string(), |a| format!("{a:.4}"))
            ),
        ),
    ];

    let refuse = expansion.verdict.is_violated() && scaling.verdict.is_violated();
    let expanding = expansion.verdict == Verdict::Consistent;
    let scaled = !refuse && scaling.verdict != Verdict::NotCheckable;
    let a = scaled.then_some(scaling.a);
    let bound = nu0.powf(1.0 / a.unwrap_or(1.0));
    Ok(HypothesisReport {
        map: map.name().to_string(),
        params: map.params().clone(),
        dimension: map.dimension(),
        verdicts,
        lambda: (expanding && !refuse).then_some(expansion.lambda),
        delta: (expanding && !refuse).then_some(expansion.delta),
        alpha: scaled.then_some(scaling.alpha),
        c: scaled.then_some(scaling.c),
        a,
        nu0,
        nu_default: (bound < 1.0).then_some(0.5 * (bound + 1.0)),
        orbits,
        expansion,
        boundary_integral,
        integrability,
        scaling,
    })
}

#[cfg(test)]
mod tests;
