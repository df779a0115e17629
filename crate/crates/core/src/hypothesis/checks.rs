//! Sampling checks: null-set orbits, branch smoothness, integrability of
//! the Jacobian products, collar scaling and the contraction constant.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::{linear_fit, uniform_points};
use super::{HypothesisCheck, Verdict};
use crate::error::{Error, Result};
use crate::map_model::{finite_difference_jacobian, matrix_inf_norm, PiecewiseMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitCheck {
    pub samples: usize,
    pub n_max: usize,
    /// Orbits that met the singularity set within `n_max` steps.
    pub hits: usize,
    pub verdict: Verdict,
}

/// Fraction above which singular hits are taken as positive measure
/// rather than rounding accidents.
const HIT_FRACTION_LIMIT: f64 = 1e-3;

/// Follows `samples` random orbits for `n_max` steps and counts those that
/// land within the singular tolerance of a piece boundary (or on the
/// boundary of the cube).
///
/// A null set cannot be confirmed by sampling, so the best outcome is
/// "consistent".
pub fn check_h0(map: &PiecewiseMap, n_max: usize, samples: usize, seed: u64) -> OrbitCheck {
    let d = map.dimension();
    let pts = uniform_points(d, samples, seed, 0x4830);
    let hits = pts
        .par_chunks(d)
        .filter(|x| {
            let mut cur = x.to_vec();
            let mut next = vec![0.0; d];
            for _ in 0..=n_max {
                if map.evaluate_into(&cur, &mut next).is_err() {
                    return true;
                }
                std::mem::swap(&mut cur, &mut next);
            }
            false
        })
        .count();
    let fraction = hits as f64 / samples.max(1) as f64;
    OrbitCheck {
        samples,
        n_max,
        hits,
        verdict: if fraction > HIT_FRACTION_LIMIT {
            Verdict::Violated
        } else {
            Verdict::Consistent
        },
    }
}

/// Smoothness of the branches (finite differences agree with the stated
/// Jacobian, which is invertible with the stated inverse) and continuity
/// of `(DT)^{-1}` up to the piece boundaries (values stay finite and
/// bounded on points ever closer to the boundary).
pub fn check_structure(map: &PiecewiseMap, samples: usize, seed: u64) -> (HypothesisCheck, HypothesisCheck) {
    let d = map.dimension();
    let dynamics = map.dynamics();
    let pts = uniform_points(d, samples, seed, 0x4831);
    struct Probe {
        jac_err: f64,
        inv_err: f64,
        near: Option<f64>,
        far: Option<f64>,
    }
    let probes: Vec<Probe> = pts
        .par_chunks(d)
        .filter_map(|x| {
            let piece = dynamics.locate(x)?;
            let dist = dynamics.boundary_distance(x);
            let jac = dynamics.jacobian(piece, x);
            let scale = matrix_inf_norm(&jac).max(1.0);
            let fd = finite_difference_jacobian(dynamics, piece, x, (0.25 * dist).clamp(1e-10, 1e-6));
            let jac_err = matrix_inf_norm(&(&fd - &jac)) / scale;
            let inv = dynamics.inverse_jacobian(piece, x);
            let inv_err = match &inv {
                Some(m) => matrix_inf_norm(&(&jac * m - DMatrix::<f64>::identity(d, d))),
                None => f64::INFINITY,
            };
            let norm = inv.as_ref().map_or(f64::INFINITY, matrix_inf_norm);
            let near = (dist < 1e-3).then_some(norm);
            let far = (dist >= 1e-3).then_some(norm);
            Some(Probe {
                jac_err: if dist > 1e-4 { jac_err } else { 0.0 },
                inv_err,
                near,
                far,
            })
        })
        .collect();
    let jac_err = probes.iter().map(|p| p.jac_err).fold(0.0, f64::max);
    let inv_err = probes.iter().map(|p| p.inv_err).fold(0.0, f64::max);
    let h1 = if probes.is_empty() {
        HypothesisCheck::new(Verdict::NotCheckable, "no sample fell inside a piece")
    } else if jac_err <= 1e-4 && inv_err <= 1e-8 {
        HypothesisCheck::new(
            Verdict::VerifiedStructurally,
            format!(
                "{} points: finite-difference Jacobian error {jac_err:.1e}, inverse error {inv_err:.1e}",
                probes.len()
            ),
        )
    } else {
        HypothesisCheck::new(
            Verdict::Violated,
            format!("finite-difference Jacobian error {jac_err:.1e}, inverse error {inv_err:.1e}"),
        )
    };
    let near = probes.iter().filter_map(|p| p.near).fold(0.0, f64::max);
    let far = probes.iter().filter_map(|p| p.far).fold(0.0, f64::max);
    let h2 = if !(near.is_finite() && far.is_finite()) {
        HypothesisCheck::new(Verdict::Violated, "(DT)^-1 is singular somewhere in a piece")
    } else if near > 1e3 * far.max(1.0) {
        HypothesisCheck::new(
            Verdict::Violated,
            format!("(DT)^-1 grows towards the boundary: {near:.3e} near, {far:.3e} away"),
        )
    } else {
        HypothesisCheck::new(
            Verdict::VerifiedStructurally,
            format!("(DT)^-1 bounded up to the boundary: sup {near:.4} near, {far:.4} away"),
        )
    };
    (h1, h2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMean {
    /// `(k, j, i)` of `(DT)_{kj} [(DT)^{-1}]_{ji}`.
    pub index: [usize; 3],
    pub mean: f64,
    /// Relative change over the last doubling of the sample count.
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityCheck {
    pub products: Vec<ProductMean>,
    /// Largest mean over all index triples.
    pub estimate: f64,
    pub samples: usize,
    pub verdict: Verdict,
}

const H5_CHUNK: usize = 1024;
const H5_DRIFT_LIMIT: f64 = 0.01;

/// Monte Carlo means of `|(DT)_{kj} [(DT)^{-1}]_{ji}|` for every triple,
/// checked for stability over the last doubling of the sample count.
pub fn check_h5_integrability(map: &PiecewiseMap, samples: usize, seed: u64) -> Result<IntegrabilityCheck> {
    let d = map.dimension();
    let dynamics = map.dynamics();
    let samples = samples.next_multiple_of(H5_CHUNK);
    if samples < 2 * H5_CHUNK {
        return Err(Error::InsufficientData("need at least 2048 samples".into()));
    }
    let pts = uniform_points(d, samples, seed, 0x4835);
    let triples = d * d * d;
    // per-chunk sums, combined in order afterwards
    let chunk_sums: Vec<Vec<f64>> = pts
        .par_chunks(H5_CHUNK * d)
        .map(|chunk| {
            let mut acc = vec![0.0; triples];
            for x in chunk.chunks(d) {
                let Some(piece) = dynamics.locate(x) else { continue };
                let jac = dynamics.jacobian(piece, x);
                let Some(inv) = dynamics.inverse_jacobian(piece, x) else {
                    acc.iter_mut().for_each(|a| *a = f64::INFINITY);
                    continue;
                };
                for k in 0..d {
                    for j in 0..d {
                        for i in 0..d {
                            acc[(k * d + j) * d + i] += (jac[(k, j)] * inv[(j, i)]).abs();
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let half = samples / 2;
    let mut first = vec![0.0; triples];
    let mut total = vec![0.0; triples];
    for (c, s) in chunk_sums.iter().enumerate() {
        for t in 0..triples {
            total[t] += s[t];
            if (c + 1) * H5_CHUNK <= half {
                first[t] += s[t];
            }
        }
    }
    let mut products = Vec::with_capacity(triples);
    for t in 0..triples {
        let mean = total[t] / samples as f64;
        let prev = first[t] / half as f64;
        let drift = if mean.abs() <= 1e-12 && prev.abs() <= 1e-12 {
            0.0
        } else {
            (mean - prev).abs() / mean.abs().max(prev.abs())
        };
        products.push(ProductMean {
            index: [t / (d * d), (t / d) % d, t % d],
            mean,
            drift,
        });
    }
    let estimate = products.iter().map(|p| p.mean).fold(0.0, f64::max);
    let stable = products
        .iter()
        .all(|p| p.mean.is_finite() && p.drift < H5_DRIFT_LIMIT);
    Ok(IntegrabilityCheck {
        products,
        estimate,
        samples,
        verdict: if stable {
            Verdict::Consistent
        } else {
            Verdict::Violated
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    /// Collar exponent capped at 1, and the raw fit.
    pub alpha: f64,
    pub alpha_fitted: f64,
    pub c: f64,
    /// Blow-up exponent, at least 1, and the raw envelope fit if one exists.
    pub a: f64,
    pub a_fitted: Option<f64>,
    /// `(ε, m(∪∂^εΩ_k))`.
    pub collar: Vec<(f64, f64)>,
    /// `(distance, max ‖∇det DT‖_∞)` per logarithmic distance bin.
    pub envelope: Vec<(f64, f64)>,
    pub verdict: Verdict,
}

/// Distance bins per decade for the gradient envelope.
const BINS_PER_DECADE: f64 = 4.0;
/// The envelope is fitted on distances below this.
const ENVELOPE_MAX_DIST: f64 = 1e-2;
/// Sparse bins are skipped: their maximum rarely comes from the part of
/// the boundary where the gradient is worst.
const MIN_BIN_COUNT: usize = 64;

/// Collar measure `m(∪∂^εΩ_k) ≈ C^d ε^α` and gradient envelope
/// `‖∇det DT‖_∞ ≲ C d(x, ∂Ω)^{-a}` from uniform samples.
///
/// The envelope uses the maximum of each logarithmic distance bin: at a
/// given distance most points sit near harmless parts of the boundary, so
/// only the bin maxima trace the worst-case growth.
pub fn check_h6_scaling(map: &PiecewiseMap, eps: &[f64], samples: usize, seed: u64) -> Result<ScalingCheck> {
    if eps.len() < 2 || eps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InsufficientData("need at least two positive collar widths".into()));
    }
    let d = map.dimension();
    let dynamics = map.dynamics();
    let pts = uniform_points(d, samples, seed, 0x4836);
    let probes: Vec<(f64, Option<f64>)> = pts
        .par_chunks(d)
        .map(|x| {
            let dist = dynamics.boundary_distance(x);
            let grad = dynamics.locate(x).filter(|_| dist > 0.0).map(|piece| {
                let h = (1e-3 * dist).clamp(1e-12, 1e-5);
                let mut xp = x.to_vec();
                let mut g = 0.0f64;
                for axis in 0..d {
                    xp[axis] = x[axis] + h;
                    let plus = dynamics.det_jacobian(piece, &xp);
                    xp[axis] = x[axis] - h;
                    let minus = dynamics.det_jacobian(piece, &xp);
                    xp[axis] = x[axis];
                    g = g.max(((plus - minus) / (2.0 * h)).abs());
                }
                g
            });
            (dist, grad)
        })
        .collect();

    let n = probes.len() as f64;
    let collar: Vec<(f64, f64)> = eps
        .iter()
        .map(|&e| (e, probes.iter().filter(|p| p.0 < e).count() as f64 / n))
        .collect();
    let pts_fit: Vec<(f64, f64)> = collar
        .iter()
        .filter(|c| c.1 > 0.0)
        .map(|&(e, m)| (e.ln(), m.ln()))
        .collect();
    let (alpha_fitted, log_cd) = linear_fit(&pts_fit)
        .ok_or_else(|| Error::InsufficientData("collar measure vanished on the ε grid".into()))?;
    let c = (log_cd / d as f64).exp();

    // bin key -> (count, max gradient, its distance)
    let mut bins: std::collections::BTreeMap<i64, (usize, f64, f64)> = Default::default();
    let mut any_gradient = false;
    for &(dist, grad) in &probes {
        let Some(g) = grad else { continue };
        if !(dist < ENVELOPE_MAX_DIST) || !g.is_finite() {
            continue;
        }
        any_gradient |= g > 1e-9;
        let key = (dist.log10() * BINS_PER_DECADE).floor() as i64;
        let e = bins.entry(key).or_insert((0, 0.0, dist));
        e.0 += 1;
        if g > e.1 {
            e.1 = g;
            e.2 = dist;
        }
    }
    let envelope: Vec<(f64, f64)> = bins
        .values()
        .filter(|b| b.0 >= MIN_BIN_COUNT && b.1 > 0.0)
        .map(|b| (b.2, b.1))
        .collect();
    let log_env: Vec<(f64, f64)> = envelope.iter().map(|&(x, g)| (x.ln(), g.ln())).collect();
    let a_fitted = if any_gradient && log_env.len() >= 3 {
        linear_fit(&log_env).map(|(slope, _)| -slope)
    } else {
        None
    };
    let a = a_fitted.map_or(1.0, |f| f.max(1.0));
    let verdict = if any_gradient && a_fitted.is_none() {
        Verdict::NotCheckable
    } else if alpha_fitted > 0.0 && alpha_fitted <= 1.1 && a >= 0.9 {
        Verdict::Consistent
    } else {
        Verdict::Violated
    };
    Ok(ScalingCheck {
        alpha: alpha_fitted.min(1.0),
        alpha_fitted,
        c,
        a,
        a_fitted,
        collar,
        envelope,
        verdict,
    })
}

/// Sup of `‖(DT)^{-1}‖_∞` over `samples` uniform points.
pub fn estimate_nu0(map: &PiecewiseMap, samples: usize, seed: u64) -> f64 {
    let d = map.dimension();
    let dynamics = map.dynamics();
    uniform_points(d, samples, seed, 0x4837)
        .par_chunks(d)
        .filter_map(|x| {
            let piece = dynamics.locate(x)?;
            dynamics.inverse_jacobian(piece, x).map(|m| matrix_inf_norm(&m))
        })
        .reduce(|| 0.0, f64::max)
}
