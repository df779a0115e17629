//! Restrictions of the map to axis-parallel lines: the piece intervals met
//! by a line, the window sums of the expansion condition and the collar
//! line integrals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::uniform_points;
use super::Verdict;
use crate::error::{Error, Result};
use crate::map_model::{matrix_inf_norm, MapDynamics, PieceId, PiecewiseMap};

/// Samples per line before bisection refines the piece transitions.
pub const LINE_RESOLUTION: usize = 4096;
/// Bisection stops once a transition is bracketed this tightly.
const BRACKET_WIDTH: f64 = 1e-13;
const MAX_DEPTH: usize = 96;

/// A maximal parameter interval `(lo, hi)` of the line lying in one piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineInterval {
    pub lo: f64,
    pub hi: f64,
    pub piece: PieceId,
}

/// An axis-parallel line `{x : x_k = anchor_k, k ≠ axis}`.
#[derive(Debug, Clone)]
pub(crate) struct Line {
    anchor: Vec<f64>,
    axis: usize,
}

impl Line {
    pub(crate) fn new(anchor: Vec<f64>, axis: usize) -> Self {
        Line { anchor, axis }
    }

    pub(crate) fn point(&self, t: f64) -> Vec<f64> {
        let mut x = self.anchor.clone();
        x[self.axis] = t;
        x
    }

    fn piece_at(&self, dynamics: &dyn MapDynamics, t: f64) -> Option<PieceId> {
        if !(t > 0.0 && t < 1.0) {
            return None;
        }
        dynamics.locate(&self.point(t))
    }
}

/// Pieces met by the line, as maximal intervals in increasing order.
///
/// The line is sampled at `resolution` points and every change of piece is
/// bracketed by bisection; pieces narrower than the sample spacing that
/// sit between two samples of the same piece are not seen.
pub(crate) fn enumerate_line(
    dynamics: &dyn MapDynamics,
    line: &Line,
    resolution: usize,
) -> Result<Vec<LineInterval>> {
    // (position, piece on the right) for every transition
    let mut cuts: Vec<(f64, Option<PieceId>)> = Vec::new();
    let ts: Vec<f64> = (0..resolution)
        .map(|i| (i as f64 + 0.5) / resolution as f64)
        .collect();
    let ids: Vec<Option<PieceId>> = ts.iter().map(|&t| line.piece_at(dynamics, t)).collect();
    let mut stack = Vec::new();
    for w in 0..resolution.saturating_sub(1) {
        if ids[w] == ids[w + 1] {
            continue;
        }
        // depth-first, right half pushed first so cuts come out in order
        stack.push((ts[w], ids[w], ts[w + 1], ids[w + 1], 0usize));
        while let Some((lo, id_lo, hi, id_hi, depth)) = stack.pop() {
            if hi - lo <= BRACKET_WIDTH {
                cuts.push((0.5 * (lo + hi), id_hi));
                continue;
            }
            if depth >= MAX_DEPTH {
                return Err(Error::IntervalEnumerationIncomplete(lo));
            }
            let mid = 0.5 * (lo + hi);
            let id_mid = line.piece_at(dynamics, mid);
            if id_mid == id_lo {
                stack.push((mid, id_mid, hi, id_hi, depth + 1));
            } else if id_mid == id_hi {
                stack.push((lo, id_lo, mid, id_mid, depth + 1));
            } else {
                stack.push((mid, id_mid, hi, id_hi, depth + 1));
                stack.push((lo, id_lo, mid, id_mid, depth + 1));
            }
        }
    }
    let mut out = Vec::new();
    let mut start = 0.0;
    let mut current = ids.first().copied().flatten();
    for (pos, next) in cuts.into_iter().chain(std::iter::once((1.0, None))) {
        if let Some(piece) = current {
            if pos > start {
                out.push(LineInterval {
                    lo: start,
                    hi: pos,
                    piece,
                });
            }
        }
        start = pos;
        current = next;
    }
    Ok(out)
}

/// Sup of `‖(DT)^{-1}‖_∞` over one interval, using the continuous
/// extension of the branch at the endpoints.
fn interval_sup(dynamics: &dyn MapDynamics, line: &Line, iv: &LineInterval, probes: usize) -> f64 {
    let len = iv.hi - iv.lo;
    let mut best = 0.0f64;
    let mut probe = |t: f64| {
        if let Some(inv) = dynamics.inverse_jacobian(iv.piece, &line.point(t)) {
            let v = matrix_inf_norm(&inv);
            if v.is_finite() {
                best = best.max(v);
            }
        }
    };
    probe(iv.lo);
    probe(iv.hi);
    for k in 0..=probes {
        probe(iv.lo + len * k as f64 / probes as f64);
    }
    best
}

/// Largest sum of weights over runs of consecutive intervals that a single
/// window of half-width `delta` can meet.
pub(crate) fn max_window_sum(intervals: &[(f64, f64, f64)], delta: f64) -> f64 {
    let mut best = 0.0f64;
    let mut p = 0;
    let mut sum = 0.0;
    for q in 0..intervals.len() {
        sum += intervals[q].2;
        // intervals p..=q all meet one window iff lo_q − hi_p < 2δ
        while intervals[q].0 - intervals[p].1 >= 2.0 * delta {
            sum -= intervals[p].2;
            p += 1;
        }
        best = best.max(sum);
    }
    best
}

/// Anchored lines along every axis: `per_axis` random anchors each (a
/// single line in dimension one).
pub(crate) fn sample_lines(dim: usize, per_axis: usize, seed: u64, salt: u64) -> Vec<Line> {
    let per_axis = if dim == 1 { 1 } else { per_axis.max(1) };
    let mut lines = Vec::with_capacity(dim * per_axis);
    for axis in 0..dim {
        let anchors = uniform_points(dim, per_axis, seed, salt + axis as u64);
        for a in anchors.chunks(dim) {
            lines.push(Line::new(a.to_vec(), axis));
        }
    }
    lines
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    /// Smallest window sum over the candidate `δ`; `λ^{-1}` when below 1.
    pub window_sum: f64,
    pub lambda: f64,
    pub delta: f64,
    /// `(δ, sup of the window sum over lines)` for every candidate.
    pub sums: Vec<(f64, f64)>,
    pub lines: usize,
    pub verdict: Verdict,
}

/// Window sums of `‖(DT)^{-1}‖_∞` over the branch intervals met by windows
/// `[x_j − δ, x_j + δ]` along sampled axis lines.
///
/// For each `δ` the sup is taken over lines and window positions; the
/// smallest of these sups is reported together with its `δ`.
pub fn check_h3_expansion(
    map: &PiecewiseMap,
    deltas: &[f64],
    lines_per_axis: usize,
    seed: u64,
) -> Result<ExpansionCheck> {
    if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InsufficientData("need positive window sizes".into()));
    }
    let dynamics = map.dynamics();
    let lines = sample_lines(map.dimension(), lines_per_axis, seed, 0x4833);
    let weighted: Vec<Vec<(f64, f64, f64)>> = lines
        .par_iter()
        .map(|line| {
            let ivs = enumerate_line(dynamics, line, LINE_RESOLUTION)?;
            Ok(ivs
                .iter()
                .map(|iv| (iv.lo, iv.hi, interval_sup(dynamics, line, iv, 16)))
                .collect())
        })
        .collect::<Result<_>>()?;
    let sums: Vec<(f64, f64)> = deltas
        .iter()
        .map(|&delta| {
            let sup = weighted
                .iter()
                .map(|w| max_window_sum(w, delta))
                .fold(0.0, f64::max);
            (delta, sup)
        })
        .collect();
    let &(delta, window_sum) = sums
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)))
        .expect("nonempty");
    Ok(ExpansionCheck {
        window_sum,
        lambda: 1.0 / window_sum,
        delta,
        sums,
        lines: lines.len(),
        verdict: if window_sum < 1.0 {
            Verdict::Consistent
        } else {
            Verdict::Violated
        },
    })
}

/// Nodes per interval of the collar quadrature: a floor plus a share
/// proportional to the interval length.
const QUADRATURE_NODES: usize = 64;
const QUADRATURE_DENSITY: f64 = 8192.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryIntegralCheck {
    pub eps: Vec<f64>,
    /// Sup over sampled lines of the collar integral, one value per `ε`.
    pub values: Vec<f64>,
    pub verdict: Verdict,
}

/// Finite-difference `‖∂_{x_axis}(DT)^{-1}‖_∞` with a step kept inside the
/// piece.
fn inverse_derivative(dynamics: &dyn MapDynamics, piece: PieceId, x: &[f64], axis: usize, dist: f64) -> f64 {
    let h = (1e-3 * dist).clamp(1e-12, 1e-5);
    let mut xp = x.to_vec();
    xp[axis] = x[axis] + h;
    let plus = dynamics.inverse_jacobian(piece, &xp);
    xp[axis] = x[axis] - h;
    let minus = dynamics.inverse_jacobian(piece, &xp);
    match (plus, minus) {
        (Some(p), Some(m)) => matrix_inf_norm(&((p - m) / (2.0 * h))),
        _ => f64::INFINITY,
    }
}

/// Collar integrals `∫ ‖∂_{x_j}(DT)^{-1}‖_∞ 1_{∂^εΩ}` along sampled lines.
///
/// Each piece interval is integrated with nodes clustered towards its ends
/// (a cosine substitution), which keeps integrable endpoint blow-ups such as
/// `x^{-1/2}` under control. The same nodes serve every `ε`, so the values
/// are monotone in `ε` by construction and the verdict rests on the decay.
pub fn check_h4_boundary_integral(
    map: &PiecewiseMap,
    eps: &[f64],
    lines_per_axis: usize,
    seed: u64,
) -> Result<BoundaryIntegralCheck> {
    if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InsufficientData("need positive collar widths".into()));
    }
    let dynamics = map.dynamics();
    let lines = sample_lines(map.dimension(), lines_per_axis, seed, 0x4834);
    let per_line: Vec<Vec<f64>> = lines
        .par_iter()
        .map(|line| {
            let ivs = enumerate_line(dynamics, line, LINE_RESOLUTION)?;
            let mut acc = vec![0.0; eps.len()];
            for iv in &ivs {
                let len = iv.hi - iv.lo;
                let nodes = QUADRATURE_NODES + (len * QUADRATURE_DENSITY).ceil() as usize;
                for k in 0..nodes {
                    let s = (k as f64 + 0.5) / nodes as f64;
                    let t = iv.lo + 0.5 * len * (1.0 - (std::f64::consts::PI * s).cos());
                    let w = 0.5 * len * std::f64::consts::PI * (std::f64::consts::PI * s).sin()
                        / nodes as f64;
                    let x = line.point(t);
                    let dist = dynamics.boundary_distance(&x);
                    let g = inverse_derivative(dynamics, iv.piece, &x, line.axis, dist);
                    for (a, &e) in acc.iter_mut().zip(eps) {
                        if dist < e {
                            *a += w * g;
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = (0..eps.len())
        .map(|i| per_line.iter().map(|v| v[i]).fold(0.0, f64::max))
        .collect();

    // order by decreasing ε before judging
    let mut pairs: Vec<(f64, f64)> = eps.iter().copied().zip(values.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (e0, v0) = pairs[0];
    let (e1, v1) = pairs[pairs.len() - 1];
    let monotone = pairs
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-9) + 1e-12);
    let verdict = if !values.iter().all(|v| v.is_finite()) || !monotone {
        Verdict::Violated
    } else if v0 <= 1e-12 || (pairs.len() >= 2 && v1 <= v0 * (e1 / e0).powf(0.25)) {
        Verdict::Consistent
    } else {
        Verdict::Violated
    };
    Ok(BoundaryIntegralCheck {
        eps: eps.to_vec(),
        values,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::MapSpec;

    #[test]
    fn ternary_line_has_three_intervals() {
        let map = MapSpec::named("ternary").build().unwrap();
        let line = Line::new(vec![0.5], 0);
        let ivs = enumerate_line(map.dynamics(), &line, 100).unwrap();
        assert_eq!(ivs.len(), 3);
        for (iv, edge) in ivs.iter().zip([0.0, 1.0 / 3.0, 2.0 / 3.0]) {
            assert!((iv.lo - edge).abs() < 1e-11, "{iv:?}");
            assert!((iv.hi - (edge + 1.0 / 3.0)).abs() < 1e-11, "{iv:?}");
        }
    }

    #[test]
    fn window_sums_by_hand() {
        let ivs = [(0.0, 0.3, 1.0), (0.3, 0.31, 2.0), (0.31, 1.0, 4.0)];
        assert_eq!(max_window_sum(&ivs, 0.001), 6.0);
        assert_eq!(max_window_sum(&ivs, 0.01), 7.0);
        assert_eq!(max_window_sum(&ivs[..1], 0.5), 1.0);
    }

    #[test]
    fn liverani_vertical_line_crosses_curves() {
        let map = MapSpec::liverani2d(7.0, 7.0).build().unwrap();
        // x = 0.5: the curves y = (j − √0.5)/7 cut the line into 8 pieces
        let line = Line::new(vec![0.5, 0.5], 1);
        let ivs = enumerate_line(map.dynamics(), &line, 512).unwrap();
        let expect: Vec<f64> = (1..8).map(|j| (j as f64 - 0.5f64.sqrt()) / 7.0).collect();
        assert_eq!(ivs.len(), expect.len() + 1);
        for (w, e) in ivs.windows(2).zip(&expect) {
            assert!((w[0].hi - e).abs() < 1e-11);
        }
    }
}
