//! Open dynamics around the singularity set and the positivity of
//! invariant densities on balls.
//!
//! Mass that comes closer to a piece boundary than a shrinking radius is
//! removed (the restricted operators of [`crate::transfer_op`]); comparing
//! with the closed system measures how much the collars matter. The
//! positivity radius `ε_*` is read off the computed density directly, and
//! the mollify-then-restrict mechanism that proves it exists is evaluated
//! alongside as a diagnostic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_bv::{bv_norm, check_sobolev, lp_norm, mollify, GridFunction, UniformGrid};
use crate::hypothesis::{HypothesisReport, Verdict};
use crate::map_model::PiecewiseMap;
use crate::transfer_op::{compose_restricted, BoundaryDistanceField, UlamMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSetMass {
    /// `m({h ≥ threshold})`.
    pub mass: f64,
    /// `(2 C_d ‖h‖_BV)^{-d}`.
    pub lower_bound: f64,
    /// `C_d` as measured on `h`.
    pub sobolev_constant: f64,
}

/// Measure of the level set `{h ≥ threshold}` and the lower bound obtained
/// from the Sobolev inequality.
pub fn level_set_mass(h: &GridFunction, threshold: f64) -> LevelSetMass {
    let grid = h.grid();
    let cells: Vec<usize> = (0..grid.cell_count())
        .filter(|&c| h.values()[c] >= threshold)
        .collect();
    let c_d = check_sobolev(h, &cells).constant;
    let d = grid.dim() as i32;
    let scale = 2.0 * c_d * bv_norm(h);
    LevelSetMass {
        mass: cells.len() as f64 * grid.cell_volume(),
        lower_bound: if scale > 0.0 { scale.powi(-d) } else { 0.0 },
        sobolev_constant: c_d,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenComparison {
    pub eps: f64,
    pub nu: f64,
    /// `(n, ‖Lⁿf − L̃_{ε,n}f‖_{L¹})` for `n = 1..=n_max`.
    pub series: Vec<(usize, f64)>,
    /// Largest value of the series.
    pub plateau: f64,
    /// `plateau / ‖f‖_BV`, the empirical constant in front of the bound.
    pub constant: f64,
    pub nonnegative: bool,
    /// The maximum is at most twice the value at `n_max/2`.
    pub bounded: bool,
}

/// `‖Lⁿf − L̃_{ε,n}f‖_{L¹}` for `n = 1..=n_max`.
pub fn open_comparison(
    a: &UlamMatrix,
    map: &PiecewiseMap,
    f: &GridFunction,
    eps: f64,
    nu: f64,
    n_max: usize,
) -> Result<OpenComparison> {
    let field = BoundaryDistanceField::new(map, *a.grid());
    open_comparison_with_field(a, &field, f, eps, nu, n_max)
}

/// [`open_comparison`] with a precomputed distance field.
pub fn open_comparison_with_field(
    a: &UlamMatrix,
    field: &BoundaryDistanceField,
    f: &GridFunction,
    eps: f64,
    nu: f64,
    n_max: usize,
) -> Result<OpenComparison> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps".into(),
            value: eps,
            reason: "must be nonnegative".into(),
        });
    }
    if n_max == 0 {
        return Err(Error::InsufficientData("need n_max >= 1".into()));
    }
    // the hole radii differ for every n, so each composite starts afresh
    let series: Vec<(usize, f64)> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let closed = a.apply_n(f, n)?;
            let open = compose_restricted(a, field, f, eps, nu, n)?;
            Ok((n, lp_norm(&closed.sub(&open)?, 1.0)))
        })
        .collect::<Result<_>>()?;
    let plateau = series.iter().map(|s| s.1).fold(0.0, f64::max);
    let bv = bv_norm(f);
    let mid = series[(n_max / 2).max(1) - 1].1;
    Ok(OpenComparison {
        eps,
        nu,
        plateau,
        constant: if bv > 0.0 { plateau / bv } else { 0.0 },
        nonnegative: series.iter().all(|s| s.1 >= 0.0),
        bounded: plateau <= 2.0 * mid + 1e-15,
        series,
    })
}

/// Exponent `β` of `plateau ≈ K ε^β`, fitted by least squares over the
/// nonzero plateaus.
pub fn plateau_exponent(runs: &[OpenComparison]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = runs
        .iter()
        .filter(|r| r.eps > 0.0 && r.plateau > 0.0)
        .map(|r| (r.eps.ln(), r.plateau.ln()))
        .collect();
    crate::hypothesis::linear_fit(&pts)
        .map(|(slope, _)| slope)
        .ok_or_else(|| Error::InsufficientData("need two nonzero plateaus at distinct ε".into()))
}

/// Cells of the ∞-ball of `radius` cells around `center`, or `None` if the
/// ball leaves the grid.
pub fn ball_cells(grid: &UniformGrid, center: usize, radius: usize) -> Option<Vec<usize>> {
    let n = grid.n();
    let c = grid.multi_index(center);
    if c.iter().any(|&ci| ci < radius || ci + radius >= n) {
        return None;
    }
    let side = 2 * radius + 1;
    let d = grid.dim();
    let mut out = Vec::with_capacity(side.pow(d as u32));
    let mut offset = vec![0usize; d];
    loop {
        let idx: Vec<usize> = (0..d).map(|k| c[k] + offset[k] - radius).collect();
        out.push(grid.linear_index(&idx));
        let mut k = 0;
        loop {
            if k == d {
                return Some(out);
            }
            offset[k] += 1;
            if offset[k] < side {
                break;
            }
            offset[k] = 0;
            k += 1;
        }
    }
}

/// Minimum of `h` over cells whose centres lie in the ∞-ball of
/// `half_width` around `center`. Works across grids of any resolution.
pub fn ball_floor(h: &GridFunction, center: &[f64], half_width: f64) -> f64 {
    let grid = h.grid();
    let mut floor = f64::INFINITY;
    for cell in 0..grid.cell_count() {
        let x = grid.cell_center(cell);
        if x.iter().zip(center).all(|(a, b)| (a - b).abs() <= half_width + 1e-12) {
            floor = floor.min(h.values()[cell]);
        }
    }
    floor
}

/// One step of the regularization mechanism at the certified centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismStep {
    pub n: usize,
    pub delta: f64,
    /// `L̃_{ε,n} h_{δ_n}` at the centre cell.
    pub value: f64,
}

/// A ball on which a computed invariant density stays above a floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityCertificate {
    /// Twice the ball's half-width.
    pub eps_star: f64,
    pub center: Vec<f64>,
    pub center_cell: usize,
    pub radius_cells: usize,
    /// Minimum of the density over the ball.
    pub gamma: f64,
    /// Floor the ball had to clear: a quarter of the mean density over its
    /// support.
    pub threshold: f64,
    /// Largest `n` with `δ_n = ν₀^{n/(d+1)}` still resolvable on the grid.
    pub n_used: usize,
    pub delta_n: f64,
    /// Hole radius used for the mechanism: `ε_*`, reduced so the centre
    /// stays outside the hole.
    pub hole_eps: f64,
    pub nu: f64,
    pub mechanism: Vec<MechanismStep>,
    /// Steps of the mechanism at which the value stayed at or above `γ`.
    pub mechanism_hits: usize,
    /// `Σ_{k<n} (ν₀ν^{-a})^k ε^{1-a} + ν₀ⁿ ε δ_n^{-d-1}` at `n_used`.
    pub distortion_exponent: f64,
}

/// Largest ∞-ball around `center` on which `h` stays at or above the
/// floor, given the cells below it; returns the radius and the minimum.
fn grow_ball(h: &GridFunction, center: usize, low: &[Vec<usize>]) -> Option<(usize, f64)> {
    let grid = h.grid();
    let n = grid.n();
    let c = grid.multi_index(center);
    let edge = c.iter().map(|&k| k.min(n - 1 - k)).min()?;
    let nearest_low = low
        .iter()
        .map(|b| b.iter().zip(&c).map(|(&x, &y)| x.abs_diff(y)).max().unwrap_or(0))
        .min();
    let radius = match nearest_low {
        Some(0) => return None,
        Some(r) => edge.min(r - 1),
        None => edge,
    };
    let cells = ball_cells(grid, center, radius)?;
    let min = cells.iter().map(|&k| h.values()[k]).fold(f64::INFINITY, f64::min);
    Some((radius, min))
}

/// Candidate centres every four cells along each axis.
fn lattice_centres(grid: &UniformGrid) -> Vec<usize> {
    let n = grid.n();
    let offset = 2.min(n - 1);
    let coords: Vec<usize> = (offset..n).step_by(4).collect();
    (0..grid.cell_count())
        .filter(|&c| grid.multi_index(c).iter().all(|i| coords.contains(i)))
        .collect()
}

/// Finds the largest ∞-ball on which `h_star` stays above a quarter of
/// its mean over its support, and evaluates the regularization mechanism
/// at the chosen centre.
///
/// Centres are scanned on a lattice of spacing `4/N`; among equal radii
/// the larger minimum wins, then the lower cell index.
pub fn positivity_radius(
    a: &UlamMatrix,
    map: &PiecewiseMap,
    h_star: &GridFunction,
    hyp: &HypothesisReport,
) -> Result<PositivityCertificate> {
    let grid = *a.grid();
    if *h_star.grid() != grid {
        return Err(Error::GridMismatch);
    }
    for k in [3, 6] {
        if hyp.verdict(k) != Verdict::Consistent {
            return Err(Error::InvalidParameter {
                name: format!("hypothesis {k}"),
                value: f64::NAN,
                reason: format!("verdict is {}, positivity needs consistent", hyp.verdict(k)),
            });
        }
    }
    let nu = hyp.nu_default.ok_or_else(|| Error::InvalidParameter {
        name: "nu".into(),
        value: hyp.nu0,
        reason: "no admissible ν: ν₀^{1/a} is not below 1".into(),
    })?;
    let support: Vec<f64> = h_star.values().iter().copied().filter(|&v| v > 0.0).collect();
    if support.is_empty() {
        return Err(Error::InsufficientData("density vanishes identically".into()));
    }
    let threshold = 0.25 * support.iter().sum::<f64>() / support.len() as f64;

    let candidates = lattice_centres(&grid);
    let low: Vec<Vec<usize>> = (0..grid.cell_count())
        .filter(|&c| h_star.values()[c] < threshold)
        .map(|c| grid.multi_index(c))
        .collect();
    let grown: Vec<(usize, Option<(usize, f64)>)> = candidates
        .par_iter()
        .map(|&c| (c, grow_ball(h_star, c, &low)))
        .collect();
    let best = grown
        .iter()
        .filter_map(|&(c, g)| g.map(|(r, m)| (c, r, m)))
        .max_by(|x, y| x.1.cmp(&y.1).then(x.2.total_cmp(&y.2)).then(y.0.cmp(&x.0)));
    let Some((center_cell, radius_cells, gamma)) = best else {
        let (best_cell, best_min) = candidates
            .iter()
            .map(|&c| (c, h_star.values()[c]))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        return Err(Error::NoPositiveBall { best_min, best_cell });
    };
    let n = grid.n() as f64;
    let eps_star = 2.0 * (radius_cells as f64 + 0.5) / n;
    let center = grid.cell_center(center_cell);

    let d = grid.dim();
    let nu0 = hyp.nu0;
    let a_exp = hyp.a.unwrap_or(1.0);
    let min_delta = 2.0 / n;
    let schedule: Vec<(usize, f64)> = (1..)
        .map(|k| (k, nu0.powf(k as f64 / (d as f64 + 1.0))))
        .take_while(|&(_, delta)| delta >= min_delta && delta > 0.0)
        .take(64)
        .filter(|&(_, delta)| delta < 1.0)
        .collect();
    let field = BoundaryDistanceField::new(map, grid);
    let hole_eps = eps_star.min(field.distances()[center_cell]);
    let mechanism: Vec<MechanismStep> = schedule
        .par_iter()
        .map(|&(k, delta)| {
            let h_delta = mollify(h_star, delta)?;
            let pushed = compose_restricted(a, &field, &h_delta, hole_eps, nu, k)?;
            Ok(MechanismStep {
                n: k,
                delta,
                value: pushed.values()[center_cell],
            })
        })
        .collect::<Result<_>>()?;
    let mechanism_hits = mechanism
        .iter()
        .filter(|m| m.value >= gamma * (1.0 - 1e-9))
        .count();
    let (n_used, delta_n) = schedule.last().copied().unwrap_or((0, 1.0));
    let ratio = nu0 * nu.powf(-a_exp);
    let geometric: f64 = (0..n_used).map(|k| ratio.powi(k as i32)).sum();
    let distortion_exponent = geometric * hole_eps.powf(1.0 - a_exp)
        + nu0.powi(n_used as i32) * hole_eps * delta_n.powi(-(d as i32) - 1);

    Ok(PositivityCertificate {
        eps_star,
        center,
        center_cell,
        radius_cells,
        gamma,
        threshold,
        n_used,
        delta_n,
        hole_eps,
        nu,
        mechanism,
        mechanism_hits,
        distortion_exponent,
    })
}

/// Reach of the push-forwards of one certified ball inside its component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpennessEntry {
    pub component_size: usize,
    pub ball_size: usize,
    /// Cells of the component reached by `∪_{k≤n} L^k 1_B`.
    pub reached: usize,
    pub fraction: f64,
    /// Nothing beyond the ball was reached: the dynamics does not spread.
    pub degenerate: bool,
}

/// Pushes the indicator of each certified ball forward `n` steps and
/// reports which fraction of its component received mass.
pub fn ergodic_openness_probe(
    a: &UlamMatrix,
    components: &[Vec<usize>],
    certificates: &[PositivityCertificate],
    n: usize,
) -> Result<Vec<OpennessEntry>> {
    if components.len() != certificates.len() {
        return Err(Error::InsufficientData(format!(
            "{} components but {} certificates",
            components.len(),
            certificates.len()
        )));
    }
    let grid = *a.grid();
    components
        .iter()
        .zip(certificates)
        .map(|(component, cert)| {
            let ball = ball_cells(&grid, cert.center_cell, cert.radius_cells)
                .ok_or_else(|| Error::InsufficientData("certified ball leaves the grid".into()))?;
            let mut reached = vec![false; grid.cell_count()];
            let mut cur = GridFunction::indicator(grid, &ball).into_values();
            let mut next = vec![0.0; cur.len()];
            for step in 0..=n {
                for (r, &v) in reached.iter_mut().zip(&cur) {
                    *r |= v > 0.0;
                }
                if step < n {
                    a.apply_slice(&cur, &mut next);
                    std::mem::swap(&mut cur, &mut next);
                }
            }
            let mut member = vec![false; grid.cell_count()];
            component.iter().for_each(|&c| member[c] = true);
            let hit = component.iter().filter(|&&c| reached[c]).count();
            let ball_in = ball.iter().filter(|&&c| member[c]).count();
            Ok(OpennessEntry {
                component_size: component.len(),
                ball_size: ball.len(),
                reached: hit,
                fraction: hit as f64 / component.len().max(1) as f64,
                degenerate: hit <= ball_in,
            })
        })
        .collect()
}
