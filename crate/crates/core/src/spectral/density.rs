use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_bv::GridFunction;
use crate::transfer_op::UlamMatrix;

/// Output of the invariant-density power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Acim {
    pub density: GridFunction,
    /// Index of the returned iterate (0 when the uniform start is already
    /// invariant).
    pub iterations: usize,
    /// L¹ distance between the returned iterate and its image.
    pub residual: f64,
}

/// Power iteration from the uniform density, renormalizing the mass after
/// every step, until successive iterates are within `tol` in L¹.
pub fn acim(a: &UlamMatrix, tol: f64, max_iter: usize) -> Result<Acim> {
    let grid = *a.grid();
    let vol = grid.cell_volume();
    let mut cur = vec![1.0; a.size()];
    let mut next = vec![0.0; a.size()];
    let mut residual = f64::INFINITY;
    for k in 0..=max_iter {
        a.apply_slice(&cur, &mut next);
        let mass = next.iter().sum::<f64>() * vol;
        if !(mass > 0.0) {
            return Err(Error::InsufficientData(
                "all mass escapes; no invariant density".into(),
            ));
        }
        next.iter_mut().for_each(|v| *v /= mass);
        residual = cur
            .iter()
            .zip(&next)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            * vol;
        if residual < tol {
            return Ok(Acim {
                density: GridFunction::new(grid, cur)?,
                iterations: k,
                residual,
            });
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Err(Error::DensityNotConverged {
        iterations: max_iter,
        residual,
        last: Box::new(GridFunction::new(grid, cur)?),
    })
}

/// Real part of a Cesàro average together with the L¹ norm of the
/// imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct CesaroAverage {
    pub real: GridFunction,
    pub imag_l1: f64,
}

/// `(1/n) Σ_{k<n} e^{-iθk} A^k g`.
pub fn cesaro_projector(a: &UlamMatrix, theta: f64, n: usize, g: &GridFunction) -> Result<CesaroAverage> {
    if *g.grid() != *a.grid() {
        return Err(Error::GridMismatch);
    }
    if n == 0 {
        return Err(Error::InsufficientData("Cesàro average over zero terms".into()));
    }
    let size = a.size();
    let mut re = vec![0.0; size];
    let mut im = vec![0.0; size];
    let mut cur = g.values().to_vec();
    let mut next = vec![0.0; size];
    for k in 0..n {
        let (s, c) = (theta * k as f64).sin_cos();
        for ((r, i), v) in re.iter_mut().zip(im.iter_mut()).zip(&cur) {
            *r += c * v;
            *i -= s * v;
        }
        if k + 1 < n {
            a.apply_slice(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    let scale = 1.0 / n as f64;
    re.iter_mut().for_each(|v| *v *= scale);
    let imag_l1 = im.iter().map(|v| v.abs()).sum::<f64>() * scale * a.grid().cell_volume();
    Ok(CesaroAverage {
        real: GridFunction::new(*a.grid(), re)?,
        imag_l1,
    })
}

/// `C_n = ∫ f·L^n g − ∫ g · ∫ f h_*` for `n = 0..=n_max`, one sparse
/// application per step.
pub fn correlation_series(
    a: &UlamMatrix,
    f: &GridFunction,
    g: &GridFunction,
    h_star: &GridFunction,
    n_max: usize,
) -> Result<Vec<(usize, f64)>> {
    for other in [f, g, h_star] {
        if *other.grid() != *a.grid() {
            return Err(Error::GridMismatch);
        }
    }
    let baseline = g.mass() * f.inner(h_star)?;
    let vol = a.grid().cell_volume();
    let mut cur = g.values().to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let pairing: f64 = f.values().iter().zip(&cur).map(|(x, y)| x * y).sum::<f64>() * vol;
        out.push((n, pairing - baseline));
        if n < n_max {
            a.apply_slice(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    Ok(out)
}

/// The single correlation `C_n`.
pub fn correlation(
    a: &UlamMatrix,
    f: &GridFunction,
    g: &GridFunction,
    h_star: &GridFunction,
    n: usize,
) -> Result<f64> {
    Ok(correlation_series(a, f, g, h_star, n)?[n].1)
}

/// Correlations with `|C_n|` below this are treated as numerical zeros.
pub const CORRELATION_FLOOR: f64 = 1e-13;

/// Least-squares fit of `ln|C_n| ≈ c + n ln σ̂`; returns `σ̂`.
pub fn decay_rate_fit(correlations: &[(usize, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = correlations
        .iter()
        .filter(|(_, c)| c.abs() >= CORRELATION_FLOOR && c.is_finite())
        .map(|&(n, c)| (n as f64, c.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable correlation values, need 3",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all correlations at the same n".into()));
    }
    Ok((sxy / sxx).exp())
}

/// A fitted decay rate with the serialized correlation series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub correlations: Vec<(usize, f64)>,
    pub sigma_hat: Option<f64>,
}
