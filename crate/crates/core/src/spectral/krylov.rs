//! Restarted Arnoldi iteration with locking.
//!
//! Converged Ritz vectors are moved into an orthonormal basis `Q` of an
//! approximately invariant subspace; further Arnoldi cycles run on the
//! deflated operator `(I − QQᵀ)·op` restricted to `Q^⊥`. The eigenvalue
//! estimates are those of the small matrix `R = Qᵀ·op·Q`.

use nalgebra::{Complex, DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Arnoldi vectors per cycle.
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Ritz residual below which a pair is locked.
    pub tol: f64,
    /// Seed for start vectors.
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            krylov_dim: 40,
            max_restarts: 300,
            tol: 1e-10,
            seed: 0x5eed,
        }
    }
}

/// Orthonormal basis of an approximately invariant subspace and the
/// operator compressed onto it.
#[derive(Debug, Clone)]
pub struct PartialSchur {
    pub basis: Vec<Vec<f64>>,
    pub projected: DMatrix<f64>,
    /// Eigenvalues of `projected`, by nonincreasing modulus.
    pub eigenvalues: Vec<Complex<f64>>,
    pub applications: usize,
    pub cycles: usize,
}

/// Eigenvalues of a small dense matrix, by nonincreasing modulus (ties by
/// real part, then imaginary part, descending).
pub fn dense_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000 + 1000 * m.nrows()).ok_or(
        Error::NotConverged {
            iterations: 100_000,
            residual: f64::NAN,
        },
    )?;
    let mut eig: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    sort_by_modulus(&mut eig);
    Ok(eig)
}

pub(crate) fn sort_by_modulus(eig: &mut [Complex<f64>]) {
    eig.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Two passes of classical Gram–Schmidt against `locked` then `basis`;
/// returns the projection coefficients onto `basis`.
fn orthogonalize(w: &mut [f64], locked: &[Vec<f64>], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut coeffs = vec![0.0; basis.len()];
    for _ in 0..2 {
        for q in locked {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
        for (k, v) in basis.iter().enumerate() {
            let c = dot(v, w);
            axpy(-c, v, w);
            coeffs[k] += c;
        }
    }
    coeffs
}

/// Normalized eigenvector of the small matrix `h` for the eigenvalue `theta`,
/// by inverse iteration with a slightly shifted pole.
fn ritz_coefficients(h: &DMatrix<f64>, theta: Complex<f64>) -> DVector<Complex<f64>> {
    let m = h.nrows();
    let shift = theta + Complex::new(1e-10 * (1.0 + theta.norm()), 0.0);
    let mut shifted = h.map(|v| Complex::new(v, 0.0));
    for i in 0..m {
        shifted[(i, i)] -= shift;
    }
    let lu = shifted.lu();
    let mut y = DVector::from_element(m, Complex::new(1.0, 0.0));
    for _ in 0..3 {
        match lu.solve(&y) {
            Some(next) if next.iter().all(|c| c.re.is_finite() && c.im.is_finite()) => {
                let nrm = next.norm();
                if nrm == 0.0 {
                    break;
                }
                y = next.unscale(nrm);
            }
            _ => break,
        }
    }
    // Fix the phase so that the largest component is real positive.
    let (imax, _) = y
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, c)| if c.norm() > bv { (i, c.norm()) } else { (bi, bv) });
    let phase = y[imax].conj() / y[imax].norm().max(f64::MIN_POSITIVE);
    y.map(|c| c * phase)
}

struct Locker<'a> {
    op: &'a dyn Fn(&[f64], &mut [f64]),
    n: usize,
    basis: Vec<Vec<f64>>,
    images: Vec<Vec<f64>>,
    applications: usize,
}

impl Locker<'_> {
    /// Orthonormalizes `x` against the locked basis and appends it, unless
    /// nothing is left of it.
    fn lock(&mut self, mut x: Vec<f64>) -> bool {
        let before = norm(&x);
        if before == 0.0 {
            return false;
        }
        orthogonalize(&mut x, &self.basis, &[]);
        let after = norm(&x);
        if after <= 1e-8 * before {
            return false;
        }
        x.iter_mut().for_each(|v| *v /= after);
        let mut image = vec![0.0; self.n];
        (self.op)(&x, &mut image);
        self.applications += 1;
        self.basis.push(x);
        self.images.push(image);
        true
    }

    fn projected(&self) -> DMatrix<f64> {
        let p = self.basis.len();
        DMatrix::from_fn(p, p, |i, j| dot(&self.basis[i], &self.images[j]))
    }
}

/// Finds an invariant subspace carrying the `k` eigenvalues of largest
/// modulus of the linear map `op` on `ℝ^n`.
pub fn partial_schur(
    op: &dyn Fn(&[f64], &mut [f64]),
    n: usize,
    k: usize,
    opts: &KrylovOptions,
) -> Result<PartialSchur> {
    let k = k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_start = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
    };
    let mut locker = Locker {
        op,
        n,
        basis: Vec::new(),
        images: Vec::new(),
        applications: 0,
    };
    let mut start = random_start(&mut rng);
    let mut cycles = 0;
    let mut w = vec![0.0; n];

    while locker.basis.len() < n && k > 0 {
        if cycles >= opts.max_restarts {
            let locked = dense_eigenvalues(&locker.projected())?;
            return Err(Error::NotConverged {
                iterations: cycles,
                residual: if locked.len() >= k { 0.0 } else { f64::INFINITY },
            });
        }
        cycles += 1;
        let p = locker.basis.len();
        let m = opts.krylov_dim.max(2).min(n - p);

        // Arnoldi on the deflated operator.
        orthogonalize(&mut start, &locker.basis, &[]);
        let s = norm(&start);
        if s < 1e-12 {
            start = random_start(&mut rng);
            continue;
        }
        let mut v: Vec<Vec<f64>> = vec![start.iter().map(|x| x / s).collect()];
        let mut h = DMatrix::<f64>::zeros(m + 1, m);
        let mut breakdown = None;
        for j in 0..m {
            op(&v[j], &mut w);
            locker.applications += 1;
            let scale = norm(&w);
            let coeffs = orthogonalize(&mut w, &locker.basis, &v);
            for (i, c) in coeffs.into_iter().enumerate() {
                h[(i, j)] = c;
            }
            let beta = norm(&w);
            h[(j + 1, j)] = beta;
            if beta <= 1e-12 * scale.max(1e-300) || beta == 0.0 {
                breakdown = Some(j + 1);
                break;
            }
            if j + 1 < m {
                v.push(w.iter().map(|x| x / beta).collect());
            }
        }

        if let Some(dim) = breakdown {
            // The Krylov space is invariant: lock it whole.
            for vec in v.into_iter().take(dim) {
                locker.lock(vec);
            }
            start = random_start(&mut rng);
            if locker.basis.len() >= k {
                // One more cycle on the deflated operator decides whether
                // anything larger is still hiding.
                if !larger_remains(&locker, k, &mut start, opts, n)? {
                    break;
                }
            }
            continue;
        }

        let hm = h.view((0, 0), (m, m)).into_owned();
        let beta = h[(m, m - 1)];
        let ritz = dense_eigenvalues(&hm)?;
        let locked_eigs = dense_eigenvalues(&locker.projected())?;
        let threshold = if locked_eigs.len() >= k {
            Some(locked_eigs[k - 1].norm())
        } else {
            None
        };
        let wanted: Vec<Complex<f64>> = match threshold {
            Some(t) => ritz
                .iter()
                .copied()
                .filter(|z| z.norm() > t * (1.0 + 1e-6) + opts.tol && z.im >= 0.0)
                .collect(),
            None => {
                let need = k - locked_eigs.len();
                let mut out = Vec::new();
                let mut count = 0;
                for z in &ritz {
                    if count >= need {
                        break;
                    }
                    if z.im < 0.0 {
                        continue;
                    }
                    count += if z.im.abs() > 0.0 { 2 } else { 1 };
                    out.push(*z);
                }
                out
            }
        };
        if wanted.is_empty() {
            break;
        }

        let mut restart = vec![0.0; n];
        for theta in wanted {
            let y = ritz_coefficients(&hm, theta);
            let residual = beta * y[m - 1].norm();
            let mut xr = vec![0.0; n];
            let mut xi = vec![0.0; n];
            for (l, vl) in v.iter().enumerate() {
                axpy(y[l].re, vl, &mut xr);
                axpy(y[l].im, vl, &mut xi);
            }
            if residual <= opts.tol * theta.norm().max(1.0) {
                locker.lock(xr);
                if theta.im.abs() > 1e-14 {
                    locker.lock(xi);
                }
            } else {
                axpy(1.0, &xr, &mut restart);
                if theta.im.abs() > 1e-14 {
                    axpy(1.0, &xi, &mut restart);
                }
            }
        }
        start = if norm(&restart) > 0.0 {
            restart
        } else {
            random_start(&mut rng)
        };
    }

    let projected = locker.projected();
    let eigenvalues = dense_eigenvalues(&projected)?;
    Ok(PartialSchur {
        basis: locker.basis,
        projected,
        eigenvalues,
        applications: locker.applications,
        cycles,
    })
}

/// Runs one Arnoldi cycle from `start` on the deflated operator and reports
/// whether a Ritz value beats the `k`-th locked eigenvalue.
fn larger_remains(
    locker: &Locker<'_>,
    k: usize,
    start: &mut [f64],
    opts: &KrylovOptions,
    n: usize,
) -> Result<bool> {
    let p = locker.basis.len();
    if p >= n {
        return Ok(false);
    }
    let locked = dense_eigenvalues(&locker.projected())?;
    let t = locked[k - 1].norm();
    let m = opts.krylov_dim.max(2).min(n - p);
    let mut s = start.to_vec();
    orthogonalize(&mut s, &locker.basis, &[]);
    let sn = norm(&s);
    if sn < 1e-12 {
        return Ok(false);
    }
    let mut v = vec![s.iter().map(|x| x / sn).collect::<Vec<_>>()];
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let mut w = vec![0.0; n];
    let mut dim = m;
    for j in 0..m {
        (locker.op)(&v[j], &mut w);
        let scale = norm(&w);
        let coeffs = orthogonalize(&mut w, &locker.basis, &v);
        for (i, c) in coeffs.into_iter().enumerate() {
            h[(i, j)] = c;
        }
        let beta = norm(&w);
        if beta <= 1e-12 * scale.max(1e-300) || beta == 0.0 {
            dim = j + 1;
            break;
        }
        if j + 1 < m {
            v.push(w.iter().map(|x| x / beta).collect());
        }
    }
    let ritz = dense_eigenvalues(&h.view((0, 0), (dim, dim)).into_owned())?;
    Ok(ritz
        .first()
        .is_some_and(|z| z.norm() > t * (1.0 + 1e-6) + opts.tol))
}
