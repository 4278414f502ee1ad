//! Time propagation `ψ(t) = e^{−itH} ψ(0)`.
//!
//! The production path is a Lanczos (Krylov) exponential with full
//! reorthogonalization. For every substep the Krylov space is grown until the
//! a-posteriori estimate `β_k |e_kᵀ exp(−iτT_k) e_1|` for the remaining time
//! drops below the tolerance, or the maximal dimension is reached, in which
//! case the substep `τ` is halved until the estimate passes. Since the Krylov
//! space does not depend on `τ`, shrinking the step costs only small
//! `k × k` exponentials.
//!
//! [`DenseOracle`] diagonalizes `H` densely and is the reference used to
//! validate the Krylov path on small spaces.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use super::{check_normalized, ManyBodyState, SparseHamiltonian, DEFAULT_KRYLOV_DIM};
use crate::error::{Error, Result};

/// Largest dimension accepted by [`DenseOracle`].
pub const DENSE_ORACLE_MAX_DIM: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovSettings {
    /// Bound on the local error estimate of one substep.
    pub tol: f64,
    pub max_dim: usize,
}

impl KrylovSettings {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            max_dim: DEFAULT_KRYLOV_DIM,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(1e-14..=1e-6).contains(&self.tol) {
            return Err(Error::InvalidInput(format!(
                "Krylov tolerance must lie in [1e-14, 1e-6], got {:e}",
                self.tol
            )));
        }
        if self.max_dim < 2 {
            return Err(Error::InvalidInput("Krylov dimension must be at least 2".into()));
        }
        Ok(())
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(−iτT) e_1` for the symmetric tridiagonal `T` given by its spectral data.
fn small_exponential(eig: &SymmetricEigen<f64, nalgebra::Dyn>, tau: f64) -> Vec<Complex64> {
    let k = eig.eigenvalues.len();
    let v = &eig.eigenvectors;
    let weights: Vec<Complex64> = (0..k)
        .map(|j| Complex64::from_polar(1.0, -tau * eig.eigenvalues[j]) * v[(0, j)])
        .collect();
    (0..k)
        .map(|i| (0..k).map(|j| weights[j] * v[(i, j)]).sum())
        .collect()
}

fn tridiagonal_eigen(alphas: &[f64], betas: &[f64]) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let k = alphas.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    SymmetricEigen::new(t)
}

/// One Krylov substep from `v` towards `remaining` (signed). Returns the new
/// vector and the time actually covered.
fn krylov_substep(
    h: &SparseHamiltonian,
    v: &[Complex64],
    remaining: f64,
    settings: &KrylovSettings,
    scale: f64,
) -> Result<(Vec<Complex64>, f64)> {
    let n = v.len();
    let beta0 = norm(v);
    if beta0 == 0.0 {
        return Ok((v.to_vec(), remaining));
    }
    let mut basis: Vec<Vec<Complex64>> = vec![v.iter().map(|z| z / beta0).collect()];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let breakdown = 1e-12 * scale.max(f64::MIN_POSITIVE);

    loop {
        let j = basis.len() - 1;
        h.matvec(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        for (wi, qi) in w.iter_mut().zip(&basis[j]) {
            *wi -= qi * a;
        }
        if j > 0 {
            let b = betas[j - 1];
            for (wi, qi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= qi * b;
            }
        }
        for q in &basis {
            let c = dot(q, &w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= qi * c;
            }
        }
        alphas.push(a);
        let b = norm(&w);
        let k = alphas.len();
        let eig = tridiagonal_eigen(&alphas, &betas);

        // Invariant subspace reached: the projected exponential is exact.
        let exact = b <= breakdown || k == n;
        let estimate = |tau: f64| {
            if exact {
                0.0
            } else {
                beta0 * b * small_exponential(&eig, tau)[k - 1].norm()
            }
        };

        if exact || estimate(remaining) <= settings.tol || k >= settings.max_dim {
            let mut tau = remaining;
            let mut halvings = 0;
            while estimate(tau) > settings.tol {
                tau *= 0.5;
                halvings += 1;
                if halvings > 60 {
                    return Err(Error::Numerical(format!(
                        "Krylov step size underflow (|τ| < {:e})",
                        tau.abs()
                    )));
                }
            }
            let coeffs = small_exponential(&eig, tau);
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for (c, q) in coeffs.iter().zip(&basis) {
                let c = c * beta0;
                for (o, qi) in out.iter_mut().zip(q) {
                    *o += qi * c;
                }
            }
            return Ok((out, tau));
        }

        betas.push(b);
        basis.push(w.iter().map(|z| z / b).collect());
    }
}

/// Propagates `psi` by a signed time `time` with adaptive Krylov substeps.
pub fn propagate(
    h: &SparseHamiltonian,
    psi: &ManyBodyState,
    time: f64,
    settings: &KrylovSettings,
) -> Result<ManyBodyState> {
    settings.validate()?;
    if psi.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: psi.dim(),
        });
    }
    if !time.is_finite() {
        return Err(Error::InvalidInput("propagation time must be finite".into()));
    }
    let scale = h.one_norm();
    let mut v = psi.amplitudes().to_vec();
    let mut remaining = time;
    while remaining != 0.0 {
        let (next, tau) = krylov_substep(h, &v, remaining, settings, scale)?;
        if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("non-finite amplitudes during propagation".into()));
        }
        v = next;
        // Snap to zero once the leftover is below rounding of the elapsed time.
        remaining -= tau;
        if remaining.abs() <= 1e-15 * time.abs() {
            remaining = 0.0;
        }
    }
    ManyBodyState::new(v, psi.cutoff(), psi.num_sites())
}

/// States at each time of a non-decreasing, non-negative grid, starting from
/// `psi0` at time zero.
pub fn evolve_exact(
    h: &SparseHamiltonian,
    psi0: &ManyBodyState,
    t_grid: &[f64],
    tol: f64,
) -> Result<Vec<ManyBodyState>> {
    let settings = KrylovSettings::new(tol);
    settings.validate()?;
    check_normalized(psi0.amplitudes(), 1e-10, "initial many-body state")?;
    if t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput(
            "time grid must be finite, non-negative and increasing".into(),
        ));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    let mut current = psi0.clone();
    let mut t_current = 0.0;
    for &t in t_grid {
        if t > t_current {
            current = propagate(h, &current, t - t_current, &settings)?;
            t_current = t;
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// Dense spectral propagator `V e^{−itΛ} Vᵀ`.
pub struct DenseOracle {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl DenseOracle {
    pub fn new(h: &SparseHamiltonian) -> Result<Self> {
        if h.dim() > DENSE_ORACLE_MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "dense oracle limited to dimension {DENSE_ORACLE_MAX_DIM}, got {}",
                h.dim()
            )));
        }
        let eig = SymmetricEigen::new(h.to_dense());
        Ok(Self {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn propagate(&self, psi: &ManyBodyState, time: f64) -> Result<ManyBodyState> {
        let n = self.eigenvalues.len();
        if psi.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: psi.dim(),
            });
        }
        let amp = psi.amplitudes();
        let v = &self.eigenvectors;
        let coeffs: Vec<Complex64> = (0..n)
            .map(|j| {
                let c: Complex64 = (0..n).map(|i| amp[i] * v[(i, j)]).sum();
                c * Complex64::from_polar(1.0, -time * self.eigenvalues[j])
            })
            .collect();
        let out = (0..n)
            .map(|i| (0..n).map(|j| coeffs[j] * v[(i, j)]).sum())
            .collect();
        ManyBodyState::new(out, psi.cutoff(), psi.num_sites())
    }
}
