//! One- and two-site reduced densities of a many-body state.
//!
//! Partial traces stream over the amplitude vector using the mixed-radix
//! layout, so `|Ψ⟩⟨Ψ|` is never formed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{build_ladder, FockCutoff};
use crate::lattice::Lattice;
use crate::manybody::{occupation, ManyBodyState, ModelParams};

type CMatrix = DMatrix<Complex64>;

fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

fn eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    // Symmetrize so roundoff in the upper triangle cannot leak in.
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.try_symmetric_eigen(f64::EPSILON, 10_000)
        .map(|e| e.eigenvalues.iter().copied().collect())
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))
}

/// `Tr(A B)` without forming the product.
fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn check_density(m: &CMatrix, what: &str) -> Result<()> {
    if hermitian_defect(m) > 1e-12 {
        return Err(Error::InvalidInput(format!("{what} is not Hermitian")));
    }
    let t = trace(m);
    if (t - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::InvalidInput(format!("{what} has trace {t}")));
    }
    let lowest = eigenvalues(m)?.into_iter().fold(f64::INFINITY, f64::min);
    if lowest < -1e-10 {
        return Err(Error::InvalidInput(format!("{what} has eigenvalue {lowest:e}")));
    }
    Ok(())
}

/// Site-averaged one-site reduced density `γ⁽¹⁾`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneSiteDensity {
    matrix: CMatrix,
    cutoff: FockCutoff,
}

impl OneSiteDensity {
    /// Wraps a matrix after checking Hermiticity, unit trace and positivity.
    pub fn from_matrix(matrix: CMatrix, cutoff: FockCutoff) -> Result<Self> {
        if matrix.nrows() != cutoff.dim() || matrix.ncols() != cutoff.dim() {
            return Err(Error::DimensionMismatch {
                expected: cutoff.dim(),
                found: matrix.nrows(),
            });
        }
        check_density(&matrix, "one-site density")?;
        Ok(Self { matrix, cutoff })
    }

    /// `|φ⟩⟨φ|`.
    pub fn pure(phi: &[Complex64], cutoff: FockCutoff) -> Result<Self> {
        Ok(Self {
            matrix: Projectors::new(phi, cutoff)?.p,
            cutoff,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn trace(&self) -> f64 {
        trace(&self.matrix).re
    }

    /// `Tr(γ A)` for a one-site operator `A`.
    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        trace_product(&self.matrix, op)
    }

    /// `Tr(γ 𝒩^k)`.
    pub fn number_moment(&self, k: f64) -> f64 {
        (0..self.cutoff.dim())
            .map(|n| (n as f64).powf(k) * self.matrix[(n, n)].re)
            .sum()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigenvalues(&self.matrix)
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.matrix)
    }
}

/// Bond-averaged two-site reduced density `γ⁽²⁾`, ordered slot 1 ⊗ slot 2
/// with basis index `n₁ (M + 1) + n₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSiteDensity {
    matrix: CMatrix,
    cutoff: FockCutoff,
}

impl TwoSiteDensity {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn trace(&self) -> f64 {
        trace(&self.matrix).re
    }

    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        trace_product(&self.matrix, op)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigenvalues(&self.matrix)
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.matrix)
    }

    /// `S γ S` with `S` exchanging the slots.
    pub fn swapped(&self) -> CMatrix {
        swap_slots(&self.matrix, self.cutoff.dim())
    }

    /// Partial trace over slot 2, leaving slot 1.
    pub fn trace_second(&self) -> CMatrix {
        let r = self.cutoff.dim();
        CMatrix::from_fn(r, r, |a, b| (0..r).map(|k| self.matrix[(a * r + k, b * r + k)]).sum())
    }

    /// Partial trace over slot 1, leaving slot 2.
    pub fn trace_first(&self) -> CMatrix {
        let r = self.cutoff.dim();
        CMatrix::from_fn(r, r, |a, b| (0..r).map(|k| self.matrix[(k * r + a, k * r + b)]).sum())
    }
}

fn swap_slots(m: &CMatrix, r: usize) -> CMatrix {
    let sw = |i: usize| (i % r) * r + i / r;
    CMatrix::from_fn(r * r, r * r, |a, b| m[(sw(a), sw(b))])
}

/// `p = |φ⟩⟨φ|` and `q = 1 − p`.
#[derive(Clone, Debug, PartialEq)]
pub struct Projectors {
    pub p: CMatrix,
    pub q: CMatrix,
}

impl Projectors {
    /// Requires `‖φ‖ = 1` within `1e-10`.
    pub fn new(phi: &[Complex64], cutoff: FockCutoff) -> Result<Self> {
        if phi.len() != cutoff.dim() {
            return Err(Error::DimensionMismatch {
                expected: cutoff.dim(),
                found: phi.len(),
            });
        }
        crate::manybody::check_normalized(phi, 1e-10, "projector state")?;
        let n = phi.len();
        let p = CMatrix::from_fn(n, n, |r, c| phi[r] * phi[c].conj());
        let q = CMatrix::identity(n, n) - &p;
        Ok(Self { p, q })
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }
}

fn check_state(psi: &ManyBodyState, lattice: &Lattice) -> Result<usize> {
    if psi.num_sites() != lattice.num_sites() {
        return Err(Error::DimensionMismatch {
            expected: lattice.num_sites(),
            found: psi.num_sites(),
        });
    }
    Ok(psi.cutoff().dim())
}

fn site_trace(amp: &[Complex64], site: usize, radix: usize) -> CMatrix {
    let stride = radix.pow(site as u32);
    let mut m = CMatrix::zeros(radix, radix);
    for (i, z) in amp.iter().enumerate() {
        let n = occupation(i, site, radix);
        let base = i - n * stride;
        for k in 0..radix {
            m[(n, k)] += z * amp[base + k * stride].conj();
        }
    }
    m
}

fn pair_trace(amp: &[Complex64], x: usize, y: usize, radix: usize) -> CMatrix {
    let (sx, sy) = (radix.pow(x as u32), radix.pow(y as u32));
    let mut m = CMatrix::zeros(radix * radix, radix * radix);
    for (i, z) in amp.iter().enumerate() {
        let n1 = occupation(i, x, radix);
        let n2 = occupation(i, y, radix);
        let base = i - n1 * sx - n2 * sy;
        let row = n1 * radix + n2;
        for k1 in 0..radix {
            for k2 in 0..radix {
                m[(row, k1 * radix + k2)] += z * amp[base + k1 * sx + k2 * sy].conj();
            }
        }
    }
    m
}

/// Sums in index order so the result does not depend on scheduling.
fn ordered_sum(parts: Vec<CMatrix>, n: usize) -> CMatrix {
    parts.into_iter().fold(CMatrix::zeros(n, n), |acc, m| acc + m)
}

/// `γ⁽¹⁾ = (1/|Λ|) Σ_x Tr_{Λ∖{x}} |Ψ⟩⟨Ψ|`.
pub fn reduce_one_site(psi: &ManyBodyState, lattice: &Lattice) -> Result<OneSiteDensity> {
    let radix = check_state(psi, lattice)?;
    let amp = psi.amplitudes();
    let parts: Vec<CMatrix> = (0..lattice.num_sites())
        .into_par_iter()
        .map(|x| site_trace(amp, x, radix))
        .collect();
    let matrix = ordered_sum(parts, radix) / Complex64::new(lattice.num_sites() as f64, 0.0);
    Ok(OneSiteDensity {
        matrix,
        cutoff: psi.cutoff(),
    })
}

/// `γ⁽²⁾ = (1/(2d|Λ|)) Σ_{(x,y)} (γ_xy + γ_yx)` over the directed bond list.
pub fn reduce_two_site(psi: &ManyBodyState, lattice: &Lattice) -> Result<TwoSiteDensity> {
    let radix = check_state(psi, lattice)?;
    let amp = psi.amplitudes();
    let parts: Vec<CMatrix> = lattice
        .bonds()
        .par_iter()
        .map(|b| {
            let m = pair_trace(amp, b.source, b.target, radix);
            let s = swap_slots(&m, radix);
            m + s
        })
        .collect();
    let norm = 2.0 * lattice.bonds().len() as f64;
    let matrix = ordered_sum(parts, radix * radix) / Complex64::new(norm, 0.0);
    Ok(TwoSiteDensity {
        matrix,
        cutoff: psi.cutoff(),
    })
}

/// `‖γ − p‖₁` from the eigenvalues of the Hermitian difference.
pub fn trace_norm_distance(gamma: &OneSiteDensity, proj: &Projectors) -> Result<f64> {
    if proj.dim() != gamma.cutoff.dim() {
        return Err(Error::DimensionMismatch {
            expected: gamma.cutoff.dim(),
            found: proj.dim(),
        });
    }
    Ok(eigenvalues(&(&gamma.matrix - &proj.p))?.iter().map(|e| e.abs()).sum())
}

/// `Tr(γ q)` for `k = 0` and `Tr(γ q𝒩^k q)` for `k ≥ 1`. Beyond `k = 2M` the
/// truncated moment no longer tracks the untruncated one.
pub fn q_moment(gamma: &OneSiteDensity, proj: &Projectors, k: u32) -> f64 {
    let n = proj.dim();
    if k == 0 {
        trace_product(&gamma.matrix, &proj.q).re
    } else {
        let nk = CMatrix::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::new((r as f64).powi(k as i32), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        trace_product(&gamma.matrix, &(&proj.q * nk * &proj.q)).re
    }
}

/// `Tr(γ⁽¹⁾((J − μ)𝒩 + (U/2)𝒩(𝒩 − 1))) − J Tr(γ⁽²⁾ a*⊗a)`, the energy per site.
pub fn energy_per_site(gamma1: &OneSiteDensity, gamma2: &TwoSiteDensity, params: &ModelParams) -> Result<f64> {
    let cutoff = gamma1.cutoff;
    if gamma2.cutoff != cutoff {
        return Err(Error::DimensionMismatch {
            expected: cutoff.dim(),
            found: gamma2.cutoff.dim(),
        });
    }
    let onsite: f64 = (0..cutoff.dim())
        .map(|n| params.onsite_energy(n) * gamma1.matrix[(n, n)].re)
        .sum();
    Ok(onsite - params.hopping * kinetic_term(gamma2).re)
}

/// `Tr(γ⁽²⁾ a*⊗a)`.
pub fn kinetic_term(gamma2: &TwoSiteDensity) -> Complex64 {
    let ladder = build_ladder(gamma2.cutoff);
    gamma2.expectation(&ladder.creation.matrix().kronecker(ladder.annihilator.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manybody::{build_hamiltonian, expectation, mixed_product_state, product_state, Observable};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn bell() -> ManyBodyState {
        let s = 0.5f64.sqrt();
        // |10⟩ is index 1 and |01⟩ is index 2.
        ManyBodyState::new(vec![c(0.0), c(s), c(s), c(0.0)], FockCutoff::new(1), 2).unwrap()
    }

    #[test]
    fn product_state_reduces_to_projector() {
        let lat = Lattice::new(3, 1).unwrap();
        let cut = FockCutoff::new(2);
        let phi = [c(0.6), Complex64::new(0.0, 0.64), c(0.48)];
        let psi = product_state(&phi, &lat).unwrap();
        let g1 = reduce_one_site(&psi, &lat).unwrap();
        let proj = Projectors::new(&phi, cut).unwrap();
        assert!((g1.matrix() - &proj.p).norm() < 1e-12);
        let g2 = reduce_two_site(&psi, &lat).unwrap();
        assert!((g2.matrix() - proj.p.kronecker(&proj.p)).norm() < 1e-12);
        assert!(trace_norm_distance(&g1, &proj).unwrap() < 1e-7);
        assert!(q_moment(&g1, &proj, 0).abs() < 1e-12);
    }

    #[test]
    fn entangled_pair() {
        let lat = Lattice::new(2, 1).unwrap();
        let g1 = reduce_one_site(&bell(), &lat).unwrap();
        let expected = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.5), c(0.5)]));
        assert!((g1.matrix() - expected).norm() < 1e-15);
        let g2 = reduce_two_site(&bell(), &lat).unwrap();
        let m = g2.matrix();
        // slot ordering n1·2 + n2: |10⟩ ↦ 2, |01⟩ ↦ 1
        for (r, col, v) in [(1, 1, 0.5), (2, 2, 0.5), (1, 2, 0.5), (2, 1, 0.5)] {
            assert!((m[(r, col)] - c(v)).norm() < 1e-15);
        }
        assert!((m.norm_squared() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_perturbed_site() {
        let lat = Lattice::new(2, 2).unwrap();
        let cut = FockCutoff::new(2);
        let s = 0.5f64.sqrt();
        let phi = [c(s), c(s), c(0.0)];
        let perp = [c(s), c(-s), c(0.0)];
        let psi = mixed_product_state(&phi, &perp, &[3], &lat).unwrap();
        let g1 = reduce_one_site(&psi, &lat).unwrap();
        let proj = Projectors::new(&phi, cut).unwrap();
        assert!((q_moment(&g1, &proj, 0) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn orthogonal_pure_state_distance() {
        let cut = FockCutoff::new(1);
        let g = OneSiteDensity::pure(&[c(0.0), c(1.0)], cut).unwrap();
        let proj = Projectors::new(&[c(1.0), c(0.0)], cut).unwrap();
        assert!((trace_norm_distance(&g, &proj).unwrap() - 2.0).abs() < 1e-14);
        assert!((q_moment(&g, &proj, 0) - 1.0).abs() < 1e-15);
        assert!((q_moment(&g, &proj, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn energy_identity_on_product() {
        let lat = Lattice::new(2, 2).unwrap();
        let cut = FockCutoff::new(2);
        let p = ModelParams::new(1.0, 0.5, 1.0);
        let phi = [c(0.6), Complex64::new(0.0, 0.64), c(0.48)];
        let psi = product_state(&phi, &lat).unwrap();
        let h = build_hamiltonian(p, &lat, cut).unwrap();
        let e = expectation(&psi, Observable::Hamiltonian(&h)).unwrap().re / 4.0;
        let g1 = reduce_one_site(&psi, &lat).unwrap();
        let g2 = reduce_two_site(&psi, &lat).unwrap();
        assert!((energy_per_site(&g1, &g2, &p).unwrap() - e).abs() < 1e-12);
        let mf = crate::meanfield::mf_energy(&phi, &p);
        assert!((mf - e).abs() < 1e-12);
    }

    #[test]
    fn from_matrix_validates() {
        let cut = FockCutoff::new(1);
        let bad = CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.6), c(0.6), c(0.5)]);
        assert!(OneSiteDensity::from_matrix(bad, cut).is_err());
        let unnormalized = CMatrix::identity(2, 2);
        assert!(OneSiteDensity::from_matrix(unnormalized, cut).is_err());
        let ok = CMatrix::identity(2, 2) * c(0.5);
        assert!(OneSiteDensity::from_matrix(ok, cut).is_ok());
    }
}
