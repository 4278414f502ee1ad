//! Many-body Fock product space on a periodic lattice.
//!
//! Basis states are occupation tuples `(n_x)` encoded in mixed radix `M + 1`
//! with site 0 varying fastest, so site `x` has stride `(M+1)^x`.

mod hamiltonian;
mod observables;
mod propagate;

pub use hamiltonian::{build_hamiltonian, build_hamiltonian_with_budget, SparseHamiltonian};
pub use observables::{apply_site_operator, expectation, Observable};
pub use propagate::{evolve_exact, propagate, DenseOracle, KrylovSettings, DENSE_ORACLE_MAX_DIM};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockCutoff;
use crate::lattice::Lattice;

/// Bose–Hubbard couplings (ħ = 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "J")]
    pub hopping: f64,
    #[serde(rename = "mu")]
    pub chemical_potential: f64,
    #[serde(rename = "U")]
    pub interaction: f64,
}

impl ModelParams {
    pub fn new(hopping: f64, chemical_potential: f64, interaction: f64) -> Self {
        Self {
            hopping,
            chemical_potential,
            interaction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hopping.is_finite() && self.chemical_potential.is_finite() && self.interaction.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("model parameters must be finite: {self:?}")))
        }
    }

    /// On-site diagonal energy `(J − μ) n + (U/2) n(n − 1)`.
    pub fn onsite_energy(&self, n: usize) -> f64 {
        let n = n as f64;
        (self.hopping - self.chemical_potential) * n + 0.5 * self.interaction * n * (n - 1.0)
    }
}

/// Krylov dimension used for the memory estimate and by default in propagation.
pub const DEFAULT_KRYLOV_DIM: usize = 30;

/// Default memory budget for a many-body run: 2 GiB.
pub const DEFAULT_MEMORY_CAP_BYTES: u128 = 2 * 1024 * 1024 * 1024;

/// Upper bound on the bytes a many-body run touches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryBudget {
    pub cap_bytes: u128,
}

impl Default for MemoryBudget {
    fn default() -> Self {
        Self {
            cap_bytes: DEFAULT_MEMORY_CAP_BYTES,
        }
    }
}

impl MemoryBudget {
    pub fn new(cap_bytes: u128) -> Self {
        Self { cap_bytes }
    }

    /// Workspace estimate for one exact run on `(lattice, cutoff)`:
    ///
    /// * `(K + 5)` complex vectors of length `D` (16 bytes per entry), where
    ///   `K` is the Krylov dimension and the five extra vectors hold the state,
    ///   the matvec target, the output and two reduction buffers;
    /// * the sparse Hamiltonian with at most `1 + 2·d·L^d` entries per row,
    ///   16 bytes each (value + column), plus `8·(D + 1)` bytes of row offsets.
    pub fn required_bytes(lattice: &Lattice, cutoff: FockCutoff) -> Option<u128> {
        let dim = checked_basis_dim(cutoff, lattice.num_sites())?;
        let vectors = (DEFAULT_KRYLOV_DIM as u128 + 5).checked_mul(dim)?.checked_mul(16)?;
        let per_row = 1 + 2 * lattice.bonds().len() as u128;
        let sparse = dim.checked_mul(per_row)?.checked_mul(16)?;
        let offsets = (dim + 1).checked_mul(8)?;
        vectors.checked_add(sparse)?.checked_add(offsets)
    }

    pub fn check(&self, lattice: &Lattice, cutoff: FockCutoff) -> Result<usize> {
        let required = Self::required_bytes(lattice, cutoff).unwrap_or(u128::MAX);
        if required > self.cap_bytes {
            return Err(Error::Resource {
                what: format!(
                    "Fock space (M+1)^(L^d) = {}^{}",
                    cutoff.dim(),
                    lattice.num_sites()
                ),
                required,
                available: self.cap_bytes,
            });
        }
        // Fits in the budget, hence in usize.
        Ok(checked_basis_dim(cutoff, lattice.num_sites()).unwrap() as usize)
    }
}

fn checked_basis_dim(cutoff: FockCutoff, num_sites: usize) -> Option<u128> {
    (cutoff.dim() as u128).checked_pow(u32::try_from(num_sites).ok()?)
}

/// Occupation of `site` in basis index `index` (radix `M + 1`).
#[inline]
pub fn occupation(index: usize, site: usize, radix: usize) -> usize {
    (index / radix.pow(site as u32)) % radix
}

/// Decodes all occupations of a basis index into `out`.
#[inline]
pub fn decode(mut index: usize, radix: usize, out: &mut [usize]) {
    for n in out.iter_mut() {
        *n = index % radix;
        index /= radix;
    }
}

/// Amplitude vector over the Fock product basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ManyBodyState {
    amplitudes: Vec<Complex64>,
    cutoff: FockCutoff,
    num_sites: usize,
}

impl ManyBodyState {
    pub fn new(amplitudes: Vec<Complex64>, cutoff: FockCutoff, num_sites: usize) -> Result<Self> {
        let expected = checked_basis_dim(cutoff, num_sites)
            .filter(|&d| d <= usize::MAX as u128)
            .ok_or_else(|| Error::InvalidInput("basis dimension overflows".into()))? as usize;
        if amplitudes.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: amplitudes.len(),
            });
        }
        Ok(Self {
            amplitudes,
            cutoff,
            num_sites,
        })
    }

    /// Fock basis state with the given occupation per site.
    pub fn fock(occupations: &[usize], cutoff: FockCutoff) -> Result<Self> {
        let radix = cutoff.dim();
        if let Some(&n) = occupations.iter().find(|&&n| n >= radix) {
            return Err(Error::InvalidInput(format!(
                "occupation {n} exceeds cutoff M = {}",
                cutoff.max_occupation()
            )));
        }
        let num_sites = occupations.len();
        let dim = checked_basis_dim(cutoff, num_sites)
            .filter(|&d| d <= usize::MAX as u128)
            .ok_or_else(|| Error::InvalidInput("basis dimension overflows".into()))? as usize;
        let index = occupations.iter().rev().fold(0, |acc, &n| acc * radix + n);
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            amplitudes,
            cutoff,
            num_sites,
        })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self, other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &ManyBodyState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn distance(&self, other: &ManyBodyState) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn with_global_phase(&self, theta: f64) -> Self {
        let phase = Complex64::from_polar(1.0, theta);
        Self {
            amplitudes: self.amplitudes.iter().map(|z| z * phase).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn check_compatible(&self, lattice: &Lattice, cutoff: FockCutoff) -> Result<()> {
        if self.num_sites != lattice.num_sites() {
            return Err(Error::DimensionMismatch {
                expected: lattice.num_sites(),
                found: self.num_sites,
            });
        }
        if self.cutoff != cutoff {
            return Err(Error::DimensionMismatch {
                expected: cutoff.dim(),
                found: self.cutoff.dim(),
            });
        }
        Ok(())
    }
}

pub(crate) fn check_normalized(v: &[Complex64], tol: f64, what: &str) -> Result<()> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > tol || !norm.is_finite() {
        return Err(Error::InvalidInput(format!(
            "{what} must be normalized (|norm - 1| <= {tol:e}), got norm {norm}"
        )));
    }
    Ok(())
}

/// Gutzwiller product `∏_x φ_x` of one site wavefunction over every site.
pub fn product_state(site_wavefunction: &[Complex64], lattice: &Lattice) -> Result<ManyBodyState> {
    let per_site = vec![site_wavefunction; lattice.num_sites()];
    product_state_of(&per_site)
}

/// Product state with `φ⊥` on the sites listed in `perturbed` and `φ` elsewhere.
pub fn mixed_product_state(
    phi: &[Complex64],
    phi_perp: &[Complex64],
    perturbed: &[usize],
    lattice: &Lattice,
) -> Result<ManyBodyState> {
    if phi.len() != phi_perp.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            found: phi_perp.len(),
        });
    }
    let mut per_site = vec![phi; lattice.num_sites()];
    for &x in perturbed {
        if x >= lattice.num_sites() {
            return Err(Error::InvalidInput(format!("site {x} is outside the lattice")));
        }
        per_site[x] = phi_perp;
    }
    product_state_of(&per_site)
}

fn product_state_of(per_site: &[&[Complex64]]) -> Result<ManyBodyState> {
    let dim = per_site
        .first()
        .map(|v| v.len())
        .ok_or_else(|| Error::InvalidInput("empty lattice".into()))?;
    if dim == 0 {
        return Err(Error::InvalidInput("site wavefunction is empty".into()));
    }
    for v in per_site {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        check_normalized(v, 1e-12, "site wavefunction")?;
    }
    let cutoff = FockCutoff::new(dim - 1);
    let total = checked_basis_dim(cutoff, per_site.len())
        .filter(|&d| d <= (isize::MAX as u128) / 16)
        .ok_or_else(|| Error::InvalidInput("basis dimension overflows".into()))? as usize;
    let mut amplitudes = Vec::with_capacity(total);
    amplitudes.push(Complex64::new(1.0, 0.0));
    // Site x is the digit of weight dim^x: extend the vector one site at a time.
    for v in per_site {
        let len = amplitudes.len();
        let mut next = Vec::with_capacity(len * dim);
        for &c in v.iter() {
            next.extend(amplitudes.iter().map(|a| a * c));
        }
        amplitudes = next;
    }
    ManyBodyState::new(amplitudes, cutoff, per_site.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn vacuum_product() {
        let lat = Lattice::new(2, 2).unwrap();
        let psi = product_state(&[c(1.0), c(0.0), c(0.0)], &lat).unwrap();
        assert_eq!(psi.dim(), 81);
        assert_eq!(psi.amplitudes()[0], c(1.0));
        assert!(psi.amplitudes()[1..].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn two_site_superposition() {
        let lat = Lattice::new(2, 1).unwrap();
        let s = 0.5f64.sqrt();
        let psi = product_state(&[c(s), c(s)], &lat).unwrap();
        for z in psi.amplitudes() {
            assert!((z - c(0.5)).norm() < 1e-15);
        }
        assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mixed_product_multiplies_amplitudes() {
        let lat = Lattice::new(2, 1).unwrap();
        let phi = [c(1.0), c(0.0)];
        let perp = [c(0.0), c(1.0)];
        let psi = mixed_product_state(&phi, &perp, &[1], &lat).unwrap();
        // site 1 occupied, site 0 empty: index 0 + 1*2 = 2
        assert_eq!(psi.amplitudes()[2], c(1.0));
        assert_eq!(psi.amplitudes().iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn rejects_unnormalized_site_state() {
        let lat = Lattice::new(2, 1).unwrap();
        assert!(product_state(&[c(1.0), c(1.0)], &lat).is_err());
    }

    #[test]
    fn fock_state_index() {
        let psi = ManyBodyState::fock(&[1, 0], FockCutoff::new(1)).unwrap();
        assert_eq!(psi.amplitudes()[1], c(1.0));
        let psi = ManyBodyState::fock(&[0, 2, 1], FockCutoff::new(2)).unwrap();
        assert_eq!(psi.amplitudes()[2 * 3 + 9], c(1.0));
        assert!(ManyBodyState::fock(&[3], FockCutoff::new(2)).is_err());
    }

    #[test]
    fn memory_budget_rules() {
        let budget = MemoryBudget::default();
        let d4 = Lattice::new(2, 4).unwrap();
        assert!(budget.check(&d4, FockCutoff::new(1)).is_ok());
        let err = budget.check(&d4, FockCutoff::new(2)).unwrap_err();
        assert!(err.is_resource());
        assert_eq!(budget.check(&d4, FockCutoff::new(1)).unwrap(), 65536);
    }

    #[test]
    fn decode_matches_occupation() {
        let mut occ = [0usize; 4];
        for i in 0..81 {
            decode(i, 3, &mut occ);
            for (x, &n) in occ.iter().enumerate() {
                assert_eq!(n, occupation(i, x, 3));
            }
        }
    }
}
