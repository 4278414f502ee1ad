//! Truncated single-site Fock space.
//!
//! A site keeps the occupation states `|0⟩ … |M⟩`. The ladder matrices built
//! here are simultaneously the physical operators restricted to that space
//! and the cutoff operators `a_M = a·1{N ≤ M}`, `a*_M = 1{N ≤ M}·a*`: the
//! matrix simply has no row for occupation `M + 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Maximum occupation `M` retained on a single site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockCutoff {
    max_occupation: usize,
}

impl FockCutoff {
    pub fn new(max_occupation: usize) -> Self {
        Self { max_occupation }
    }

    pub fn max_occupation(&self) -> usize {
        self.max_occupation
    }

    /// Dimension `M + 1` of the site space.
    pub fn dim(&self) -> usize {
        self.max_occupation + 1
    }
}

/// Dense operator on one truncated site.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteOperator {
    matrix: DMatrix<Complex64>,
    cutoff: FockCutoff,
}

impl SiteOperator {
    pub fn from_matrix(matrix: DMatrix<Complex64>, cutoff: FockCutoff) -> Result<Self> {
        let dim = cutoff.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { matrix, cutoff })
    }

    pub fn identity(cutoff: FockCutoff) -> Self {
        Self {
            matrix: DMatrix::identity(cutoff.dim(), cutoff.dim()),
            cutoff,
        }
    }

    /// Diagonal operator `Σ_n f(n) |n⟩⟨n|`.
    pub fn diagonal(cutoff: FockCutoff, f: impl Fn(usize) -> f64) -> Self {
        let dim = cutoff.dim();
        let mut matrix = DMatrix::zeros(dim, dim);
        for n in 0..dim {
            matrix[(n, n)] = Complex64::new(f(n), 0.0);
        }
        Self { matrix, cutoff }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff.dim()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            cutoff: self.cutoff,
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|r| (0..n).all(|c| (self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm() <= tol))
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|r| (0..n).map(|c| self.matrix[(r, c)] * v[c]).sum())
            .collect()
    }

    /// `⟨v, O v⟩`.
    pub fn expectation(&self, v: &[Complex64]) -> Complex64 {
        self.apply(v)
            .iter()
            .zip(v)
            .map(|(ov, vi)| vi.conj() * ov)
            .sum()
    }
}

/// The three ladder matrices of one truncated site.
#[derive(Clone, Debug)]
pub struct Ladder {
    pub annihilator: SiteOperator,
    pub creation: SiteOperator,
    pub number: SiteOperator,
}

pub fn build_ladder(cutoff: FockCutoff) -> Ladder {
    let dim = cutoff.dim();
    let mut a = DMatrix::<Complex64>::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let annihilator = SiteOperator { matrix: a, cutoff };
    let creation = annihilator.adjoint();
    // Built from the integer diagonal rather than a†a so entries are exact.
    let number = SiteOperator::diagonal(cutoff, |n| n as f64);
    Ladder {
        annihilator,
        creation,
        number,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_entries_for_m2() {
        let l = build_ladder(FockCutoff::new(2));
        let a = l.annihilator.matrix();
        assert_eq!(a[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(a[(1, 2)], Complex64::new(2f64.sqrt(), 0.0));
        let nonzero = a.iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn vacuum_cutoff_is_trivial() {
        let l = build_ladder(FockCutoff::new(0));
        assert_eq!(l.annihilator.dim(), 1);
        assert_eq!(l.annihilator.matrix()[(0, 0)], Complex64::new(0.0, 0.0));
        let out = l.annihilator.apply(&[Complex64::new(1.0, 0.0)]);
        assert_eq!(out[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn commutator_for_m3() {
        let l = build_ladder(FockCutoff::new(3));
        let a = l.annihilator.matrix();
        let ad = l.creation.matrix();
        let comm = a * ad - ad * a;
        for r in 0..4 {
            for c in 0..4 {
                let expected = match (r, c) {
                    (3, 3) => -3.0,
                    (r, c) if r == c => 1.0,
                    _ => 0.0,
                };
                assert!((comm[(r, c)] - Complex64::new(expected, 0.0)).norm() <= 1e-13);
            }
        }
        let number = ad * a;
        assert!((number - l.number.matrix()).iter().all(|z| z.norm() <= 1e-13));
    }

    #[test]
    fn creation_is_exact_adjoint() {
        for m in [1, 2, 4, 8, 16, 64] {
            let l = build_ladder(FockCutoff::new(m));
            assert_eq!(l.creation.matrix(), &l.annihilator.matrix().adjoint());
            assert!(l.number.is_hermitian(0.0));
        }
    }

    #[test]
    fn rejects_wrong_shape() {
        let m = DMatrix::<Complex64>::zeros(3, 3);
        assert!(SiteOperator::from_matrix(m, FockCutoff::new(1)).is_err());
    }
}
