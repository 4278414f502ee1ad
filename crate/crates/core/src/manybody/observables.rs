use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{occupation, ManyBodyState, SparseHamiltonian};
use crate::error::{Error, Result};
use crate::fock::SiteOperator;

/// Operator whose expectation can be taken without building it densely.
#[derive(Clone, Copy, Debug)]
pub enum Observable<'a> {
    /// One-site operator acting on `site`.
    Site { site: usize, op: &'a SiteOperator },
    /// Two-site operator on `(first, second)`, matrix ordered slot 1 ⊗ slot 2.
    Bond {
        first: usize,
        second: usize,
        op: &'a DMatrix<Complex64>,
    },
    TotalNumber,
    Hamiltonian(&'a SparseHamiltonian),
}

/// `O_x ψ` for a one-site operator.
pub fn apply_site_operator(psi: &ManyBodyState, site: usize, op: &SiteOperator) -> Result<Vec<Complex64>> {
    let radix = psi.cutoff().dim();
    if op.dim() != radix {
        return Err(Error::DimensionMismatch {
            expected: radix,
            found: op.dim(),
        });
    }
    if site >= psi.num_sites() {
        return Err(Error::InvalidInput(format!("site {site} out of range")));
    }
    let stride = radix.pow(site as u32);
    let amp = psi.amplitudes();
    let m = op.matrix();
    Ok((0..amp.len())
        .map(|i| {
            let n = occupation(i, site, radix);
            let base = i - n * stride;
            (0..radix).map(|k| m[(n, k)] * amp[base + k * stride]).sum()
        })
        .collect())
}

fn apply_bond_operator(
    psi: &ManyBodyState,
    first: usize,
    second: usize,
    op: &DMatrix<Complex64>,
) -> Result<Vec<Complex64>> {
    let radix = psi.cutoff().dim();
    let pair = radix * radix;
    if op.nrows() != pair || op.ncols() != pair {
        return Err(Error::DimensionMismatch {
            expected: pair,
            found: op.nrows(),
        });
    }
    if first == second || first >= psi.num_sites() || second >= psi.num_sites() {
        return Err(Error::InvalidInput(format!("invalid site pair ({first}, {second})")));
    }
    let (s1, s2) = (radix.pow(first as u32), radix.pow(second as u32));
    let amp = psi.amplitudes();
    Ok((0..amp.len())
        .map(|i| {
            let n1 = occupation(i, first, radix);
            let n2 = occupation(i, second, radix);
            let base = i - n1 * s1 - n2 * s2;
            let row = n1 * radix + n2;
            let mut acc = Complex64::new(0.0, 0.0);
            for k1 in 0..radix {
                for k2 in 0..radix {
                    acc += op[(row, k1 * radix + k2)] * amp[base + k1 * s1 + k2 * s2];
                }
            }
            acc
        })
        .collect())
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn is_hermitian(m: &DMatrix<Complex64>) -> bool {
    let n = m.nrows();
    (0..n).all(|r| (0..n).all(|c| (m[(r, c)] - m[(c, r)].conj()).norm() <= 1e-14))
}

/// `⟨ψ, O ψ⟩`. For Hermitian observables the imaginary part is checked to be
/// at most `1e-10` relative to the magnitude of the result.
pub fn expectation(psi: &ManyBodyState, observable: Observable<'_>) -> Result<Complex64> {
    let amp = psi.amplitudes();
    let (value, hermitian) = match observable {
        Observable::Site { site, op } => (inner(amp, &apply_site_operator(psi, site, op)?), op.is_hermitian(1e-14)),
        Observable::Bond { first, second, op } => {
            (inner(amp, &apply_bond_operator(psi, first, second, op)?), is_hermitian(op))
        }
        Observable::TotalNumber => {
            let radix = psi.cutoff().dim();
            let total: f64 = amp
                .iter()
                .enumerate()
                .map(|(i, z)| {
                    let n: usize = (0..psi.num_sites()).map(|x| occupation(i, x, radix)).sum();
                    n as f64 * z.norm_sqr()
                })
                .sum();
            (Complex64::new(total, 0.0), true)
        }
        Observable::Hamiltonian(h) => {
            if h.dim() != psi.dim() {
                return Err(Error::DimensionMismatch {
                    expected: h.dim(),
                    found: psi.dim(),
                });
            }
            psi.check_compatible(h.lattice(), h.cutoff())?;
            (inner(amp, &h.apply(amp)), true)
        }
    };
    if hermitian && value.im.abs() > 1e-10 * value.norm().max(1.0) {
        return Err(Error::Numerical(format!(
            "Hermitian expectation has imaginary part {:e}",
            value.im
        )));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_ladder, FockCutoff};
    use crate::lattice::Lattice;
    use crate::manybody::{build_hamiltonian, product_state, ModelParams};

    #[test]
    fn total_number_simple_states() {
        let cut = FockCutoff::new(2);
        let vac = ManyBodyState::fock(&[0, 0, 0, 0], cut).unwrap();
        assert_eq!(expectation(&vac, Observable::TotalNumber).unwrap().re, 0.0);
        let ones = ManyBodyState::fock(&[1, 1, 1, 1], cut).unwrap();
        assert_eq!(expectation(&ones, Observable::TotalNumber).unwrap().re, 4.0);
    }

    #[test]
    fn site_and_bond_observables_factorize_on_products() {
        let lat = Lattice::new(3, 1).unwrap();
        let cut = FockCutoff::new(2);
        let phi = [
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.64),
            Complex64::new(0.48, 0.0),
        ];
        let psi = product_state(&phi, &lat).unwrap();
        let ladder = build_ladder(cut);
        let alpha = ladder.annihilator.expectation(&phi);
        let got = expectation(&psi, Observable::Site { site: 1, op: &ladder.annihilator }).unwrap();
        assert!((got - alpha).norm() < 1e-14);
        let hop = ladder.creation.matrix().kronecker(ladder.annihilator.matrix());
        let got = expectation(&psi, Observable::Bond { first: 2, second: 0, op: &hop }).unwrap();
        assert!((got - alpha.conj() * alpha).norm() < 1e-14);
    }

    #[test]
    fn hamiltonian_expectation_is_real() {
        let lat = Lattice::new(2, 1).unwrap();
        let cut = FockCutoff::new(1);
        let h = build_hamiltonian(ModelParams::new(1.0, 0.0, 0.0), &lat, cut).unwrap();
        let s = Complex64::new(0.5f64.sqrt(), 0.0);
        let psi = product_state(&[s, s], &lat).unwrap();
        let e = expectation(&psi, Observable::Hamiltonian(&h)).unwrap();
        assert!((e.re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn mismatched_cutoff_rejected() {
        let ladder = build_ladder(FockCutoff::new(3));
        let psi = ManyBodyState::fock(&[0, 1], FockCutoff::new(1)).unwrap();
        assert!(expectation(&psi, Observable::Site { site: 0, op: &ladder.number }).is_err());
    }
}
