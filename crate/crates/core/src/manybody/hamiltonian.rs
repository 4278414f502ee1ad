use num_complex::Complex64;
use rayon::prelude::*;

use super::{decode, MemoryBudget, ModelParams};
use crate::error::Result;
use crate::fock::FockCutoff;
use crate::lattice::Lattice;

/// Real symmetric Bose–Hubbard Hamiltonian in compressed sparse row layout.
///
/// All couplings are real, so the matrix is real symmetric and Hermitian
/// as a complex operator; entries are stored as `f64`.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    row_offsets: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<f64>,
    params: ModelParams,
    lattice: Lattice,
    cutoff: FockCutoff,
}

/// Assembles `H` under the default 2 GiB memory budget.
pub fn build_hamiltonian(
    params: ModelParams,
    lattice: &Lattice,
    cutoff: FockCutoff,
) -> Result<SparseHamiltonian> {
    build_hamiltonian_with_budget(params, lattice, cutoff, &MemoryBudget::default())
}

/// Assembles
/// `H = −J/(2d) Σ_bonds (a*_x a_y + a*_y a_x) + (J − μ) Σ_x N_x + (U/2) Σ_x N_x(N_x − 1)`
/// where the bond sum runs over the directed bond list of the lattice.
pub fn build_hamiltonian_with_budget(
    params: ModelParams,
    lattice: &Lattice,
    cutoff: FockCutoff,
    budget: &MemoryBudget,
) -> Result<SparseHamiltonian> {
    params.validate()?;
    let dim = budget.check(lattice, cutoff)?;
    let radix = cutoff.dim();
    let max = cutoff.max_occupation();
    let num_sites = lattice.num_sites();
    let hop = -params.hopping / (2.0 * lattice.dimension() as f64);
    let strides: Vec<usize> = (0..num_sites).map(|x| radix.pow(x as u32)).collect();
    let onsite: Vec<f64> = (0..radix).map(|n| params.onsite_energy(n)).collect();
    let sqrt: Vec<f64> = (0..=radix).map(|n| (n as f64).sqrt()).collect();
    let bonds = lattice.bonds();

    let rows: Vec<Vec<(usize, f64)>> = (0..dim)
        .into_par_iter()
        .map_init(
            || vec![0usize; num_sites],
            |occ, row| {
                decode(row, radix, occ);
                let mut entries = Vec::with_capacity(1 + 2 * bonds.len());
                entries.push((row, occ.iter().map(|&n| onsite[n]).sum::<f64>()));
                if hop != 0.0 {
                    for b in bonds {
                        let (x, y) = (b.source, b.target);
                        // ⟨row| a*_x a_y |col⟩ with col = row − e_x + e_y
                        if occ[x] > 0 && occ[y] < max {
                            let col = row - strides[x] + strides[y];
                            entries.push((col, hop * (sqrt[occ[x]] * sqrt[occ[y] + 1])));
                        }
                        // ⟨row| a*_y a_x |col⟩ with col = row − e_y + e_x
                        if occ[y] > 0 && occ[x] < max {
                            let col = row - strides[y] + strides[x];
                            entries.push((col, hop * (sqrt[occ[y]] * sqrt[occ[x] + 1])));
                        }
                    }
                }
                entries.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
                for (col, v) in entries {
                    match merged.last_mut() {
                        Some(last) if last.0 == col => last.1 += v,
                        _ => merged.push((col, v)),
                    }
                }
                merged
            },
        )
        .collect();

    let nnz = rows.iter().map(Vec::len).sum();
    let mut row_offsets = Vec::with_capacity(dim + 1);
    let mut columns = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    row_offsets.push(0);
    for row in rows {
        for (c, v) in row {
            columns.push(c);
            values.push(v);
        }
        row_offsets.push(columns.len());
    }

    Ok(SparseHamiltonian {
        row_offsets,
        columns,
        values,
        params,
        lattice: lattice.clone(),
        cutoff,
    })
}

impl SparseHamiltonian {
    pub fn dim(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    /// Stored entries of one row as `(column, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        self.columns[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// `out = H v`. Rows are independent and each row sums in column order,
    /// so the result does not depend on the thread count.
    pub fn matvec(&self, v: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(v.len(), self.dim());
        assert_eq!(out.len(), self.dim());
        out.par_iter_mut()
            .with_min_len(1024)
            .enumerate()
            .for_each(|(r, o)| {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                    acc += v[self.columns[k]] * self.values[k];
                }
                *o = acc;
            });
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.matvec(v, &mut out);
        out
    }

    /// Maximum absolute row sum, an upper bound on the spectral radius.
    pub fn one_norm(&self) -> f64 {
        (0..self.dim())
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for r in 0..n {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manybody::{product_state, ManyBodyState};

    fn expect(h: &SparseHamiltonian, psi: &ManyBodyState) -> Complex64 {
        let hv = h.apply(psi.amplitudes());
        psi.amplitudes().iter().zip(&hv).map(|(a, b)| a.conj() * b).sum()
    }

    #[test]
    fn vacuum_energy_is_zero() {
        let lat = Lattice::new(3, 1).unwrap();
        let cut = FockCutoff::new(2);
        let h = build_hamiltonian(ModelParams::new(0.7, -0.3, 1.9), &lat, cut).unwrap();
        let vac = ManyBodyState::fock(&[0, 0, 0], cut).unwrap();
        assert_eq!(expect(&h, &vac), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn single_particle_energy() {
        let lat = Lattice::new(2, 1).unwrap();
        let cut = FockCutoff::new(1);
        let p = ModelParams::new(1.3, 0.4, 2.0);
        let h = build_hamiltonian(p, &lat, cut).unwrap();
        let psi = ManyBodyState::fock(&[1, 0], cut).unwrap();
        let e = expect(&h, &psi);
        assert!((e.re - (1.3 - 0.4)).abs() < 1e-14);
    }

    #[test]
    fn two_site_hopping_block() {
        let lat = Lattice::new(2, 1).unwrap();
        let cut = FockCutoff::new(1);
        let h = build_hamiltonian(ModelParams::new(1.0, 0.0, 0.0), &lat, cut).unwrap();
        let dense = h.to_dense();
        // |10⟩ is index 1, |01⟩ is index 2; both bonds at L = 2 add up.
        assert!((dense[(1, 2)] + 1.0).abs() < 1e-15);
        assert!((dense[(2, 1)] + 1.0).abs() < 1e-15);
        assert!((dense[(1, 1)] - 1.0).abs() < 1e-15);
        assert!((dense[(3, 3)] - 2.0).abs() < 1e-15);
        assert_eq!(dense[(0, 0)], 0.0);
    }

    #[test]
    fn gutzwiller_energy_matches_dense() {
        let lat = Lattice::new(2, 1).unwrap();
        let cut = FockCutoff::new(1);
        let h = build_hamiltonian(ModelParams::new(1.0, 0.0, 0.0), &lat, cut).unwrap();
        let s = Complex64::new(0.5f64.sqrt(), 0.0);
        let psi = product_state(&[s, s], &lat).unwrap();
        // Dense brute force: amplitudes all 1/2, so ⟨H⟩ = Σ_rc H_rc / 4.
        let dense = h.to_dense();
        let brute: f64 = dense.iter().sum::<f64>() / 4.0;
        let e = expect(&h, &psi);
        assert!((e.re - brute).abs() < 1e-14);
        // |Λ|·((J − μ)⟨N⟩ − J|α|²) = 2·(1/2 − 1/4)
        assert!((e.re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn symmetric_storage() {
        let lat = Lattice::new(3, 1).unwrap();
        let h = build_hamiltonian(ModelParams::new(0.8, 0.1, 1.0), &lat, FockCutoff::new(3)).unwrap();
        let d = h.to_dense();
        assert_eq!(d, d.transpose());
    }
}
