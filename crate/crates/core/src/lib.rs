//! Bose–Hubbard lattice dynamics next to its Gutzwiller mean-field limit.
//!
//! * [`fock`]: truncated single-site ladder operators.
//! * [`lattice`]: periodic `(Z/LZ)^d` with its directed bond list.
//! * [`manybody`]: Fock product space, sparse Hamiltonian, Krylov propagation.
//! * [`meanfield`]: the one-site nonlinear equation and its conserved quantities.
//! * [`reduced`]: one- and two-site reduced density matrices and trace norms.
//! * [`diagnostics`]: exact-vs-mean-field comparison series and dimension sweeps.

pub mod diagnostics;
pub mod error;
pub mod fock;
pub mod lattice;
pub mod manybody;
pub mod meanfield;
pub mod random;
pub mod reduced;

pub use error::{Error, Result};
