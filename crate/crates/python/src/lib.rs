//! Python bindings: `import hubbard_lab`.

use hubbard_core::diagnostics::{run_compare, InitialState, RunSetup};
use hubbard_core::fock::FockCutoff;
use hubbard_core::lattice::Lattice;
use hubbard_core::manybody::{
    build_hamiltonian_with_budget, evolve_exact, expectation, product_state, ManyBodyState, MemoryBudget,
    ModelParams, Observable, SparseHamiltonian,
};
use hubbard_core::meanfield::{evolve_mf, order_parameter, IntegratorSettings};
use hubbard_core::reduced::{q_moment, reduce_one_site, trace_norm_distance, Projectors};
use hubbard_core::Error;
use num_complex::Complex64;
use pyo3::exceptions::{PyMemoryError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Resource { .. } => PyMemoryError::new_err(e.to_string()),
        Error::Numerical(_) | Error::Integration { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Lattice", module = "hubbard_lab", frozen)]
struct PyLattice {
    inner: Lattice,
}

#[pymethods]
impl PyLattice {
    #[new]
    fn new(side: usize, dimension: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Lattice::new(side, dimension).map_err(to_py)?,
        })
    }

    #[getter]
    fn side(&self) -> usize {
        self.inner.side()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn num_sites(&self) -> usize {
        self.inner.num_sites()
    }

    /// Forward bonds as `(source, target, direction)`.
    fn bonds(&self) -> Vec<(usize, usize, usize)> {
        self.inner.bonds().iter().map(|b| (b.source, b.target, b.direction)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Lattice(side={}, dimension={})", self.inner.side(), self.inner.dimension())
    }
}

#[pyclass(name = "ModelParams", module = "hubbard_lab", frozen)]
struct PyModelParams {
    inner: ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (J, mu, U))]
    #[allow(non_snake_case)]
    fn new(J: f64, mu: f64, U: f64) -> PyResult<Self> {
        let inner = ModelParams::new(J, mu, U);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter(J)]
    fn hopping(&self) -> f64 {
        self.inner.hopping
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.chemical_potential
    }

    #[getter(U)]
    fn interaction(&self) -> f64 {
        self.inner.interaction
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelParams(J={}, mu={}, U={})",
            self.inner.hopping, self.inner.chemical_potential, self.inner.interaction
        )
    }
}

#[pyclass(name = "Hamiltonian", module = "hubbard_lab", frozen)]
struct PyHamiltonian {
    inner: SparseHamiltonian,
}

#[pymethods]
impl PyHamiltonian {
    #[new]
    #[pyo3(signature = (params, lattice, max_occupation, memory_cap_bytes=None))]
    fn new(
        params: &PyModelParams,
        lattice: &PyLattice,
        max_occupation: usize,
        memory_cap_bytes: Option<u128>,
    ) -> PyResult<Self> {
        let budget = memory_cap_bytes.map(MemoryBudget::new).unwrap_or_default();
        let inner =
            build_hamiltonian_with_budget(params.inner, &lattice.inner, FockCutoff::new(max_occupation), &budget)
                .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    fn apply(&self, state: &PyState) -> PyResult<Vec<Complex64>> {
        if state.inner.dim() != self.inner.dim() {
            return Err(to_py(Error::DimensionMismatch {
                expected: self.inner.dim(),
                found: state.inner.dim(),
            }));
        }
        Ok(self.inner.apply(state.inner.amplitudes()))
    }

    fn energy(&self, state: &PyState) -> PyResult<f64> {
        Ok(expectation(&state.inner, Observable::Hamiltonian(&self.inner)).map_err(to_py)?.re)
    }
}

#[pyclass(name = "ManyBodyState", module = "hubbard_lab", frozen)]
struct PyState {
    inner: ManyBodyState,
}

#[pymethods]
impl PyState {
    #[new]
    fn new(amplitudes: Vec<Complex64>, max_occupation: usize, num_sites: usize) -> PyResult<Self> {
        Ok(Self {
            inner: ManyBodyState::new(amplitudes, FockCutoff::new(max_occupation), num_sites).map_err(to_py)?,
        })
    }

    /// `∏_x φ` on every site of `lattice`.
    #[staticmethod]
    fn product(phi: Vec<Complex64>, lattice: &PyLattice) -> PyResult<Self> {
        Ok(Self {
            inner: product_state(&phi, &lattice.inner).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn fock(occupations: Vec<usize>, max_occupation: usize) -> PyResult<Self> {
        Ok(Self {
            inner: ManyBodyState::fock(&occupations, FockCutoff::new(max_occupation)).map_err(to_py)?,
        })
    }

    #[getter]
    fn amplitudes(&self) -> Vec<Complex64> {
        self.inner.amplitudes().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn total_number(&self) -> PyResult<f64> {
        Ok(expectation(&self.inner, Observable::TotalNumber).map_err(to_py)?.re)
    }

    fn __len__(&self) -> usize {
        self.inner.dim()
    }
}

/// Exact states at each time of a non-decreasing grid starting at zero.
#[pyfunction]
#[pyo3(signature = (hamiltonian, psi0, times, krylov_tol=1e-10))]
fn exact_evolve(
    py: Python<'_>,
    hamiltonian: &PyHamiltonian,
    psi0: &PyState,
    times: Vec<f64>,
    krylov_tol: f64,
) -> PyResult<Vec<PyState>> {
    let states = py
        .detach(|| evolve_exact(&hamiltonian.inner, &psi0.inner, &times, krylov_tol))
        .map_err(to_py)?;
    Ok(states.into_iter().map(|inner| PyState { inner }).collect())
}

/// Mean-field wavefunctions `φ(t)` on a strictly increasing grid starting at zero.
#[pyfunction]
#[pyo3(signature = (phi0, params, max_occupation, times, dt=1e-3))]
fn mf_evolve(
    py: Python<'_>,
    phi0: Vec<Complex64>,
    params: &PyModelParams,
    max_occupation: usize,
    times: Vec<f64>,
    dt: f64,
) -> PyResult<Vec<Vec<Complex64>>> {
    let settings = IntegratorSettings { dt, richardson: false };
    let traj = py
        .detach(|| evolve_mf(&phi0, &params.inner, FockCutoff::new(max_occupation), &times, settings))
        .map_err(to_py)?;
    Ok(traj.states.into_iter().map(|s| s.phi).collect())
}

#[pyfunction(name = "order_parameter")]
fn py_order_parameter(phi: Vec<Complex64>) -> Complex64 {
    order_parameter(&phi)
}

/// Site-averaged one-site density matrix as a list of rows.
#[pyfunction(name = "reduce_one_site")]
fn py_reduce_one_site(state: &PyState, lattice: &PyLattice) -> PyResult<Vec<Vec<Complex64>>> {
    let g = reduce_one_site(&state.inner, &lattice.inner).map_err(to_py)?;
    let m = g.matrix();
    Ok((0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect())
}

/// `(Tr(γq), ‖γ − p‖₁)` for the one-site density of `state` and `p = |φ⟩⟨φ|`.
#[pyfunction]
fn distance_to_product(state: &PyState, lattice: &PyLattice, phi: Vec<Complex64>) -> PyResult<(f64, f64)> {
    let g = reduce_one_site(&state.inner, &lattice.inner).map_err(to_py)?;
    let proj = Projectors::new(&phi, g.cutoff()).map_err(to_py)?;
    Ok((q_moment(&g, &proj, 0), trace_norm_distance(&g, &proj).map_err(to_py)?))
}

/// Exact versus mean-field comparison from a Gutzwiller product start.
/// Returns a dict of per-time columns plus the derivative and equivalence
/// summaries.
#[pyfunction]
#[pyo3(signature = (
    params, lattice, max_occupation, amplitudes, t_final, n_samples,
    dt=1e-3, krylov_tol=1e-10, c_constant=1.0, seed=0, memory_cap_bytes=None
))]
#[allow(clippy::too_many_arguments)]
fn compare<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    lattice: &PyLattice,
    max_occupation: usize,
    amplitudes: Vec<Complex64>,
    t_final: f64,
    n_samples: usize,
    dt: f64,
    krylov_tol: f64,
    c_constant: f64,
    seed: u64,
    memory_cap_bytes: Option<u128>,
) -> PyResult<Bound<'py, PyDict>> {
    let setup = RunSetup {
        params: params.inner,
        lattice: lattice.inner.clone(),
        cutoff: FockCutoff::new(max_occupation),
        t_final,
        dt,
        n_samples,
        krylov_tol,
        initial: InitialState::Gutzwiller { amplitudes },
        c_constant,
        seed,
        budget: memory_cap_bytes.map(MemoryBudget::new).unwrap_or_default(),
    };
    let series = py.detach(|| run_compare(&setup)).map_err(to_py)?.series;
    let out = PyDict::new(py);
    let col = |f: fn(&hubbard_core::diagnostics::ComparisonRecord) -> f64| -> Vec<f64> {
        series.records.iter().map(f).collect()
    };
    out.set_item("t", col(|r| r.t))?;
    out.set_item("tr_gamma_q", col(|r| r.tr_gamma_q))?;
    out.set_item("trace_norm", col(|r| r.trace_norm))?;
    out.set_item(
        "alpha_micro",
        series.records.iter().map(|r| r.alpha_micro()).collect::<Vec<_>>(),
    )?;
    out.set_item("alpha_mf", series.records.iter().map(|r| r.alpha_mf()).collect::<Vec<_>>())?;
    out.set_item("energy_exact_per_site", col(|r| r.energy_exact_per_site))?;
    out.set_item("energy_mf", col(|r| r.energy_mf))?;
    out.set_item("f", col(|r| r.f))?;
    out.set_item("g", col(|r| r.g))?;
    if let Some(d) = series.derivative_check {
        let dc = PyDict::new(py);
        dc.set_item("measured", d.measured)?;
        dc.set_item("bound", d.bound)?;
        dc.set_item("pass", d.pass)?;
        out.set_item("derivative_check", dc)?;
    }
    let eq = PyDict::new(py);
    eq.set_item("status", format!("{:?}", series.equivalence.status).to_lowercase())?;
    eq.set_item("c", series.equivalence.c)?;
    eq.set_item("min_slack", series.equivalence.min_slack)?;
    eq.set_item("minimal_c_constant", series.equivalence.minimal_c_constant)?;
    out.set_item("equivalence", eq)?;
    Ok(out)
}

#[pymodule]
fn hubbard_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLattice>()?;
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyHamiltonian>()?;
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(exact_evolve, m)?)?;
    m.add_function(wrap_pyfunction!(mf_evolve, m)?)?;
    m.add_function(wrap_pyfunction!(py_order_parameter, m)?)?;
    m.add_function(wrap_pyfunction!(py_reduce_one_site, m)?)?;
    m.add_function(wrap_pyfunction!(distance_to_product, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
