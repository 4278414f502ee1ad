//! Exact-versus-mean-field monitors: `Tr(γ⁽¹⁾q)`, the trace-norm error, the
//! order parameters, the excitation functionals `f` and `g`, moment bounds
//! and sweeps over the lattice dimension.

use num_complex::Complex64;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{build_ladder, FockCutoff};
use crate::lattice::Lattice;
use crate::manybody::{
    apply_site_operator, build_hamiltonian_with_budget, evolve_exact, expectation, mixed_product_state,
    product_state, propagate, KrylovSettings, ManyBodyState, MemoryBudget, ModelParams, Observable,
    SparseHamiltonian,
};
use crate::meanfield::{
    evolve_mf, mf_energy, mf_generator, mf_moment, moment_bound_exponential, moment_bound_polynomial,
    order_parameter, pad_to_cutoff, propagate_mf, uniform_grid, IntegratorSettings, MfTrajectory,
};
use crate::random::seeded;
use crate::reduced::{
    kinetic_term, q_moment, reduce_one_site, reduce_two_site, trace_norm_distance, OneSiteDensity, Projectors,
};

/// Step of the centered difference used for the derivative bound at `t = 0`.
pub const DERIVATIVE_STEP: f64 = 1e-3;
/// Relative slack allowed in the derivative bound check.
pub const DERIVATIVE_SLACK: f64 = 0.1;

/// `(1/|Λ|) Σ_x ⟨Ψ, a_x Ψ⟩`.
pub fn alpha_micro(psi: &ManyBodyState, lattice: &Lattice) -> Result<Complex64> {
    Ok(alpha_of(&reduce_one_site(psi, lattice)?))
}

fn alpha_of(gamma: &OneSiteDensity) -> Complex64 {
    gamma.expectation(build_ladder(gamma.cutoff()).annihilator.matrix())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Excitation {
    pub f: f64,
    pub g: f64,
}

fn excitation_from(
    gamma: &OneSiteDensity,
    energy_per_site: f64,
    phi: &[Complex64],
    params: &ModelParams,
    c: f64,
) -> Result<Excitation> {
    let cutoff = gamma.cutoff();
    let proj = Projectors::new(phi, cutoff)?;
    let h = mf_generator(phi, params, cutoff)?.into_matrix();
    let q = &proj.q;
    let op = q * &h * q - &h + q * Complex64::new(c, 0.0);
    let f = energy_per_site + gamma.expectation(&op).re;
    let g = q_moment(gamma, &proj, 2) + q_moment(gamma, &proj, 0);
    Ok(Excitation { f, g })
}

/// `f = ⟨Ψ, HΨ⟩/|Λ| + Tr(γ⁽¹⁾(q h^φ q − h^φ + c q))` and
/// `g = Tr(γ⁽¹⁾(q𝒩²q + q))`.
pub fn excitation_functionals(
    psi: &ManyBodyState,
    h: &SparseHamiltonian,
    phi: &[Complex64],
    c: f64,
) -> Result<Excitation> {
    let gamma = reduce_one_site(psi, h.lattice())?;
    let energy = expectation(psi, Observable::Hamiltonian(h))?.re / h.lattice().num_sites() as f64;
    excitation_from(&gamma, energy, phi, &h.params(), c)
}

/// Coefficient `K` of the free constant in
/// `c = C·K + U/4`, `K = (1 + J² + (J − μ − U/2)²)(1 + 1/ε + ⟨φ₀, 𝒩φ₀⟩²)`, `ε = U/4`.
/// The `1/ε` term is dropped when `U ≤ 0`.
pub fn c_prefactor(params: &ModelParams, phi0: &[Complex64]) -> f64 {
    let (j, mu, u) = (params.hopping, params.chemical_potential, params.interaction);
    let n0 = phi0.iter().enumerate().map(|(n, z)| n as f64 * z.norm_sqr()).sum::<f64>();
    let inv_eps = if u > 0.0 { 4.0 / u } else { 0.0 };
    (1.0 + j * j + (j - mu - 0.5 * u).powi(2)) * (1.0 + inv_eps + n0 * n0)
}

pub fn default_c(params: &ModelParams, phi0: &[Complex64], constant: f64) -> f64 {
    constant * c_prefactor(params, phi0) + 0.25 * params.interaction
}

/// `(1/|Λ|²) Σ_{x,y} |⟨Ψ, a*_y a_x Ψ⟩ − |α_φ|²|²`, with
/// `⟨a*_y a_x⟩ = ⟨a_y Ψ, a_x Ψ⟩`.
pub fn hilbert_schmidt_average(psi: &ManyBodyState, alpha_mf: Complex64) -> Result<f64> {
    let ladder = build_ladder(psi.cutoff());
    let n = psi.num_sites();
    let lowered: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|x| apply_site_operator(psi, x, &ladder.annihilator))
        .collect::<Result<_>>()?;
    let a2 = alpha_mf.norm_sqr();
    let mut total = 0.0;
    for vy in &lowered {
        for vx in &lowered {
            let k: Complex64 = vy.iter().zip(vx).map(|(a, b)| a.conj() * b).sum();
            total += (k - a2).norm_sqr();
        }
    }
    Ok(total / (n * n) as f64)
}

/// How the many-body and mean-field initial data are built.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    /// `Ψ₀ = ∏_x φ₀` and mean-field start `φ₀`.
    Gutzwiller { amplitudes: Vec<Complex64> },
    /// `φ⊥` on `num_perturbed` sites drawn from the run seed, `φ₀` elsewhere.
    PerturbedGutzwiller {
        amplitudes: Vec<Complex64>,
        perp_amplitudes: Vec<Complex64>,
        num_perturbed: usize,
    },
    /// A Fock basis state; the mean-field start is `|n⟩` for the most
    /// frequent occupation `n` (smallest on ties).
    FockTuple { occupations: Vec<usize> },
}

impl InitialState {
    pub fn many_body(&self, lattice: &Lattice, cutoff: FockCutoff, seed: u64) -> Result<ManyBodyState> {
        match self {
            InitialState::Gutzwiller { amplitudes } => product_state(&pad_to_cutoff(amplitudes, cutoff)?, lattice),
            InitialState::PerturbedGutzwiller {
                amplitudes,
                perp_amplitudes,
                num_perturbed,
            } => {
                let sites = perturbed_sites(lattice.num_sites(), *num_perturbed, seed)?;
                mixed_product_state(
                    &pad_to_cutoff(amplitudes, cutoff)?,
                    &pad_to_cutoff(perp_amplitudes, cutoff)?,
                    &sites,
                    lattice,
                )
            }
            InitialState::FockTuple { occupations } => {
                if occupations.len() != lattice.num_sites() {
                    return Err(Error::DimensionMismatch {
                        expected: lattice.num_sites(),
                        found: occupations.len(),
                    });
                }
                ManyBodyState::fock(occupations, cutoff)
            }
        }
    }

    pub fn mean_field(&self, cutoff: FockCutoff) -> Result<Vec<Complex64>> {
        match self {
            InitialState::Gutzwiller { amplitudes } | InitialState::PerturbedGutzwiller { amplitudes, .. } => {
                pad_to_cutoff(amplitudes, cutoff)
            }
            InitialState::FockTuple { occupations } => {
                let mut counts = vec![0usize; cutoff.dim()];
                for &n in occupations {
                    if n > cutoff.max_occupation() {
                        return Err(Error::InvalidInput(format!("occupation {n} exceeds the cutoff")));
                    }
                    counts[n] += 1;
                }
                // max_by_key keeps the last maximum, so scan in reverse.
                let n = (0..counts.len()).rev().max_by_key(|&n| counts[n]).unwrap_or(0);
                let mut phi = vec![Complex64::new(0.0, 0.0); cutoff.dim()];
                phi[n] = Complex64::new(1.0, 0.0);
                Ok(phi)
            }
        }
    }
}

/// Sorted list of `count` distinct sites drawn with the ChaCha20 stream of `seed`.
pub fn perturbed_sites(num_sites: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > num_sites {
        return Err(Error::InvalidInput(format!(
            "cannot perturb {count} of {num_sites} sites"
        )));
    }
    let mut sites = sample(&mut seeded(seed), num_sites, count).into_vec();
    sites.sort_unstable();
    Ok(sites)
}

/// Everything needed for one exact and/or mean-field run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSetup {
    pub params: ModelParams,
    pub lattice: Lattice,
    pub cutoff: FockCutoff,
    pub t_final: f64,
    pub dt: f64,
    pub n_samples: usize,
    pub krylov_tol: f64,
    pub initial: InitialState,
    /// Free constant `C` in the default `c`.
    pub c_constant: f64,
    pub seed: u64,
    pub budget: MemoryBudget,
}

impl RunSetup {
    pub fn times(&self) -> Vec<f64> {
        uniform_grid(self.t_final, self.n_samples)
    }

    pub fn c(&self) -> Result<f64> {
        Ok(default_c(&self.params, &self.initial.mean_field(self.cutoff)?, self.c_constant))
    }
}

/// Many-body states on a time grid together with their Hamiltonian.
#[derive(Clone, Debug)]
pub struct ExactTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ManyBodyState>,
    pub hamiltonian: SparseHamiltonian,
    pub krylov_tol: f64,
}

pub fn run_exact(setup: &RunSetup) -> Result<ExactTrajectory> {
    let hamiltonian = build_hamiltonian_with_budget(setup.params, &setup.lattice, setup.cutoff, &setup.budget)?;
    let psi0 = setup.initial.many_body(&setup.lattice, setup.cutoff, setup.seed)?;
    let times = setup.times();
    let states = evolve_exact(&hamiltonian, &psi0, &times, setup.krylov_tol)?;
    Ok(ExactTrajectory {
        times,
        states,
        hamiltonian,
        krylov_tol: setup.krylov_tol,
    })
}

pub fn run_meanfield(setup: &RunSetup) -> Result<MfTrajectory> {
    let phi0 = setup.initial.mean_field(setup.cutoff)?;
    evolve_mf(
        &phi0,
        &setup.params,
        setup.cutoff,
        &setup.times(),
        IntegratorSettings {
            dt: setup.dt,
            richardson: true,
        },
    )
}

/// One row of the exact-versus-mean-field comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRecord {
    pub t: f64,
    pub tr_gamma_q: f64,
    pub trace_norm: f64,
    pub alpha_micro_re: f64,
    pub alpha_micro_im: f64,
    pub alpha_mf_re: f64,
    pub alpha_mf_im: f64,
    pub energy_exact_per_site: f64,
    pub energy_mf: f64,
    pub f: f64,
    pub g: f64,
    pub exact_norm: f64,
    pub exact_total_n: f64,
    pub mf_norm: f64,
    pub mf_n: f64,
    /// `Tr(γ⁽¹⁾ q(𝒩 + 1)q)`.
    pub q_number_moment: f64,
    /// `(1/|Λ|²) Σ_{x,y} |⟨a*_y a_x⟩ − |α_φ|²|²`.
    pub hs_average: f64,
    /// `Tr(γ⁽²⁾ a*⊗a)`, the bond average of `⟨a*_x a_y⟩`.
    pub kinetic_exact: f64,
    /// `|α_φ|²`.
    pub kinetic_mf: f64,
}

impl ComparisonRecord {
    pub fn alpha_micro(&self) -> Complex64 {
        Complex64::new(self.alpha_micro_re, self.alpha_micro_im)
    }

    pub fn alpha_mf(&self) -> Complex64 {
        Complex64::new(self.alpha_mf_re, self.alpha_mf_im)
    }

    /// `‖γ − p‖₁ − 2Tr(γq)`, non-negative when the lower bound holds.
    pub fn sandwich_lower_slack(&self) -> f64 {
        self.trace_norm - 2.0 * self.tr_gamma_q
    }

    /// `2√2 √Tr(γq) − ‖γ − p‖₁`, non-negative when the upper bound holds.
    pub fn sandwich_upper_slack(&self) -> f64 {
        2.0 * 2f64.sqrt() * self.tr_gamma_q.max(0.0).sqrt() - self.trace_norm
    }
}

/// Centered-difference check of the derivative bound at `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub step: f64,
    /// `|Tr(γq)(h) − Tr(γq)(−h)| / 2h`.
    pub measured: f64,
    /// `|J|(⟨𝒩⟩_p + 1)^½ (8⟨𝒩⟩_p^½ Q + 4 Q^½ Tr(γq(𝒩+1)q)^½ + ⟨𝒩⟩_p^½ / d)` at `t = 0`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

/// Lower bound `(U/4)g − 1/d ≤ f` over the sampled times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub status: CheckStatus,
    pub c: f64,
    /// Free constant implied by `c`.
    pub c_constant: f64,
    /// `min_t (f − (U/4)g + 1/d)`.
    pub min_slack: f64,
    /// Smallest free constant for which the bound holds at every sampled
    /// time; `None` when no finite value works.
    pub minimal_c_constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonSeries {
    pub dimension: usize,
    pub side: usize,
    pub max_occupation: usize,
    pub records: Vec<ComparisonRecord>,
    pub derivative_check: Option<DerivativeCheck>,
    pub equivalence: EquivalenceReport,
}

impl ComparisonSeries {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn sup_tr_gamma_q(&self) -> f64 {
        self.records.iter().map(|r| r.tr_gamma_q).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_trace_norm(&self) -> f64 {
        self.records.iter().map(|r| r.trace_norm).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest slack over both sides of the trace-norm sandwich.
    pub fn sandwich_min_slack(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.sandwich_lower_slack().min(r.sandwich_upper_slack()))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn final_alpha_error(&self) -> f64 {
        self.records
            .last()
            .map(|r| (r.alpha_micro() - r.alpha_mf()).norm())
            .unwrap_or(0.0)
    }
}

fn tr_gamma_q(psi: &ManyBodyState, lattice: &Lattice, phi: &[Complex64]) -> Result<f64> {
    let gamma = reduce_one_site(psi, lattice)?;
    Ok(q_moment(&gamma, &Projectors::new(phi, gamma.cutoff())?, 0))
}

fn derivative_check(exact: &ExactTrajectory, mf: &MfTrajectory) -> Result<DerivativeCheck> {
    let h = &exact.hamiltonian;
    let lattice = h.lattice();
    let params = h.params();
    let settings = KrylovSettings::new(exact.krylov_tol);
    let psi0 = &exact.states[0];
    let phi0 = &mf.states[0].phi;
    let step = DERIVATIVE_STEP;
    let mf_dt = mf.settings.dt.min(step);
    let side = |sign: f64| -> Result<f64> {
        let psi = propagate(h, psi0, sign * step, &settings)?;
        let phi = propagate_mf(phi0, &params, mf.cutoff, sign * step, mf_dt)?;
        let norm = phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let phi: Vec<Complex64> = phi.iter().map(|z| z / norm).collect();
        tr_gamma_q(&psi, lattice, &phi)
    };
    let measured = ((side(1.0)? - side(-1.0)?) / (2.0 * step)).abs();

    let gamma = reduce_one_site(psi0, lattice)?;
    let proj = Projectors::new(phi0, mf.cutoff)?;
    let q = q_moment(&gamma, &proj, 0).max(0.0);
    let qnq = (q_moment(&gamma, &proj, 1) + q).max(0.0);
    let n_p = mf_moment(phi0, 1.0)?;
    let d = lattice.dimension() as f64;
    let bound = params.hopping.abs()
        * (n_p + 1.0).sqrt()
        * (8.0 * n_p.sqrt() * q + 4.0 * q.sqrt() * qnq.sqrt() + n_p.sqrt() / d);
    Ok(DerivativeCheck {
        step,
        measured,
        bound,
        pass: measured <= bound * (1.0 + DERIVATIVE_SLACK),
    })
}

fn equivalence(records: &[ComparisonRecord], params: &ModelParams, phi0: &[Complex64], c: f64, d: usize) -> EquivalenceReport {
    let u = params.interaction;
    let k = c_prefactor(params, phi0);
    let c_constant = (c - 0.25 * u) / k;
    let inv_d = 1.0 / d as f64;
    let min_slack = records
        .iter()
        .map(|r| r.f - 0.25 * u * r.g + inv_d)
        .fold(f64::INFINITY, f64::min);
    if u <= 0.0 {
        return EquivalenceReport {
            status: CheckStatus::NotApplicable,
            c,
            c_constant,
            min_slack,
            minimal_c_constant: None,
        };
    }
    // f is affine in C: f = f₀ + (C·K + U/4)·Tr(γq).
    let mut minimal: Option<f64> = Some(0.0);
    for r in records {
        let f0 = r.f - c * r.tr_gamma_q;
        let deficit = 0.25 * u * r.g - inv_d - f0 - 0.25 * u * r.tr_gamma_q;
        if r.tr_gamma_q > 0.0 {
            let need = deficit / (k * r.tr_gamma_q);
            minimal = minimal.map(|m| m.max(need));
        } else if deficit > 0.0 {
            minimal = None;
        }
    }
    EquivalenceReport {
        status: if min_slack >= 0.0 { CheckStatus::Pass } else { CheckStatus::Fail },
        c,
        c_constant,
        min_slack,
        minimal_c_constant: minimal,
    }
}

/// Builds the comparison series on the common time grid and checks the
/// derivative bound at `t = 0`.
pub fn gronwall_track(exact: &ExactTrajectory, mf: &MfTrajectory, c: f64) -> Result<ComparisonSeries> {
    let h = &exact.hamiltonian;
    let lattice = h.lattice();
    let params = h.params();
    if mf.cutoff != h.cutoff() {
        return Err(Error::DimensionMismatch {
            expected: h.cutoff().dim(),
            found: mf.cutoff.dim(),
        });
    }
    let mf_times = mf.times();
    if exact.times.len() != mf_times.len() || exact.times.iter().zip(&mf_times).any(|(a, b)| a != b) {
        return Err(Error::InvalidInput("exact and mean-field time grids differ".into()));
    }
    let sites = lattice.num_sites() as f64;
    let records = exact
        .states
        .iter()
        .zip(&mf.states)
        .map(|(psi, s)| -> Result<ComparisonRecord> {
            // The integrator does not renormalize; projectors use the unit direction.
            let mf_norm = s.norm();
            let phi: Vec<Complex64> = s.phi.iter().map(|z| z / mf_norm).collect();
            let gamma = reduce_one_site(psi, lattice)?;
            let gamma2 = reduce_two_site(psi, lattice)?;
            let proj = Projectors::new(&phi, mf.cutoff)?;
            let energy = expectation(psi, Observable::Hamiltonian(h))?.re / sites;
            let exc = excitation_from(&gamma, energy, &phi, &params, c)?;
            let q = q_moment(&gamma, &proj, 0);
            let alpha = alpha_of(&gamma);
            Ok(ComparisonRecord {
                t: s.t,
                tr_gamma_q: q,
                trace_norm: trace_norm_distance(&gamma, &proj)?,
                alpha_micro_re: alpha.re,
                alpha_micro_im: alpha.im,
                alpha_mf_re: s.alpha.re,
                alpha_mf_im: s.alpha.im,
                energy_exact_per_site: energy,
                energy_mf: mf_energy(&s.phi, &params),
                f: exc.f,
                g: exc.g,
                exact_norm: psi.norm(),
                exact_total_n: expectation(psi, Observable::TotalNumber)?.re,
                mf_norm,
                mf_n: s.number(),
                q_number_moment: q_moment(&gamma, &proj, 1) + q,
                hs_average: hilbert_schmidt_average(psi, order_parameter(&phi))?,
                kinetic_exact: kinetic_term(&gamma2).re,
                kinetic_mf: s.alpha.norm_sqr(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let derivative_check = if exact.times.first() == Some(&0.0) {
        Some(derivative_check(exact, mf)?)
    } else {
        None
    };
    let equivalence = equivalence(&records, &params, &mf.states[0].phi, c, lattice.dimension());
    Ok(ComparisonSeries {
        dimension: lattice.dimension(),
        side: lattice.side(),
        max_occupation: h.cutoff().max_occupation(),
        records,
        derivative_check,
        equivalence,
    })
}

#[derive(Clone, Debug)]
pub struct CompareRun {
    pub exact: ExactTrajectory,
    pub meanfield: MfTrajectory,
    pub series: ComparisonSeries,
}

pub fn run_compare(setup: &RunSetup) -> Result<CompareRun> {
    let exact = run_exact(setup)?;
    let meanfield = run_meanfield(setup)?;
    let series = gronwall_track(&exact, &meanfield, setup.c()?)?;
    Ok(CompareRun {
        exact,
        meanfield,
        series,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    Ok,
    ResourceRejected,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub d: usize,
    #[serde(rename = "L")]
    pub side: usize,
    #[serde(rename = "M")]
    pub max_occupation: usize,
    pub seed: u64,
    pub status: SweepStatus,
    pub sup_tr_gamma_q: Option<f64>,
    pub sup_trace_norm: Option<f64>,
    pub final_alpha_error: Option<f64>,
    pub inv_d: f64,
    /// `sup_t Tr(γ⁽¹⁾q) / (1/d)`.
    pub tr_gamma_q_times_d: Option<f64>,
    pub required_bytes: Option<u128>,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.status == SweepStatus::Failed)
    }

    /// Completed rows for one `(M, seed)` ordered by `d`.
    pub fn series(&self, max_occupation: usize, seed: u64) -> Vec<&SweepRow> {
        let mut rows: Vec<&SweepRow> = self
            .rows
            .iter()
            .filter(|r| r.max_occupation == max_occupation && r.seed == seed && r.status == SweepStatus::Ok)
            .collect();
        rows.sort_by_key(|r| r.d);
        rows
    }
}

/// Runs the comparison at each `(d, M)` point and seed. Oversize points are
/// recorded as rejected and the remaining points still run.
pub fn sweep_points(base: &RunSetup, points: &[(usize, usize)], seeds: &[u64]) -> Result<SweepResult> {
    let jobs: Vec<(usize, usize, u64)> = points
        .iter()
        .flat_map(|&(d, m)| seeds.iter().map(move |&s| (d, m, s)))
        .collect();
    let mut rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(d, m, seed)| sweep_row(base, d, m, seed))
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| (r.d, r.max_occupation, r.seed));
    Ok(SweepResult { rows })
}

/// `sweep_points` with the base cutoff at every dimension.
pub fn d_sweep(base: &RunSetup, d_list: &[usize], seeds: &[u64]) -> Result<SweepResult> {
    let m = base.cutoff.max_occupation();
    let points: Vec<(usize, usize)> = d_list.iter().map(|&d| (d, m)).collect();
    sweep_points(base, &points, seeds)
}

fn sweep_row(base: &RunSetup, d: usize, m: usize, seed: u64) -> Result<SweepRow> {
    let lattice = Lattice::new(base.lattice.side(), d)?;
    let cutoff = FockCutoff::new(m);
    let mut row = SweepRow {
        d,
        side: lattice.side(),
        max_occupation: m,
        seed,
        status: SweepStatus::Ok,
        sup_tr_gamma_q: None,
        sup_trace_norm: None,
        final_alpha_error: None,
        inv_d: 1.0 / d as f64,
        tr_gamma_q_times_d: None,
        required_bytes: MemoryBudget::required_bytes(&lattice, cutoff),
        message: None,
    };
    let setup = RunSetup {
        lattice,
        cutoff,
        seed,
        ..base.clone()
    };
    match run_compare(&setup) {
        Ok(run) => {
            let sup_q = run.series.sup_tr_gamma_q();
            row.sup_tr_gamma_q = Some(sup_q);
            row.sup_trace_norm = Some(run.series.sup_trace_norm());
            row.final_alpha_error = Some(run.series.final_alpha_error());
            row.tr_gamma_q_times_d = Some(sup_q * d as f64);
        }
        Err(e) if e.is_resource() => {
            row.status = SweepStatus::ResourceRejected;
            row.message = Some(e.to_string());
        }
        Err(e @ (Error::InvalidInput(_) | Error::DimensionMismatch { .. })) => return Err(e),
        Err(e) => {
            row.status = SweepStatus::Failed;
            row.message = Some(e.to_string());
        }
    }
    Ok(row)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentEntry {
    pub k: f64,
    pub t: f64,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
    /// Second mean-field bound, for `k ≥ 1`.
    pub polynomial_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub source: String,
    pub entries: Vec<MomentEntry>,
    pub pass: bool,
}

fn within(measured: f64, bound: f64) -> bool {
    measured <= bound + 1e-12 * bound.abs().max(1.0)
}

/// Mean-field moments `⟨φ(t), 𝒩^k φ(t)⟩` against both mean-field bounds.
pub fn mf_moment_report(mf: &MfTrajectory, ks: &[f64]) -> Result<MomentReport> {
    let phi0 = &mf.states[0].phi;
    let n0 = mf_moment(phi0, 1.0)?;
    let j = mf.params.hopping;
    let mut entries = Vec::new();
    let mut pass = true;
    for &k in ks {
        let m0 = mf_moment(phi0, k)?;
        for s in &mf.states {
            let measured = mf_moment(&s.phi, k)?;
            let bound = moment_bound_exponential(m0, n0, k, j, s.t);
            let polynomial_bound = if k >= 1.0 {
                Some(moment_bound_polynomial(phi0, k, j, s.t)?)
            } else {
                None
            };
            pass &= within(measured, bound) && polynomial_bound.is_none_or(|b| within(measured, b));
            entries.push(MomentEntry {
                k,
                t: s.t,
                measured,
                bound,
                margin: bound - measured,
                polynomial_bound,
            });
        }
    }
    Ok(MomentReport {
        source: "meanfield".into(),
        entries,
        pass,
    })
}

/// Many-body moments `Tr(γ⁽¹⁾(t) 𝒩^k)` against
/// `(Tr(γ⁽¹⁾(0)𝒩^k) + k^k/e) e^{2e|J|kt}`.
pub fn exact_moment_report(exact: &ExactTrajectory, ks: &[f64]) -> Result<MomentReport> {
    let lattice = exact.hamiltonian.lattice();
    let j = exact.hamiltonian.params().hopping;
    let gammas = exact
        .states
        .iter()
        .map(|psi| reduce_one_site(psi, lattice))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = Vec::new();
    let mut pass = true;
    for &k in ks {
        let m0 = gammas[0].number_moment(k);
        for (gamma, &t) in gammas.iter().zip(&exact.times) {
            let measured = gamma.number_moment(k);
            // Same form as the mean-field bound with ⟨𝒩⟩₀ replaced by 1.
            let bound = moment_bound_exponential(m0, 1.0, k, j, t);
            pass &= within(measured, bound);
            entries.push(MomentEntry {
                k,
                t,
                measured,
                bound,
                margin: bound - measured,
                polynomial_bound: None,
            });
        }
    }
    Ok(MomentReport {
        source: "exact".into(),
        entries,
        pass,
    })
}

/// Smallest `c` with `P(n) ≤ c e^{−n/a}` for every occupation `n`.
pub fn decay_constant(probabilities: &[f64], a: f64) -> f64 {
    probabilities
        .iter()
        .enumerate()
        .map(|(n, p)| p * (n as f64 / a).exp())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn setup(d: usize, m: usize, params: ModelParams, initial: InitialState) -> RunSetup {
        RunSetup {
            params,
            lattice: Lattice::new(2, d).unwrap(),
            cutoff: FockCutoff::new(m),
            t_final: 0.5,
            dt: 1e-3,
            n_samples: 6,
            krylov_tol: 1e-10,
            initial,
            c_constant: 1.0,
            seed: 3,
            budget: MemoryBudget::default(),
        }
    }

    fn coherent_like() -> InitialState {
        let s = 0.5f64.sqrt();
        InitialState::Gutzwiller {
            amplitudes: vec![c(s), c(s)],
        }
    }

    #[test]
    fn alpha_micro_examples() {
        let lat = Lattice::new(2, 1).unwrap();
        let cut = FockCutoff::new(2);
        let vac = ManyBodyState::fock(&[0, 0], cut).unwrap();
        assert_eq!(alpha_micro(&vac, &lat).unwrap(), c(0.0));
        let fock = ManyBodyState::fock(&[1, 2], cut).unwrap();
        assert_eq!(alpha_micro(&fock, &lat).unwrap(), c(0.0));
        let phi = [c(0.6), Complex64::new(0.0, 0.64), c(0.48)];
        let psi = product_state(&phi, &lat).unwrap();
        assert!((alpha_micro(&psi, &lat).unwrap() - order_parameter(&phi)).norm() < 1e-14);
    }

    #[test]
    fn g_vanishes_on_gutzwiller_and_counts_one_perturbed_site() {
        let lat = Lattice::new(2, 2).unwrap();
        let cut = FockCutoff::new(2);
        let p = ModelParams::new(1.0, 0.5, 1.0);
        let h = build_hamiltonian_with_budget(p, &lat, cut, &MemoryBudget::default()).unwrap();
        let s = 0.5f64.sqrt();
        let phi = [c(s), c(s), c(0.0)];
        let psi = product_state(&phi, &lat).unwrap();
        let exc = excitation_functionals(&psi, &h, &phi, 2.0).unwrap();
        assert!(exc.g.abs() < 1e-12);
        // f = ⟨H⟩/|Λ| − Tr(p h^φ) = 0 on a product state.
        assert!(exc.f.abs() < 1e-12);

        // φ⊥ = |2⟩ on one site: g = (⟨2|𝒩²|2⟩ + 1)/|Λ| = 5/4.
        let perp = [c(0.0), c(0.0), c(1.0)];
        let psi = mixed_product_state(&phi, &perp, &[2], &lat).unwrap();
        let exc = excitation_functionals(&psi, &h, &phi, 2.0).unwrap();
        assert!((exc.g - 1.25).abs() < 1e-12);
    }

    #[test]
    fn default_c_structure() {
        let p = ModelParams::new(1.0, 0.5, 1.0);
        let s = 0.5f64.sqrt();
        // (1 + 1 + 0) (1 + 4 + 1/4) + 1/4
        assert!((default_c(&p, &[c(s), c(s)], 1.0) - (2.0 * 5.25 + 0.25)).abs() < 1e-14);
        let attractive = ModelParams::new(1.0, 0.0, -1.0);
        assert!((c_prefactor(&attractive, &[c(1.0)]) - (1.0 + 1.0 + 2.25)).abs() < 1e-14);
    }

    #[test]
    fn zero_hopping_keeps_product_structure() {
        let st = setup(1, 3, ModelParams::new(0.0, 0.3, 1.0), coherent_like());
        let run = run_compare(&st).unwrap();
        for r in &run.series.records {
            assert!(r.tr_gamma_q.abs() < 1e-10, "{}", r.tr_gamma_q);
        }
    }

    #[test]
    fn gutzwiller_series_starts_at_zero_and_respects_sandwich() {
        let st = setup(1, 2, ModelParams::new(1.0, 0.5, 1.0), coherent_like());
        let run = run_compare(&st).unwrap();
        let first = &run.series.records[0];
        assert!(first.tr_gamma_q.abs() < 1e-14);
        assert!(first.g.abs() < 1e-12);
        assert!(run.series.sandwich_min_slack() >= -1e-10);
        let dc = run.series.derivative_check.unwrap();
        assert!(dc.pass, "{dc:?}");
        assert_eq!(run.series.equivalence.status, CheckStatus::Pass);
    }

    #[test]
    fn perturbed_sites_are_reproducible() {
        let a = perturbed_sites(16, 4, 9).unwrap();
        assert_eq!(a, perturbed_sites(16, 4, 9).unwrap());
        assert_eq!(a.len(), 4);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(perturbed_sites(4, 5, 0).is_err());
    }

    #[test]
    fn fock_tuple_mean_field_start() {
        let init = InitialState::FockTuple {
            occupations: vec![1, 2, 1, 0],
        };
        let phi = init.mean_field(FockCutoff::new(2)).unwrap();
        assert_eq!(phi, vec![c(0.0), c(1.0), c(0.0)]);
        let tie = InitialState::FockTuple {
            occupations: vec![2, 0],
        };
        assert_eq!(tie.mean_field(FockCutoff::new(2)).unwrap()[0], c(1.0));
    }

    #[test]
    fn sweep_records_oversize_points() {
        let st = setup(1, 2, ModelParams::new(1.0, 0.5, 1.0), coherent_like());
        let res = d_sweep(&st, &[1, 4], &[0]).unwrap();
        assert_eq!(res.rows.len(), 2);
        assert_eq!(res.rows[0].status, SweepStatus::Ok);
        assert_eq!(res.rows[1].status, SweepStatus::ResourceRejected);
        assert!(!res.any_failed());
    }

    #[test]
    fn moment_reports_pass_on_short_run() {
        let st = setup(1, 2, ModelParams::new(1.0, 0.5, 1.0), coherent_like());
        let run = run_compare(&st).unwrap();
        assert!(mf_moment_report(&run.meanfield, &[1.0, 2.0, 4.0]).unwrap().pass);
        assert!(exact_moment_report(&run.exact, &[1.0, 2.0]).unwrap().pass);
    }

    #[test]
    fn decay_constant_of_fock_vacuum() {
        assert_eq!(decay_constant(&[1.0, 0.0], 1.0), 1.0);
        assert!((decay_constant(&[0.0, 1.0], 2.0) - 0.5f64.exp()).abs() < 1e-15);
    }
}
