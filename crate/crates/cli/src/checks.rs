//! Invariant suite behind the `check` subcommand and the acceptance test.

use hubbard_core::diagnostics::{
    exact_moment_report, mf_moment_report, run_compare, sweep_points, CheckStatus, CompareRun, InitialState,
    RunSetup, SweepResult,
};
use hubbard_core::fock::{build_ladder, FockCutoff};
use hubbard_core::lattice::Lattice;
use hubbard_core::manybody::{
    build_hamiltonian, evolve_exact, expectation, product_state, propagate, DenseOracle, KrylovSettings,
    ManyBodyState, MemoryBudget, ModelParams, Observable, DENSE_ORACLE_MAX_DIM,
};
use hubbard_core::meanfield::{
    evolve_mf, mf_energy, projector_distance, truncation_refine, uniform_grid, IntegratorSettings,
};
use hubbard_core::random::{ginibre_density, random_gutzwiller, random_unit_vector, seeded};
use hubbard_core::reduced::{
    energy_per_site, q_moment, reduce_one_site, reduce_two_site, trace_norm_distance, Projectors,
};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

/// Outcome of one invariant. `margin` is the distance to the threshold,
/// positive when the check passes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub criterion: u8,
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn new(criterion: u8, name: &str, pass: bool, margin: f64, detail: String) -> Self {
        Self {
            criterion,
            name: name.into(),
            pass,
            margin,
            detail,
        }
    }

    fn error(criterion: u8, name: &str, err: impl std::fmt::Display) -> Self {
        Self::new(criterion, name, false, f64::NEG_INFINITY, format!("error: {err}"))
    }
}

type Outcome = Result<CheckOutcome, hubbard_core::Error>;

fn settle(criterion: u8, name: &str, r: Outcome) -> CheckOutcome {
    r.unwrap_or_else(|e| CheckOutcome::error(criterion, name, e))
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `(|0⟩ + |1⟩)/√2`.
pub fn coherent_like() -> Vec<Complex64> {
    let s = 0.5f64.sqrt();
    vec![c(s), c(s)]
}

/// `(−√2|0⟩ + |1⟩ + |2⟩)/2`, with `α = 0` but `⟨𝒩a⟩ ≠ 0`.
pub fn mott_witness() -> Vec<Complex64> {
    vec![c(-(2f64.sqrt()) / 2.0), c(0.5), c(0.5)]
}

pub fn standard_params() -> ModelParams {
    ModelParams::new(1.0, 0.5, 1.0)
}

/// The standard compare run: `L = 2, d = 1, M = 2`, `t_final = 1`.
pub fn standard_setup(seed: u64) -> RunSetup {
    RunSetup {
        params: standard_params(),
        lattice: Lattice::new(2, 1).expect("valid lattice"),
        cutoff: FockCutoff::new(2),
        t_final: 1.0,
        dt: 1e-3,
        n_samples: 101,
        krylov_tol: 1e-10,
        initial: InitialState::Gutzwiller {
            amplitudes: coherent_like(),
        },
        c_constant: 1.0,
        seed,
        budget: MemoryBudget::default(),
    }
}

fn max_drift(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    v.iter().map(|x| (x - v[0]).abs()).fold(0.0, f64::max)
}

pub fn ladder_algebra() -> CheckOutcome {
    let mut worst: f64 = 0.0;
    let mut adjoint_exact = true;
    for m in [1, 2, 4, 8, 16] {
        let cut = FockCutoff::new(m);
        let l = build_ladder(cut);
        let (a, ad) = (l.annihilator.matrix(), l.creation.matrix());
        let comm = a * ad - ad * a;
        for r in 0..m {
            for col in 0..m {
                let target = if r == col { c(1.0) } else { c(0.0) };
                worst = worst.max((comm[(r, col)] - target).norm());
            }
        }
        adjoint_exact &= *ad == a.adjoint();
    }
    CheckOutcome::new(
        1,
        "ladder_algebra",
        worst <= 1e-13 && adjoint_exact,
        1e-13 - worst,
        format!("max |[a,a*] - 1| on n < M: {worst:e}; creation == adjoint: {adjoint_exact}"),
    )
}

pub fn exact_conservation(seed: u64) -> CheckOutcome {
    let run = || -> Outcome {
        let lat = Lattice::new(2, 2)?;
        let cut = FockCutoff::new(3);
        let h = build_hamiltonian(standard_params(), &lat, cut)?;
        let phi = random_gutzwiller(cut, &mut seeded(seed));
        let psi0 = product_state(&phi, &lat)?;
        let states = evolve_exact(&h, &psi0, &uniform_grid(2.0, 21), 1e-10)?;
        let norms = states.iter().map(|s| s.norm());
        let numbers = states
            .iter()
            .map(|s| expectation(s, Observable::TotalNumber).map(|z| z.re))
            .collect::<Result<Vec<_>, _>>()?;
        let energies = states
            .iter()
            .map(|s| expectation(s, Observable::Hamiltonian(&h)).map(|z| z.re))
            .collect::<Result<Vec<_>, _>>()?;
        let worst = [max_drift(norms), max_drift(numbers), max_drift(energies)];
        let m = worst.iter().copied().fold(0.0, f64::max);
        Ok(CheckOutcome::new(
            2,
            "exact_conservation",
            m <= 1e-8,
            1e-8 - m,
            format!("drift norm {:e}, number {:e}, energy {:e}", worst[0], worst[1], worst[2]),
        ))
    };
    settle(2, "exact_conservation", run())
}

/// Every `(L, d, M)` with `M ≥ 1` whose dimension is at most the oracle limit.
pub fn oracle_configurations() -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for d in 1..=9usize {
        for l in 2..=9usize {
            let sites = match l.checked_pow(d as u32) {
                Some(s) if s <= 9 => s,
                _ => continue,
            };
            for m in 1.. {
                let dim = (m + 1usize).pow(sites as u32);
                if dim > DENSE_ORACLE_MAX_DIM {
                    break;
                }
                out.push((l, d, m));
            }
        }
    }
    out
}

pub fn oracle_equivalence(seed: u64) -> CheckOutcome {
    let run = || -> Outcome {
        let mut worst: f64 = 0.0;
        let mut worst_at = (0, 0, 0);
        let configs = oracle_configurations();
        let mut rng = seeded(seed);
        let settings = KrylovSettings::new(1e-10);
        for &(l, d, m) in &configs {
            let lat = Lattice::new(l, d)?;
            let cut = FockCutoff::new(m);
            let h = build_hamiltonian(standard_params(), &lat, cut)?;
            let psi = product_state(&random_gutzwiller(cut, &mut rng), &lat)?;
            let krylov = propagate(&h, &psi, 1.0, &settings)?;
            let dense = DenseOracle::new(&h)?.propagate(&psi, 1.0)?;
            let err = krylov.distance(&dense);
            if err > worst {
                worst = err;
                worst_at = (l, d, m);
            }
        }
        Ok(CheckOutcome::new(
            3,
            "oracle_equivalence",
            worst <= 1e-8,
            1e-8 - worst,
            format!(
                "{} configurations, max ||krylov - dense|| = {worst:e} at (L, d, M) = {worst_at:?}",
                configs.len()
            ),
        ))
    };
    settle(3, "oracle_equivalence", run())
}

pub fn mf_conservation() -> CheckOutcome {
    let run = || -> Outcome {
        let cut = FockCutoff::new(24);
        let p = standard_params();
        let fock1 = vec![c(0.0), c(1.0)];
        let mut worst: f64 = 0.0;
        let mut parts = Vec::new();
        for (name, phi) in [("fock1", fock1), ("coherent_like", coherent_like()), ("witness", mott_witness())] {
            let phi0 = hubbard_core::meanfield::pad_to_cutoff(&phi, cut)?;
            let traj = evolve_mf(&phi0, &p, cut, &uniform_grid(2.0, 201), IntegratorSettings { dt: 1e-3, richardson: false })?;
            let norm = max_drift(traj.states.iter().map(|s| s.norm()));
            let n = max_drift(traj.states.iter().map(|s| s.number()));
            let e = max_drift(traj.states.iter().map(|s| mf_energy(&s.phi, &p)));
            worst = worst.max(norm).max(n).max(e);
            parts.push(format!("{name}: norm {norm:e}, N {n:e}, E {e:e}"));
        }
        Ok(CheckOutcome::new(4, "mf_conservation", worst <= 1e-8, 1e-8 - worst, parts.join("; ")))
    };
    settle(4, "mf_conservation", run())
}

pub fn mott_onset() -> CheckOutcome {
    let run = || -> Outcome {
        let cut = FockCutoff::new(8);
        let phi0 = hubbard_core::meanfield::pad_to_cutoff(&mott_witness(), cut)?;
        let h = 1e-3;
        let traj = evolve_mf(&phi0, &ModelParams::new(0.0, 0.0, 1.0), cut, &[0.0, h], IntegratorSettings { dt: 1e-4, richardson: false })?;
        // |α| behaves like |t| near 0, so a one-sided difference is used.
        let slope = (traj.states[1].alpha.norm() - traj.states[0].alpha.norm()) / h;
        let expected = 2f64.sqrt() / 4.0;
        let rel = (slope - expected).abs() / expected;
        Ok(CheckOutcome::new(
            5,
            "mott_onset",
            rel <= 0.01 && traj.states[0].alpha.norm() == 0.0,
            0.01 - rel,
            format!("d|alpha|/dt(0) = {slope}, expected {expected}, relative error {rel:e}"),
        ))
    };
    settle(5, "mott_onset", run())
}

pub fn fock_stationarity() -> CheckOutcome {
    let run = || -> Outcome {
        let cut = FockCutoff::new(8);
        let phi0 = hubbard_core::meanfield::pad_to_cutoff(&[c(0.0), c(1.0)], cut)?;
        let mut worst: f64 = 0.0;
        for p in [
            ModelParams::new(1.0, 0.5, 1.0),
            ModelParams::new(0.3, -0.2, 2.0),
            ModelParams::new(2.0, 1.0, -0.5),
        ] {
            let traj = evolve_mf(&phi0, &p, cut, &uniform_grid(2.0, 41), IntegratorSettings { dt: 1e-3, richardson: false })?;
            for s in &traj.states {
                worst = worst.max(projector_distance(&phi0, &s.phi));
            }
        }
        Ok(CheckOutcome::new(
            6,
            "fock_stationarity",
            worst <= 1e-8,
            1e-8 - worst,
            format!("max ||p(t) - p(0)||_1 = {worst:e}"),
        ))
    };
    settle(6, "fock_stationarity", run())
}

pub fn trace_norm_sandwich(seed: u64) -> CheckOutcome {
    let run = || -> Outcome {
        let mut rng = seeded(seed);
        let mut worst = f64::INFINITY;
        let mut count = 0;
        for m in [1, 2, 4, 8] {
            let cut = FockCutoff::new(m);
            for _ in 0..100 {
                let gamma = ginibre_density(cut, &mut rng)?;
                let proj = Projectors::new(&random_unit_vector(cut.dim(), &mut rng), cut)?;
                let q = q_moment(&gamma, &proj, 0);
                let tn = trace_norm_distance(&gamma, &proj)?;
                worst = worst.min(tn - 2.0 * q).min(2.0 * 2f64.sqrt() * q.max(0.0).sqrt() - tn);
                count += 1;
            }
        }
        Ok(CheckOutcome::new(
            7,
            "trace_norm_sandwich",
            worst >= -1e-10,
            worst + 1e-10,
            format!("{count} random pairs, smallest slack {worst:e}"),
        ))
    };
    settle(7, "trace_norm_sandwich", run())
}

pub fn iterated_cauchy_schwarz(seed: u64) -> CheckOutcome {
    let run = || -> Outcome {
        let mut rng = seeded(seed.wrapping_add(1));
        let mut worst = f64::INFINITY;
        for i in 0..100 {
            let m = [1, 2, 4, 8][i % 4];
            let cut = FockCutoff::new(m);
            let k: u32 = rng.random_range(1..=2);
            let gamma = ginibre_density(cut, &mut rng)?;
            let phi = random_unit_vector(cut.dim(), &mut rng);
            let proj = Projectors::new(&phi, cut)?;
            let lhs = q_moment(&gamma, &proj, k);
            let pn: f64 = phi
                .iter()
                .enumerate()
                .map(|(n, z)| (n as f64).powi(k as i32) * z.norm_sqr())
                .sum();
            let rhs = 2.0 * gamma.number_moment(k as f64) + 2.0 * pn;
            worst = worst.min(rhs - lhs);
        }
        Ok(CheckOutcome::new(
            8,
            "iterated_cauchy_schwarz",
            worst >= -1e-10,
            worst + 1e-10,
            format!("100 random triples, smallest slack {worst:e}"),
        ))
    };
    settle(8, "iterated_cauchy_schwarz", run())
}

pub fn moment_bounds(run: &CompareRun) -> CheckOutcome {
    let go = || -> Outcome {
        let mf = mf_moment_report(&run.meanfield, &[1.0, 2.0, 4.0])?;
        let ex = exact_moment_report(&run.exact, &[1.0, 2.0])?;
        let margin = mf
            .entries
            .iter()
            .chain(&ex.entries)
            .map(|e| e.margin)
            .fold(f64::INFINITY, f64::min);
        Ok(CheckOutcome::new(
            9,
            "moment_bounds",
            mf.pass && ex.pass,
            margin,
            format!("mean-field k in {{1,2,4}}: {}; exact k in {{1,2}}: {}", mf.pass, ex.pass),
        ))
    };
    settle(9, "moment_bounds", go())
}

pub fn energy_identity(seed: u64) -> CheckOutcome {
    let run = || -> Outcome {
        let lat = Lattice::new(2, 2)?;
        let cut = FockCutoff::new(2);
        let p = standard_params();
        let h = build_hamiltonian(p, &lat, cut)?;
        let mut rng = seeded(seed.wrapping_add(2));
        let mut worst: f64 = 0.0;
        for i in 0..10 {
            let psi = if i % 2 == 0 {
                ManyBodyState::new(random_unit_vector(h.dim(), &mut rng), cut, lat.num_sites())?
            } else {
                let psi0 = product_state(&random_gutzwiller(cut, &mut rng), &lat)?;
                propagate(&h, &psi0, 0.7, &KrylovSettings::new(1e-12))?
            };
            let direct = expectation(&psi, Observable::Hamiltonian(&h))?.re / lat.num_sites() as f64;
            let reduced = energy_per_site(&reduce_one_site(&psi, &lat)?, &reduce_two_site(&psi, &lat)?, &p)?;
            worst = worst.max((direct - reduced).abs());
        }
        Ok(CheckOutcome::new(
            10,
            "energy_identity",
            worst <= 1e-9,
            1e-9 - worst,
            format!("10 states, max |E_reduced - <H>/|Lambda|| = {worst:e}"),
        ))
    };
    settle(10, "energy_identity", run())
}

pub fn excitation_functionals(run: &CompareRun) -> CheckOutcome {
    let s = &run.series;
    let g0 = s.records[0].g.abs();
    let eq = &s.equivalence;
    let pass = g0 <= 1e-12 && eq.status == CheckStatus::Pass;
    let minimal = match eq.minimal_c_constant {
        Some(v) => format!("{v}"),
        None => "none".into(),
    };
    CheckOutcome::new(
        11,
        "excitation_functionals",
        pass,
        eq.min_slack.min(1e-12 - g0),
        format!(
            "g(0) = {g0:e}; min_t (f - (U/4)g + 1/d) = {} with C = {}; minimal passing C = {minimal}",
            eq.min_slack, eq.c_constant
        ),
    )
}

/// Setup for the dimension trend: standard parameters, `t_final = 0.5`.
pub fn trend_setup(seed: u64) -> RunSetup {
    RunSetup {
        t_final: 0.5,
        n_samples: 51,
        ..standard_setup(seed)
    }
}

pub fn trend_sweep(seed: u64) -> Result<SweepResult, hubbard_core::Error> {
    sweep_points(&trend_setup(seed), &[(1, 2), (2, 2), (3, 2), (4, 1), (1, 1), (2, 1), (3, 1)], &[seed])
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Smallest relative step `1 − v[i+1]/v[i]`.
fn min_relative_drop(v: &[f64]) -> f64 {
    v.windows(2).map(|w| 1.0 - w[1] / w[0]).fold(f64::INFINITY, f64::min)
}

pub fn dimension_trend(sweep: &SweepResult, seed: u64) -> CheckOutcome {
    let main: Vec<_> = sweep
        .series(2, seed)
        .into_iter()
        .chain(sweep.series(1, seed).into_iter().filter(|r| r.d == 4))
        .collect();
    let low = sweep.series(1, seed);
    let get = |rows: &[&hubbard_core::diagnostics::SweepRow], f: fn(&hubbard_core::diagnostics::SweepRow) -> Option<f64>| {
        rows.iter().filter_map(|r| f(r)).collect::<Vec<f64>>()
    };
    let q_main = get(&main, |r| r.sup_tr_gamma_q);
    let tn_main = get(&main, |r| r.sup_trace_norm);
    let q_low = get(&low, |r| r.sup_tr_gamma_q);
    let tn_low = get(&low, |r| r.sup_trace_norm);
    let complete = main.len() == 4 && low.len() == 4;
    let pass = complete
        && strictly_decreasing(&q_main)
        && strictly_decreasing(&tn_main)
        && strictly_decreasing(&q_low)
        && strictly_decreasing(&tn_low);
    let margin = [&q_main, &tn_main, &q_low, &tn_low]
        .iter()
        .map(|v| min_relative_drop(v))
        .fold(f64::INFINITY, f64::min);
    let table: Vec<String> = main
        .iter()
        .chain(low.iter().filter(|r| r.d < 4))
        .map(|r| {
            format!(
                "d={} M={} sup_TrGq={:.6e} sup_TN={:.6e} d*sup_TrGq={:.4}",
                r.d,
                r.max_occupation,
                r.sup_tr_gamma_q.unwrap_or(f64::NAN),
                r.sup_trace_norm.unwrap_or(f64::NAN),
                r.tr_gamma_q_times_d.unwrap_or(f64::NAN)
            )
        })
        .collect();
    CheckOutcome::new(12, "dimension_trend", pass, margin, table.join("; "))
}

pub fn truncation_refinement() -> CheckOutcome {
    let run = || -> Outcome {
        let rep = truncation_refine(&coherent_like(), &standard_params(), 2.0, &[8, 12, 16, 24], 1e-3, 41)?;
        let deltas: Vec<f64> = rep.deltas.iter().map(|d| d.sup_state_distance).collect();
        let last = rep.final_delta().unwrap_or(f64::INFINITY);
        Ok(CheckOutcome::new(
            13,
            "truncation_refinement",
            rep.strictly_decreasing() && last <= 1e-6,
            1e-6 - last,
            format!("sup deltas for M = 8->12->16->24: {deltas:?}"),
        ))
    };
    settle(13, "truncation_refinement", run())
}

/// Two in-process compare runs serialize to identical bytes.
pub fn in_process_reproducibility(seed: u64) -> CheckOutcome {
    let run = || -> Outcome {
        let a = run_compare(&trend_setup(seed))?;
        let b = run_compare(&trend_setup(seed))?;
        let (ja, jb) = (
            serde_json::to_string(&a.series).unwrap_or_default(),
            serde_json::to_string(&b.series).unwrap_or_default(),
        );
        let same = !ja.is_empty() && ja == jb;
        Ok(CheckOutcome::new(
            14,
            "reproducibility",
            same,
            if same { 0.0 } else { -1.0 },
            format!("{} bytes of serialized series compared", ja.len()),
        ))
    };
    settle(14, "reproducibility", run())
}

/// Swap symmetry, reduction consistency and positivity of `γ⁽²⁾` on an
/// evolved state, plus global-phase invariance of the comparison series.
pub fn density_invariants(seed: u64) -> Vec<CheckOutcome> {
    let run = || -> Result<Vec<CheckOutcome>, hubbard_core::Error> {
        let lat = Lattice::new(2, 2)?;
        let cut = FockCutoff::new(2);
        let h = build_hamiltonian(standard_params(), &lat, cut)?;
        let psi0 = product_state(&random_gutzwiller(cut, &mut seeded(seed.wrapping_add(3))), &lat)?;
        let psi = propagate(&h, &psi0, 0.9, &KrylovSettings::new(1e-12))?;
        let g1 = reduce_one_site(&psi, &lat)?;
        let g2 = reduce_two_site(&psi, &lat)?;
        let swap = (g2.swapped() - g2.matrix()).norm();
        let red = (g2.trace_first() - g1.matrix()).norm().max((g2.trace_second() - g1.matrix()).norm());
        let lowest = g1
            .eigenvalues()?
            .into_iter()
            .chain(g2.eigenvalues()?)
            .fold(f64::INFINITY, f64::min);
        let worst = swap.max(red);

        let phase = Complex64::from_polar(1.0, 0.83);
        let mut setup = trend_setup(seed);
        let base = run_compare(&setup)?;
        setup.initial = InitialState::Gutzwiller {
            amplitudes: coherent_like().into_iter().map(|z| z * phase).collect(),
        };
        let rotated = run_compare(&setup)?;
        let gauge = base
            .series
            .records
            .iter()
            .zip(&rotated.series.records)
            .map(|(a, b)| {
                (a.tr_gamma_q - b.tr_gamma_q)
                    .abs()
                    .max((a.trace_norm - b.trace_norm).abs())
                    .max((a.f - b.f).abs())
                    .max((a.g - b.g).abs())
                    .max((a.energy_exact_per_site - b.energy_exact_per_site).abs())
                    .max(((a.alpha_micro() - a.alpha_mf()).norm() - (b.alpha_micro() - b.alpha_mf()).norm()).abs())
            })
            .fold(0.0, f64::max);
        Ok(vec![
            CheckOutcome::new(
                0,
                "gamma2_consistency",
                worst <= 1e-10,
                1e-10 - worst,
                format!("swap defect {swap:e}, partial-trace defect {red:e}"),
            ),
            CheckOutcome::new(
                0,
                "density_positivity",
                lowest >= -1e-10,
                lowest + 1e-10,
                format!("smallest eigenvalue of gamma1, gamma2: {lowest:e}"),
            ),
            CheckOutcome::new(
                0,
                "gauge_invariance",
                gauge <= 1e-9,
                1e-9 - gauge,
                format!("max change of reported scalars under a global phase: {gauge:e}"),
            ),
        ])
    };
    run().unwrap_or_else(|e| vec![CheckOutcome::error(0, "density_invariants", e)])
}

/// Full suite in criterion order; unnumbered invariants come last.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    let mut out = vec![
        ladder_algebra(),
        exact_conservation(seed),
        oracle_equivalence(seed),
        mf_conservation(),
        mott_onset(),
        fock_stationarity(),
        trace_norm_sandwich(seed),
        iterated_cauchy_schwarz(seed),
    ];
    match run_compare(&standard_setup(seed)) {
        Ok(run) => {
            out.push(moment_bounds(&run));
            out.push(energy_identity(seed));
            out.push(excitation_functionals(&run));
        }
        Err(e) => {
            out.push(CheckOutcome::error(9, "moment_bounds", &e));
            out.push(energy_identity(seed));
            out.push(CheckOutcome::error(11, "excitation_functionals", &e));
        }
    }
    out.push(match trend_sweep(seed) {
        Ok(s) => dimension_trend(&s, seed),
        Err(e) => CheckOutcome::error(12, "dimension_trend", e),
    });
    out.push(truncation_refinement());
    out.push(in_process_reproducibility(seed));
    out.extend(density_invariants(seed));
    out
}
