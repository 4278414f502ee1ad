//! Batch front end: configuration, run orchestration and artifact output.

pub mod checks;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use hubbard_core::diagnostics::{
    d_sweep, exact_moment_report, mf_moment_report, run_compare, run_exact, run_meanfield, ComparisonRecord,
    ComparisonSeries, MomentReport, RunSetup, SweepResult, SweepStatus,
};
use hubbard_core::manybody::{expectation, Observable};
use hubbard_core::meanfield::mf_energy;
use serde::Serialize;
use thiserror::Error;

use crate::checks::CheckOutcome;
use crate::config::RunConfig;
use crate::output::{ensure_dir, write_csv, write_json};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] hubbard_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
    #[error("{0} sweep point(s) failed")]
    SweepFailed(usize),
}

impl CliError {
    /// 2 configuration, 3 resource rejection, 4 numerical failure, 1 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_resource() => 3,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
            CliError::ChecksFailed(_) | CliError::SweepFailed(_) => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Exact,
    MeanField,
    Compare,
    Sweep,
    Check,
}

/// Resolved command-line request.
#[derive(Clone, Debug)]
pub struct Request {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct CompareRow {
    t: f64,
    tr_gamma_q: f64,
    trace_norm: f64,
    alpha_micro_re: f64,
    alpha_micro_im: f64,
    alpha_mf_re: f64,
    alpha_mf_im: f64,
    energy_exact_per_site: f64,
    energy_mf: f64,
    f: f64,
    g: f64,
    exact_norm: f64,
    exact_total_n: f64,
    mf_norm: f64,
    mf_n: f64,
}

impl From<&ComparisonRecord> for CompareRow {
    fn from(r: &ComparisonRecord) -> Self {
        Self {
            t: r.t,
            tr_gamma_q: r.tr_gamma_q,
            trace_norm: r.trace_norm,
            alpha_micro_re: r.alpha_micro_re,
            alpha_micro_im: r.alpha_micro_im,
            alpha_mf_re: r.alpha_mf_re,
            alpha_mf_im: r.alpha_mf_im,
            energy_exact_per_site: r.energy_exact_per_site,
            energy_mf: r.energy_mf,
            f: r.f,
            g: r.g,
            exact_norm: r.exact_norm,
            exact_total_n: r.exact_total_n,
            mf_norm: r.mf_norm,
            mf_n: r.mf_n,
        }
    }
}

#[derive(Serialize)]
struct RemarkRow {
    t: f64,
    hs_average: f64,
    kinetic_exact: f64,
    kinetic_mf: f64,
    q_number_moment: f64,
}

#[derive(Serialize)]
struct ExactRow {
    t: f64,
    norm: f64,
    total_n: f64,
    energy_per_site: f64,
}

#[derive(Serialize)]
struct MeanFieldRow {
    t: f64,
    alpha_re: f64,
    alpha_im: f64,
    norm: f64,
    n: f64,
    energy: f64,
}

#[derive(Serialize)]
struct RunMeta {
    command: &'static str,
    seed: u64,
    #[serde(rename = "J")]
    j: f64,
    mu: f64,
    #[serde(rename = "U")]
    u: f64,
    #[serde(rename = "L")]
    l: usize,
    d: usize,
    #[serde(rename = "M")]
    m: usize,
    t_final: f64,
    dt: f64,
    n_samples: usize,
    krylov_tol: f64,
}

impl RunMeta {
    fn new(command: &'static str, s: &RunSetup) -> Self {
        Self {
            command,
            seed: s.seed,
            j: s.params.hopping,
            mu: s.params.chemical_potential,
            u: s.params.interaction,
            l: s.lattice.side(),
            d: s.lattice.dimension(),
            m: s.cutoff.max_occupation(),
            t_final: s.t_final,
            dt: s.dt,
            n_samples: s.n_samples,
            krylov_tol: s.krylov_tol,
        }
    }
}

fn drift(values: &[f64]) -> f64 {
    values.iter().map(|v| (v - values[0]).abs()).fold(0.0, f64::max)
}

#[derive(Serialize)]
struct ExactSummary {
    run: RunMeta,
    dimension: usize,
    norm_drift: f64,
    number_drift: f64,
    energy_drift: f64,
    moments: MomentReport,
}

#[derive(Serialize)]
struct MeanFieldSummary {
    run: RunMeta,
    max_norm_drift: f64,
    number_drift: f64,
    energy_drift: f64,
    richardson_delta: Option<f64>,
    moments: MomentReport,
}

#[derive(Serialize)]
struct CompareSummary<'a> {
    run: RunMeta,
    c: f64,
    sup_tr_gamma_q: f64,
    sup_trace_norm: f64,
    final_alpha_error: f64,
    sandwich_min_slack: f64,
    derivative_check: &'a Option<hubbard_core::diagnostics::DerivativeCheck>,
    equivalence: &'a hubbard_core::diagnostics::EquivalenceReport,
    mf_richardson_delta: Option<f64>,
    mf_max_norm_drift: f64,
    exact_moments: MomentReport,
    mf_moments: MomentReport,
}

#[derive(Serialize)]
struct SweepSummary {
    run: RunMeta,
    d_list: Vec<usize>,
    seeds: Vec<u64>,
    sweep: SweepResult,
}

#[derive(Serialize)]
struct CheckSummary {
    seed: u64,
    all_pass: bool,
    checks: Vec<CheckOutcome>,
}

fn output_dir(req: &Request, cfg: Option<&RunConfig>) -> PathBuf {
    req.out
        .clone()
        .or_else(|| cfg.map(|c| c.output.directory.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load(req: &Request) -> Result<(RunConfig, RunSetup), CliError> {
    let path = req
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required for this subcommand".into()))?;
    let cfg = RunConfig::load(path)?;
    let setup = cfg.setup(req.seed)?;
    Ok((cfg, setup))
}

fn moment_orders(cfg: &RunConfig) -> Vec<f64> {
    cfg.diagnostics.k_moments.clone()
}

fn exact(req: &Request) -> Result<(), CliError> {
    let (cfg, setup) = load(req)?;
    let dir = output_dir(req, Some(&cfg));
    let traj = run_exact(&setup)?;
    let h = &traj.hamiltonian;
    let sites = setup.lattice.num_sites() as f64;
    let mut rows = Vec::with_capacity(traj.states.len());
    for (psi, &t) in traj.states.iter().zip(&traj.times) {
        rows.push(ExactRow {
            t,
            norm: psi.norm(),
            total_n: expectation(psi, Observable::TotalNumber)?.re,
            energy_per_site: expectation(psi, Observable::Hamiltonian(h))?.re / sites,
        });
    }
    let col = |f: fn(&ExactRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let summary = ExactSummary {
        run: RunMeta::new("exact", &setup),
        dimension: h.dim(),
        norm_drift: drift(&col(|r| r.norm)),
        number_drift: drift(&col(|r| r.total_n)),
        energy_drift: drift(&col(|r| r.energy_per_site)),
        moments: exact_moment_report(&traj, &moment_orders(&cfg))?,
    };
    ensure_dir(&dir)?;
    write_csv(&dir.join("exact.csv"), &rows)?;
    write_json(&dir.join("exact.json"), &summary)
}

fn meanfield(req: &Request) -> Result<(), CliError> {
    let (cfg, setup) = load(req)?;
    let dir = output_dir(req, Some(&cfg));
    let traj = run_meanfield(&setup)?;
    let rows: Vec<MeanFieldRow> = traj
        .states
        .iter()
        .map(|s| MeanFieldRow {
            t: s.t,
            alpha_re: s.alpha.re,
            alpha_im: s.alpha.im,
            norm: s.norm(),
            n: s.number(),
            energy: mf_energy(&s.phi, &setup.params),
        })
        .collect();
    let summary = MeanFieldSummary {
        run: RunMeta::new("meanfield", &setup),
        max_norm_drift: traj.max_norm_drift,
        number_drift: drift(&rows.iter().map(|r| r.n).collect::<Vec<_>>()),
        energy_drift: drift(&rows.iter().map(|r| r.energy).collect::<Vec<_>>()),
        richardson_delta: traj.richardson_delta,
        moments: mf_moment_report(&traj, &moment_orders(&cfg))?,
    };
    ensure_dir(&dir)?;
    write_csv(&dir.join("meanfield.csv"), &rows)?;
    write_json(&dir.join("meanfield.json"), &summary)
}

fn write_series(dir: &Path, series: &ComparisonSeries) -> Result<(), CliError> {
    let rows: Vec<CompareRow> = series.records.iter().map(CompareRow::from).collect();
    write_csv(&dir.join("compare.csv"), &rows)?;
    let remark: Vec<RemarkRow> = series
        .records
        .iter()
        .map(|r| RemarkRow {
            t: r.t,
            hs_average: r.hs_average,
            kinetic_exact: r.kinetic_exact,
            kinetic_mf: r.kinetic_mf,
            q_number_moment: r.q_number_moment,
        })
        .collect();
    write_csv(&dir.join("remark.csv"), &remark)
}

fn compare(req: &Request) -> Result<(), CliError> {
    let (cfg, setup) = load(req)?;
    let dir = output_dir(req, Some(&cfg));
    let run = run_compare(&setup)?;
    let s = &run.series;
    let ks = moment_orders(&cfg);
    let summary = CompareSummary {
        run: RunMeta::new("compare", &setup),
        c: setup.c()?,
        sup_tr_gamma_q: s.sup_tr_gamma_q(),
        sup_trace_norm: s.sup_trace_norm(),
        final_alpha_error: s.final_alpha_error(),
        sandwich_min_slack: s.sandwich_min_slack(),
        derivative_check: &s.derivative_check,
        equivalence: &s.equivalence,
        mf_richardson_delta: run.meanfield.richardson_delta,
        mf_max_norm_drift: run.meanfield.max_norm_drift,
        exact_moments: exact_moment_report(&run.exact, &ks)?,
        mf_moments: mf_moment_report(&run.meanfield, &ks)?,
    };
    ensure_dir(&dir)?;
    write_series(&dir, s)?;
    write_json(&dir.join("compare.json"), &summary)
}

#[derive(Serialize)]
struct SweepCsvRow {
    d: usize,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "M")]
    m: usize,
    seed: u64,
    status: SweepStatus,
    sup_tr_gamma_q: Option<f64>,
    sup_trace_norm: Option<f64>,
    final_alpha_error: Option<f64>,
    inv_d: f64,
    tr_gamma_q_times_d: Option<f64>,
}

fn sweep(req: &Request) -> Result<(), CliError> {
    let (cfg, setup) = load(req)?;
    let dir = output_dir(req, Some(&cfg));
    let d_list = cfg.d_list();
    let seeds = cfg.sweep_seeds(setup.seed);
    let result = d_sweep(&setup, &d_list, &seeds)?;
    for r in &result.rows {
        if r.status != SweepStatus::Ok {
            log::warn!("d = {}, seed = {}: {}", r.d, r.seed, r.message.as_deref().unwrap_or(""));
        }
    }
    let failed = result.rows.iter().filter(|r| r.status == SweepStatus::Failed).count();
    let rows: Vec<SweepCsvRow> = result
        .rows
        .iter()
        .map(|r| SweepCsvRow {
            d: r.d,
            l: r.side,
            m: r.max_occupation,
            seed: r.seed,
            status: r.status,
            sup_tr_gamma_q: r.sup_tr_gamma_q,
            sup_trace_norm: r.sup_trace_norm,
            final_alpha_error: r.final_alpha_error,
            inv_d: r.inv_d,
            tr_gamma_q_times_d: r.tr_gamma_q_times_d,
        })
        .collect();
    ensure_dir(&dir)?;
    write_csv(&dir.join("sweep.csv"), &rows)?;
    write_json(
        &dir.join("sweep.json"),
        &SweepSummary {
            run: RunMeta::new("sweep", &setup),
            d_list,
            seeds,
            sweep: result,
        },
    )?;
    if failed > 0 {
        return Err(CliError::SweepFailed(failed));
    }
    Ok(())
}

fn check(req: &Request) -> Result<(), CliError> {
    let cfg = match &req.config {
        Some(p) => Some(RunConfig::load(p)?),
        None => None,
    };
    let seed = req.seed.or(cfg.as_ref().and_then(|c| c.seed)).unwrap_or(0);
    let dir = output_dir(req, cfg.as_ref());
    let checks = checks::run_all(seed);
    for c in &checks {
        log::info!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    ensure_dir(&dir)?;
    write_json(
        &dir.join("check.json"),
        &CheckSummary {
            seed,
            all_pass: failed == 0,
            checks,
        },
    )?;
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}

pub fn run(req: &Request) -> Result<(), CliError> {
    log::info!("{:?} with {} worker threads", req.command, rayon::current_num_threads());
    match req.command {
        Command::Exact => exact(req),
        Command::MeanField => meanfield(req),
        Command::Compare => compare(req),
        Command::Sweep => sweep(req),
        Command::Check => check(req),
    }
}
