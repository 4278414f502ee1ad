//! Acceptance criteria 1-14, one PASS/FAIL line each.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use hubbard_core::diagnostics::run_compare;
use hubbard_mf_lab::checks::{self, CheckOutcome};

const SEED: u64 = 0;

const COMPARE_CONFIG: &str = r#"
seed = 11

[model]
J = 1.0
mu = 0.5
U = 1.0

[lattice]
L = 2
d = 1

[cutoff]
M = 2

[time]
t_final = 1.0
dt = 1e-3
n_samples = 101
krylov_tol = 1e-10

[initial]
kind = "perturbed_gutzwiller"
amplitudes = [0.7071067811865476, 0.7071067811865476]
perp_amplitudes = [0.7071067811865476, -0.7071067811865476]
num_perturbed_sites = 1

[sweep]
d_list = [1, 2]
seeds = [1, 2]
"#;

fn run_bin(sub: &str, config: &Path, out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_hubbard-mf-lab"))
        .args([sub, "--config"])
        .arg(config)
        .args(["--threads", "2", "--out"])
        .arg(out)
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map(|it| {
            it.filter_map(|e| e.ok())
                .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap_or_default()))
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn reproducibility() -> CheckOutcome {
    let tmp = tempfile::tempdir().expect("temp dir");
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, COMPARE_CONFIG).expect("write config");
    let mut same = true;
    let mut files = 0;
    for sub in ["compare", "sweep", "meanfield", "exact"] {
        let (a, b) = (tmp.path().join(format!("{sub}-a")), tmp.path().join(format!("{sub}-b")));
        let ok = run_bin(sub, &cfg, &a) && run_bin(sub, &cfg, &b);
        let (fa, fb) = (dir_bytes(&a), dir_bytes(&b));
        files += fa.len();
        same &= ok && !fa.is_empty() && fa == fb;
    }
    CheckOutcome {
        criterion: 14,
        name: "reproducibility".into(),
        pass: same,
        margin: if same { 0.0 } else { -1.0 },
        detail: format!("two binary runs of compare/sweep/meanfield/exact, {files} output files compared byte for byte"),
    }
}

fn report(outcome: &CheckOutcome, started: Instant) -> bool {
    println!(
        "criterion {:>2} {:<24} {}  margin {:e}  ({:.2} s)  {}",
        outcome.criterion,
        outcome.name,
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.margin,
        started.elapsed().as_secs_f64(),
        outcome.detail
    );
    outcome.pass
}

fn main() {
    let mut all = true;
    let mut go = |f: &dyn Fn() -> CheckOutcome| {
        let t = Instant::now();
        let o = f();
        all &= report(&o, t);
    };
    go(&checks::ladder_algebra);
    go(&|| checks::exact_conservation(SEED));
    go(&|| checks::oracle_equivalence(SEED));
    go(&checks::mf_conservation);
    go(&checks::mott_onset);
    go(&checks::fock_stationarity);
    go(&|| checks::trace_norm_sandwich(SEED));
    go(&|| checks::iterated_cauchy_schwarz(SEED));

    let t = Instant::now();
    let run = run_compare(&checks::standard_setup(SEED)).expect("standard compare run");
    let setup_time = t.elapsed();
    go(&|| {
        let mut o = checks::moment_bounds(&run);
        o.detail = format!("{} (compare run {:.2} s)", o.detail, setup_time.as_secs_f64());
        o
    });
    go(&|| checks::energy_identity(SEED));
    go(&|| checks::excitation_functionals(&run));
    go(&|| match checks::trend_sweep(SEED) {
        Ok(s) => checks::dimension_trend(&s, SEED),
        Err(e) => CheckOutcome {
            criterion: 12,
            name: "dimension_trend".into(),
            pass: false,
            margin: f64::NEG_INFINITY,
            detail: format!("error: {e}"),
        },
    });
    go(&checks::truncation_refinement);
    go(&reproducibility);

    if !all {
        println!("acceptance: FAILED");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
