use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
seed = 4

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
n_samples = 21
krylov_tol = 1e-10

[initial]
kind = "gutzwiller"
amplitudes = [0.7071067811865476, 0.7071067811865476]

[diagnostics]
c_constant_C = 1.0
k_moments = [1, 2, 4]

[sweep]
d_list = [1, 2, 3, 4]
seeds = [0]
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hubbard-mf-lab"));
    c.env_remove("HUBBARD_MF_LAB_MEMORY_CAP");
    c
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(sub: &str, cfg: &Path, out: &Path) -> i32 {
    bin()
        .args([sub, "--config"])
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap()
        .code()
        .unwrap()
}

#[test]
fn compare_writes_the_documented_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = tmp.path().join("out");
    assert_eq!(run("compare", &cfg, &out), 0);
    let csv = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "t,tr_gamma_q,trace_norm,alpha_micro_re,alpha_micro_im,alpha_mf_re,alpha_mf_im,\
energy_exact_per_site,energy_mf,f,g,exact_norm,exact_total_n,mf_norm,mf_n"
    );
    assert_eq!(csv.lines().count(), 22);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("compare.json")).unwrap()).unwrap();
    assert_eq!(summary["equivalence"]["status"], "pass");
    assert_eq!(summary["derivative_check"]["pass"], true);
}

#[test]
fn sweep_records_resource_rejection_and_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = tmp.path().join("out");
    assert_eq!(run("sweep", &cfg, &out), 0);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    let rows = json["sweep"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3]["d"], 4);
    assert_eq!(rows[3]["status"], "resource_rejected");
    assert!(rows[3]["required_bytes"].as_u64().unwrap() > 2u64 << 30);
    assert!(rows[..3].iter().all(|r| r["status"] == "ok"));
}

#[test]
fn oversize_exact_run_exits_with_resource_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &CONFIG.replace("d = 1", "d = 4"));
    assert_eq!(run("exact", &cfg, &tmp.path().join("out")), 3);
}

#[test]
fn memory_cap_override_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let status = bin()
        .env("HUBBARD_MF_LAB_MEMORY_CAP", "1000")
        .args(["exact", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &CONFIG.replace("n_samples = 21", "n_samples = 1"));
    let out = bin()
        .args(["compare", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("time.n_samples"));
    let missing = bin().args(["exact", "--config", "/nonexistent.toml"]).status().unwrap();
    assert_eq!(missing.code(), Some(2));
}

#[test]
fn meanfield_and_exact_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = tmp.path().join("out");
    assert_eq!(run("meanfield", &cfg, &out), 0);
    assert_eq!(run("exact", &cfg, &out), 0);
    let mf: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("meanfield.json")).unwrap()).unwrap();
    assert!(mf["max_norm_drift"].as_f64().unwrap() < 1e-10);
    assert_eq!(mf["moments"]["pass"], true);
    let ex: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("exact.json")).unwrap()).unwrap();
    assert!(ex["energy_drift"].as_f64().unwrap() < 1e-8);
    assert_eq!(ex["dimension"], 9);
}

#[test]
fn fock_tuple_initial_state_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = CONFIG.replace(
        "kind = \"gutzwiller\"\namplitudes = [0.7071067811865476, 0.7071067811865476]",
        "kind = \"fock_tuple\"\noccupations = [1, 1]",
    );
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    assert_eq!(run("compare", &cfg, &out), 0);
}
