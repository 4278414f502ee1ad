//! TOML run configuration.

use std::path::{Path, PathBuf};

use hubbard_core::diagnostics::{InitialState, RunSetup};
use hubbard_core::fock::FockCutoff;
use hubbard_core::lattice::Lattice;
use hubbard_core::manybody::{MemoryBudget, ModelParams, DEFAULT_MEMORY_CAP_BYTES};
use hubbard_core::meanfield::MAX_DT;
use num_complex::Complex64;
use serde::Deserialize;

use crate::CliError;

/// Environment variable that overrides `memory_cap_bytes`.
pub const MEMORY_CAP_ENV: &str = "HUBBARD_MF_LAB_MEMORY_CAP";

const NORMALIZED_TOL: f64 = 1e-9;
const RENORMALIZE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub memory_cap_bytes: Option<u64>,
    pub model: ModelSection,
    pub lattice: LatticeSection,
    pub cutoff: CutoffSection,
    pub time: TimeSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "J")]
    pub j: f64,
    pub mu: f64,
    #[serde(rename = "U")]
    pub u: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    #[serde(rename = "L")]
    pub l: usize,
    pub d: usize,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CutoffSection {
    #[serde(rename = "M")]
    pub m: usize,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_final: f64,
    pub dt: f64,
    pub n_samples: usize,
    #[serde(default = "default_krylov_tol")]
    pub krylov_tol: f64,
}

fn default_krylov_tol() -> f64 {
    1e-10
}

/// A real amplitude or a `[re, im]` pair.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Amplitude {
    Real(f64),
    Complex([f64; 2]),
}

impl Amplitude {
    fn value(self) -> Complex64 {
        match self {
            Amplitude::Real(re) => Complex64::new(re, 0.0),
            Amplitude::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Gutzwiller,
    PerturbedGutzwiller,
    FockTuple,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub amplitudes: Option<Vec<Amplitude>>,
    pub perp_amplitudes: Option<Vec<Amplitude>>,
    pub num_perturbed_sites: Option<usize>,
    pub occupations: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(rename = "c_constant_C", default = "default_c_constant")]
    pub c_constant: f64,
    #[serde(default = "default_k_moments")]
    pub k_moments: Vec<f64>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            c_constant: default_c_constant(),
            k_moments: default_k_moments(),
        }
    }
}

fn default_c_constant() -> f64 {
    1.0
}

fn default_k_moments() -> Vec<f64> {
    vec![1.0, 2.0, 4.0]
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub d_list: Option<Vec<usize>>,
    pub seeds: Option<Vec<u64>>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_output_dir")]
    pub directory: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_output_dir(),
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

/// Normalizes amplitudes within `1e-6` of unit norm (with a warning) and
/// rejects anything further off.
fn amplitude_vector(field: &str, raw: &[Amplitude]) -> Result<Vec<Complex64>, CliError> {
    if raw.is_empty() {
        return Err(invalid(field, "must not be empty"));
    }
    let v: Vec<Complex64> = raw.iter().map(|a| a.value()).collect();
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(invalid(field, "amplitudes must be finite"));
    }
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let off = (norm - 1.0).abs();
    if off <= NORMALIZED_TOL {
        Ok(v)
    } else if off <= RENORMALIZE_TOL {
        log::warn!("{field}: norm {norm} renormalized to 1");
        Ok(v.into_iter().map(|z| z / norm).collect())
    } else {
        Err(invalid(field, format!("norm {norm} is not 1 (tolerance {RENORMALIZE_TOL:e})")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Memory cap from the environment override, the config, or the default.
    pub fn memory_cap(&self) -> Result<u128, CliError> {
        match std::env::var(MEMORY_CAP_ENV) {
            Ok(v) => v
                .trim()
                .parse::<u128>()
                .map_err(|e| invalid(MEMORY_CAP_ENV, e)),
            Err(_) => Ok(self.memory_cap_bytes.map(u128::from).unwrap_or(DEFAULT_MEMORY_CAP_BYTES)),
        }
    }

    fn initial_state(&self) -> Result<InitialState, CliError> {
        let init = &self.initial;
        let m = self.cutoff.m;
        let amplitudes = |field: &str, raw: &Option<Vec<Amplitude>>| -> Result<Vec<Complex64>, CliError> {
            let raw = raw
                .as_ref()
                .ok_or_else(|| invalid(field, "required for this initial kind"))?;
            if raw.len() > m + 1 {
                return Err(invalid(field, format!("{} amplitudes exceed cutoff M = {m}", raw.len())));
            }
            amplitude_vector(field, raw)
        };
        match init.kind {
            InitialKind::Gutzwiller => Ok(InitialState::Gutzwiller {
                amplitudes: amplitudes("initial.amplitudes", &init.amplitudes)?,
            }),
            InitialKind::PerturbedGutzwiller => Ok(InitialState::PerturbedGutzwiller {
                amplitudes: amplitudes("initial.amplitudes", &init.amplitudes)?,
                perp_amplitudes: amplitudes("initial.perp_amplitudes", &init.perp_amplitudes)?,
                num_perturbed: init
                    .num_perturbed_sites
                    .ok_or_else(|| invalid("initial.num_perturbed_sites", "required for perturbed_gutzwiller"))?,
            }),
            InitialKind::FockTuple => {
                let occ = init
                    .occupations
                    .clone()
                    .ok_or_else(|| invalid("initial.occupations", "required for fock_tuple"))?;
                if let Some(n) = occ.iter().find(|&&n| n > m) {
                    return Err(invalid("initial.occupations", format!("occupation {n} exceeds cutoff M = {m}")));
                }
                Ok(InitialState::FockTuple { occupations: occ })
            }
        }
    }

    /// Validates every field and assembles the core run description.
    pub fn setup(&self, seed_override: Option<u64>) -> Result<RunSetup, CliError> {
        let m = &self.model;
        for (name, v) in [("model.J", m.j), ("model.mu", m.mu), ("model.U", m.u)] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        let lattice = Lattice::new(self.lattice.l, self.lattice.d).map_err(|e| invalid("lattice", e))?;
        let t = &self.time;
        if !(t.t_final > 0.0 && t.t_final.is_finite()) {
            return Err(invalid("time.t_final", "must be > 0"));
        }
        if !(t.dt > 0.0 && t.dt <= MAX_DT) {
            return Err(invalid("time.dt", format!("must lie in (0, {MAX_DT}]")));
        }
        if t.n_samples < 2 {
            return Err(invalid("time.n_samples", "must be at least 2"));
        }
        if !(1e-14..=1e-6).contains(&t.krylov_tol) {
            return Err(invalid("time.krylov_tol", "must lie in [1e-14, 1e-6]"));
        }
        if !self.diagnostics.c_constant.is_finite() {
            return Err(invalid("diagnostics.c_constant_C", "must be finite"));
        }
        if let Some(k) = self
            .diagnostics
            .k_moments
            .iter()
            .find(|k| **k < 0.0 || (2.0 * **k).fract() != 0.0)
        {
            return Err(invalid("diagnostics.k_moments", format!("{k} is not a non-negative multiple of 1/2")));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.d_list.as_ref().is_some_and(|l| l.is_empty() || l.contains(&0)) {
                return Err(invalid("sweep.d_list", "must be non-empty with entries >= 1"));
            }
            if sweep.seeds.as_ref().is_some_and(|s| s.is_empty()) {
                return Err(invalid("sweep.seeds", "must not be empty"));
            }
        }
        Ok(RunSetup {
            params: ModelParams::new(m.j, m.mu, m.u),
            lattice,
            cutoff: FockCutoff::new(self.cutoff.m),
            t_final: t.t_final,
            dt: t.dt,
            n_samples: t.n_samples,
            krylov_tol: t.krylov_tol,
            initial: self.initial_state()?,
            c_constant: self.diagnostics.c_constant,
            seed: seed_override.or(self.seed).unwrap_or(0),
            budget: MemoryBudget::new(self.memory_cap()?),
        })
    }

    pub fn d_list(&self) -> Vec<usize> {
        self.sweep
            .as_ref()
            .and_then(|s| s.d_list.clone())
            .unwrap_or_else(|| vec![self.lattice.d])
    }

    pub fn sweep_seeds(&self, run_seed: u64) -> Vec<u64> {
        self.sweep
            .as_ref()
            .and_then(|s| s.seeds.clone())
            .unwrap_or_else(|| vec![run_seed])
    }
}
