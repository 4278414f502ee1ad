//! Gutzwiller mean-field dynamics on one truncated site.
//!
//! The equation `i∂ₜφ = h^φ φ` splits into the diagonal part
//! `A = (J − μ)N + (U/2)N(N − 1)` and the hopping dressing
//! `F(φ) = −J(α a† + ᾱ a − |α|²)φ`. The integrator applies `e^{−isA}`
//! exactly and advances the interaction-picture variable `e^{isA}φ(s)` with
//! classical RK4 (a Lawson scheme). Norm drift is measured, never corrected.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{build_ladder, FockCutoff, SiteOperator};
use crate::manybody::{check_normalized, ModelParams};

/// Norm drift that aborts an integration.
pub const MAX_NORM_DRIFT: f64 = 1e-6;
/// Largest admissible mean-field step.
pub const MAX_DT: f64 = 1e-2;

/// `α_φ = ⟨φ, aφ⟩ = Σ_n √(n+1) φ̄_n φ_{n+1}`.
pub fn order_parameter(phi: &[Complex64]) -> Complex64 {
    phi.windows(2)
        .enumerate()
        .map(|(n, w)| ((n + 1) as f64).sqrt() * w[0].conj() * w[1])
        .sum()
}

/// `h^φ = −J(α a† + ᾱ a − |α|²) + (J − μ)N + (U/2)N(N − 1)` on the cutoff space.
pub fn mf_generator(phi: &[Complex64], params: &ModelParams, cutoff: FockCutoff) -> Result<SiteOperator> {
    if phi.len() != cutoff.dim() {
        return Err(Error::DimensionMismatch {
            expected: cutoff.dim(),
            found: phi.len(),
        });
    }
    let alpha = order_parameter(phi);
    let ladder = build_ladder(cutoff);
    let j = params.hopping;
    let diag = SiteOperator::diagonal(cutoff, |n| params.onsite_energy(n) + j * alpha.norm_sqr());
    let m = diag.into_matrix()
        - ladder.creation.matrix() * Complex64::new(j, 0.0) * alpha
        - ladder.annihilator.matrix() * Complex64::new(j, 0.0) * alpha.conj();
    SiteOperator::from_matrix(m, cutoff)
}

fn weighted_sum(phi: &[Complex64], f: impl Fn(f64) -> f64) -> f64 {
    phi.iter()
        .enumerate()
        .map(|(n, z)| f(n as f64) * z.norm_sqr())
        .sum()
}

/// `⟨φ, h^φ φ⟩ = J(⟨N⟩ − |α|²) − μ⟨N⟩ + (U/2)⟨N(N − 1)⟩`.
pub fn mf_energy(phi: &[Complex64], params: &ModelParams) -> f64 {
    let number = weighted_sum(phi, |n| n);
    let pairs = weighted_sum(phi, |n| n * (n - 1.0));
    let alpha = order_parameter(phi);
    params.hopping * (number - alpha.norm_sqr()) - params.chemical_potential * number
        + 0.5 * params.interaction * pairs
}

fn check_half_integer(k: f64) -> Result<()> {
    if k < 0.0 || !k.is_finite() || (2.0 * k).fract() != 0.0 {
        return Err(Error::InvalidInput(format!(
            "moment order must be a non-negative multiple of 1/2, got {k}"
        )));
    }
    Ok(())
}

/// `⟨φ, N^k φ⟩ = Σ_n n^k |φ_n|²` for `k ∈ ℕ/2`.
pub fn mf_moment(phi: &[Complex64], k: f64) -> Result<f64> {
    check_half_integer(k)?;
    Ok(weighted_sum(phi, |n| n.powf(k)))
}

/// `(m_k(0) + k^k/e) · exp(2e|J| k √⟨N⟩₀ t)`.
pub fn moment_bound_exponential(initial_moment: f64, initial_number: f64, k: f64, hopping: f64, t: f64) -> f64 {
    let e = std::f64::consts::E;
    (initial_moment + k.powf(k) / e) * (2.0 * e * hopping.abs() * k * initial_number.sqrt() * t).exp()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Σ_{l=0}^{2(k−1)} C(2k, l) (|J| √⟨N⟩₀ t)^l ⟨φ₀, (N + l)^{k − l/2} φ₀⟩` for `k ≥ 1`.
pub fn moment_bound_polynomial(phi0: &[Complex64], k: f64, hopping: f64, t: f64) -> Result<f64> {
    check_half_integer(k)?;
    if k < 1.0 {
        return Err(Error::InvalidInput(format!("polynomial moment bound needs k >= 1, got {k}")));
    }
    let twice_k = (2.0 * k) as usize;
    let n0 = weighted_sum(phi0, |n| n);
    let x = hopping.abs() * n0.sqrt() * t;
    Ok((0..=twice_k - 2)
        .map(|l| {
            let lf = l as f64;
            binomial(twice_k, l) * x.powi(l as i32) * weighted_sum(phi0, |n| (n + lf).powf(k - lf / 2.0))
        })
        .sum())
}

/// `‖|u⟩⟨u| − |v⟩⟨v|‖₁` for the normalized directions of `u` and `v`,
/// computed as `2‖v − ⟨u, v⟩u‖` to avoid cancellation.
pub fn projector_distance(u: &[Complex64], v: &[Complex64]) -> f64 {
    let (nu, nv) = (vec_norm(u), vec_norm(v));
    let overlap: Complex64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<Complex64>() / (nu * nu * nv);
    2.0 * u
        .iter()
        .zip(v)
        .map(|(a, b)| (b / nv - a * overlap).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Mean-field state at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct MfState {
    pub phi: Vec<Complex64>,
    pub alpha: Complex64,
    pub t: f64,
}

impl MfState {
    pub fn new(phi: Vec<Complex64>, t: f64) -> Self {
        let alpha = order_parameter(&phi);
        Self { phi, alpha, t }
    }

    pub fn norm(&self) -> f64 {
        vec_norm(&self.phi)
    }

    pub fn number(&self) -> f64 {
        weighted_sum(&self.phi, |n| n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntegratorSettings {
    pub dt: f64,
    /// Also integrate with `dt/2` and report the largest disagreement.
    pub richardson: bool,
}

#[derive(Clone, Debug)]
pub struct MfTrajectory {
    pub states: Vec<MfState>,
    pub params: ModelParams,
    pub cutoff: FockCutoff,
    pub settings: IntegratorSettings,
    /// Largest `|‖φ‖ − 1|` seen at any step.
    pub max_norm_drift: f64,
    /// `sup_t ‖φ_dt(t) − φ_{dt/2}(t)‖` when requested.
    pub richardson_delta: Option<f64>,
}

impl MfTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }
}

/// Evaluates the nonlinear dressing `F(φ)` into `out`.
fn dressing(phi: &[Complex64], hopping: f64, out: &mut [Complex64]) {
    let alpha = order_parameter(phi);
    let dim = phi.len();
    let a2 = alpha.norm_sqr();
    for n in 0..dim {
        // (a†φ)_n = √n φ_{n−1}, (aφ)_n = √(n+1) φ_{n+1}
        let up = if n > 0 { (n as f64).sqrt() * phi[n - 1] } else { Complex64::new(0.0, 0.0) };
        let down = if n + 1 < dim { ((n + 1) as f64).sqrt() * phi[n + 1] } else { Complex64::new(0.0, 0.0) };
        out[n] = -hopping * (alpha * up + alpha.conj() * down - phi[n] * a2);
    }
}

struct Stepper {
    diag: Vec<f64>,
    hopping: f64,
    buf: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Stepper {
    fn new(params: &ModelParams, cutoff: FockCutoff) -> Self {
        Self {
            diag: (0..cutoff.dim()).map(|n| params.onsite_energy(n)).collect(),
            hopping: params.hopping,
            buf: vec![Complex64::new(0.0, 0.0); cutoff.dim()],
            tmp: vec![Complex64::new(0.0, 0.0); cutoff.dim()],
        }
    }

    /// `dψ/ds = −i e^{isA} F(e^{−isA} ψ)`.
    fn rhs(&mut self, psi: &[Complex64], s: f64, out: &mut [Complex64]) {
        for ((t, p), a) in self.tmp.iter_mut().zip(psi).zip(&self.diag) {
            *t = p * Complex64::from_polar(1.0, -a * s);
        }
        dressing(&self.tmp, self.hopping, &mut self.buf);
        for ((o, f), a) in out.iter_mut().zip(&self.buf).zip(&self.diag) {
            *o = Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, a * s) * f;
        }
    }

    /// One Lawson-RK4 step of signed size `h`.
    fn step(&mut self, phi: &mut [Complex64], h: f64) {
        let n = phi.len();
        let zero = Complex64::new(0.0, 0.0);
        let (mut k1, mut k2, mut k3, mut k4) = (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
        let mut stage = vec![zero; n];
        self.rhs(phi, 0.0, &mut k1);
        for i in 0..n {
            stage[i] = phi[i] + k1[i] * (0.5 * h);
        }
        self.rhs(&stage, 0.5 * h, &mut k2);
        for i in 0..n {
            stage[i] = phi[i] + k2[i] * (0.5 * h);
        }
        self.rhs(&stage, 0.5 * h, &mut k3);
        for i in 0..n {
            stage[i] = phi[i] + k3[i] * h;
        }
        self.rhs(&stage, h, &mut k4);
        for i in 0..n {
            let psi = phi[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
            phi[i] = psi * Complex64::from_polar(1.0, -self.diag[i] * h);
        }
    }
}

/// Advances `phi` by the signed `duration` using equal steps no longer than `dt`.
/// Returns the largest norm drift seen.
fn advance(
    stepper: &mut Stepper,
    phi: &mut [Complex64],
    t_start: f64,
    duration: f64,
    dt: f64,
) -> Result<f64> {
    if duration == 0.0 {
        return Ok(0.0);
    }
    let steps = ((duration.abs() / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = duration / steps as f64;
    let mut drift: f64 = 0.0;
    for s in 0..steps {
        stepper.step(phi, h);
        let d = (vec_norm(phi) - 1.0).abs();
        if !d.is_finite() || d > MAX_NORM_DRIFT {
            let suggested = if d.is_finite() {
                dt * (0.1 * MAX_NORM_DRIFT / d).powf(0.25)
            } else {
                dt * 0.1
            };
            return Err(Error::Integration {
                time: t_start + h * (s + 1) as f64,
                drift: d,
                limit: MAX_NORM_DRIFT,
                suggested_dt: suggested,
            });
        }
        drift = drift.max(d);
    }
    Ok(drift)
}

fn validate_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::InvalidInput(format!("mean-field dt must lie in (0, {MAX_DT}], got {dt}")));
    }
    Ok(())
}

/// Propagates `phi` by a signed time, for derivative checks around `t = 0`.
pub fn propagate_mf(
    phi: &[Complex64],
    params: &ModelParams,
    cutoff: FockCutoff,
    duration: f64,
    dt: f64,
) -> Result<Vec<Complex64>> {
    validate_dt(dt)?;
    if phi.len() != cutoff.dim() {
        return Err(Error::DimensionMismatch {
            expected: cutoff.dim(),
            found: phi.len(),
        });
    }
    let mut out = phi.to_vec();
    let mut stepper = Stepper::new(params, cutoff);
    advance(&mut stepper, &mut out, 0.0, duration, dt)?;
    Ok(out)
}

fn integrate(
    phi0: &[Complex64],
    params: &ModelParams,
    cutoff: FockCutoff,
    t_grid: &[f64],
    dt: f64,
) -> Result<(Vec<MfState>, f64)> {
    let mut stepper = Stepper::new(params, cutoff);
    let mut phi = phi0.to_vec();
    let mut t = 0.0;
    let mut drift: f64 = 0.0;
    let mut states = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        drift = drift.max(advance(&mut stepper, &mut phi, t, target - t, dt)?);
        t = target;
        states.push(MfState::new(phi.clone(), t));
    }
    Ok((states, drift))
}

/// Integrates the mean-field equation from `phi0` at time zero and samples
/// it on a strictly increasing, non-negative grid.
pub fn evolve_mf(
    phi0: &[Complex64],
    params: &ModelParams,
    cutoff: FockCutoff,
    t_grid: &[f64],
    settings: IntegratorSettings,
) -> Result<MfTrajectory> {
    params.validate()?;
    validate_dt(settings.dt)?;
    if phi0.len() != cutoff.dim() {
        return Err(Error::DimensionMismatch {
            expected: cutoff.dim(),
            found: phi0.len(),
        });
    }
    check_normalized(phi0, 1e-10, "mean-field initial state")?;
    if t_grid.is_empty()
        || t_grid.iter().any(|t| !t.is_finite() || *t < 0.0)
        || t_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidInput(
            "time grid must be non-empty, non-negative and strictly increasing".into(),
        ));
    }
    let (states, max_norm_drift) = integrate(phi0, params, cutoff, t_grid, settings.dt)?;
    let richardson_delta = if settings.richardson {
        let (fine, _) = integrate(phi0, params, cutoff, t_grid, 0.5 * settings.dt)?;
        Some(
            states
                .iter()
                .zip(&fine)
                .map(|(a, b)| {
                    a.phi
                        .iter()
                        .zip(&b.phi)
                        .map(|(x, y)| (x - y).norm_sqr())
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    Ok(MfTrajectory {
        states,
        params: *params,
        cutoff,
        settings,
        max_norm_drift,
        richardson_delta,
    })
}

/// Zero-pads `phi` to the dimension of `cutoff`.
pub fn pad_to_cutoff(phi: &[Complex64], cutoff: FockCutoff) -> Result<Vec<Complex64>> {
    if phi.len() > cutoff.dim() {
        if phi[cutoff.dim()..].iter().any(|z| z.norm() > 0.0) {
            return Err(Error::InvalidInput(format!(
                "state has weight above cutoff M = {}",
                cutoff.max_occupation()
            )));
        }
        return Ok(phi[..cutoff.dim()].to_vec());
    }
    let mut out = phi.to_vec();
    out.resize(cutoff.dim(), Complex64::new(0.0, 0.0));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementDelta {
    pub coarse: usize,
    pub fine: usize,
    /// `sup_t ‖φ_M(t) − φ_M'(t)‖` with the coarse state zero-padded.
    pub sup_state_distance: f64,
    /// `sup_t ‖p_M(t) − p_M'(t)‖₁`.
    pub sup_projector_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementReport {
    pub cutoffs: Vec<usize>,
    pub deltas: Vec<RefinementDelta>,
}

impl RefinementReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.deltas
            .windows(2)
            .all(|w| w[1].sup_state_distance < w[0].sup_state_distance)
    }

    /// Distance between the two finest cutoffs.
    pub fn final_delta(&self) -> Option<f64> {
        self.deltas.last().map(|d| d.sup_state_distance)
    }
}

/// Runs the same mean-field problem at each cutoff of a strictly increasing
/// schedule and compares consecutive cutoffs on a uniform grid of
/// `n_samples` times in `[0, t_final]`.
pub fn truncation_refine(
    phi0: &[Complex64],
    params: &ModelParams,
    t_final: f64,
    schedule: &[usize],
    dt: f64,
    n_samples: usize,
) -> Result<RefinementReport> {
    if schedule.len() < 2 || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "cutoff schedule must contain at least two strictly increasing values".into(),
        ));
    }
    if t_final.is_nan() || t_final <= 0.0 || n_samples < 2 {
        return Err(Error::InvalidInput("need t_final > 0 and at least two samples".into()));
    }
    let grid = uniform_grid(t_final, n_samples);
    let settings = IntegratorSettings { dt, richardson: false };
    let finest = FockCutoff::new(*schedule.last().unwrap());
    let runs = schedule
        .iter()
        .map(|&m| {
            let cutoff = FockCutoff::new(m);
            let start = pad_to_cutoff(phi0, cutoff)?;
            let traj = evolve_mf(&start, params, cutoff, &grid, settings)?;
            traj.states
                .into_iter()
                .map(|s| pad_to_cutoff(&s.phi, finest))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let deltas = schedule
        .windows(2)
        .zip(runs.windows(2))
        .map(|(m, r)| {
            let (mut state, mut proj) = (0.0f64, 0.0f64);
            for (a, b) in r[0].iter().zip(&r[1]) {
                let dist = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
                state = state.max(dist);
                proj = proj.max(projector_distance(b, a));
            }
            RefinementDelta {
                coarse: m[0],
                fine: m[1],
                sup_state_distance: state,
                sup_projector_distance: proj,
            }
        })
        .collect();
    Ok(RefinementReport {
        cutoffs: schedule.to_vec(),
        deltas,
    })
}

/// `n` equally spaced times from 0 to `t_final` inclusive.
pub fn uniform_grid(t_final: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    (0..n).map(|i| t_final * i as f64 / (n - 1) as f64).collect()
}
