//! Echo runs: fidelity amplitudes from two diagonalized Floquet operators.
//!
//! With `U0 = X0 e^{iΦ0} X0†` and `U1 = X1 e^{iΦ1} X1†`,
//! `f(n) = ⟨U0ⁿψ|U1ⁿψ⟩ = (e^{inΦ0} a0)† (X0†X1) (e^{inΦ1} a1)` with `a_k = X_k†ψ`,
//! so each sample costs one matrix-vector product regardless of `n`.

use std::time::Instant;

use faer::{c64, Col, ColRef, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{FreezeError, Result};
use crate::linalg::{self, UnitarySpectrum};
use crate::models::{InitialState, ModelKind, ModelParams, PreparedState, TopModel};
use crate::semiclassics::{plateau_prediction, PlateauOrder, StateKind};
use crate::spin::StateLabel;

/// Default density of the logarithmic grid.
pub const DEFAULT_PER_DECADE: usize = 60;
/// Default cap on the number of samples, `n = 0` included.
pub const DEFAULT_MAX_SAMPLES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EchoMode {
    /// `U_δ = U0 exp(−iVδ/ħ)`.
    #[default]
    Direct,
    /// `U0 exp(−iRδ_R/ħ)` with `δ_R = δ²/2`, fidelity multiplied by the exact plateau.
    Renormalized,
}

/// `n = 0` plus log-spaced integers up to `n_max` (always included).
///
/// The density drops below `per_decade` when needed to respect `max_samples`.
pub fn log_grid(n_max: u64, per_decade: usize, max_samples: usize) -> Vec<u64> {
    let mut out = vec![0];
    if n_max == 0 || max_samples < 2 {
        return out;
    }
    let decades = (n_max as f64).log10().max(1e-9);
    let budget = max_samples.saturating_sub(2).max(1) as f64;
    let density = (per_decade.max(1) as f64).min(budget / decades);
    let count = (decades * density).floor() as usize;
    for k in 0..=count {
        let n = 10f64.powf(k as f64 / density).round() as u64;
        if n >= 1 && n < n_max && *out.last().unwrap() != n {
            out.push(n);
        }
    }
    out.push(n_max);
    out
}

/// `0, step, 2·step, …` up to `n_max` (always included).
pub fn linear_grid(n_max: u64, step: u64) -> Vec<u64> {
    let step = step.max(1);
    let mut out: Vec<u64> = (0..=n_max / step).map(|k| k * step).collect();
    if *out.last().unwrap() != n_max {
        out.push(n_max);
    }
    out
}

/// One echo experiment on a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoRunConfig {
    pub delta: f64,
    pub initial: InitialState,
    pub n_max: u64,
    pub sample_times: Vec<u64>,
    pub mode: EchoMode,
    /// Number of samples at which both branch norms are recomputed (0 disables).
    pub norm_checks: usize,
    /// Plateau prefactor for renormalized runs on models without a classical `W`.
    pub plateau_prefactor: Option<f64>,
}

impl EchoRunConfig {
    pub fn new(delta: f64, initial: InitialState, n_max: u64) -> Self {
        Self {
            delta,
            initial,
            n_max,
            sample_times: log_grid(n_max, DEFAULT_PER_DECADE, DEFAULT_MAX_SAMPLES),
            mode: EchoMode::Direct,
            norm_checks: 16,
            plateau_prefactor: None,
        }
    }

    pub fn with_mode(mut self, mode: EchoMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_linear_grid(mut self, step: u64) -> Self {
        self.sample_times = linear_grid(self.n_max, step);
        self
    }

    pub fn with_sample_times(mut self, times: Vec<u64>) -> Self {
        self.sample_times = times;
        self
    }

    pub fn with_norm_checks(mut self, count: usize) -> Self {
        self.norm_checks = count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() {
            return Err(FreezeError::InvalidConfig(format!("δ = {} is not finite", self.delta)));
        }
        if self.sample_times.is_empty() {
            return Err(FreezeError::InvalidConfig("no sample times".into()));
        }
        if self.sample_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FreezeError::InvalidConfig("sample times must be strictly increasing".into()));
        }
        if *self.sample_times.last().unwrap() > self.n_max {
            return Err(FreezeError::InvalidConfig(format!("sample times exceed n_max = {}", self.n_max)));
        }
        if let Some(p) = self.plateau_prefactor {
            if !(0.0..=1.0).contains(&p) {
                return Err(FreezeError::InvalidConfig(format!("plateau prefactor {p} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelitySample {
    pub n: u64,
    pub fidelity: f64,
    pub amplitude_re: f64,
    pub amplitude_im: f64,
}

impl FidelitySample {
    pub fn new(n: u64, amplitude: c64) -> Self {
        Self { n, fidelity: amplitude.norm_sqr(), amplitude_re: amplitude.re, amplitude_im: amplitude.im }
    }

    pub fn amplitude(&self) -> c64 {
        c64::new(self.amplitude_re, self.amplitude_im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub model: Option<ModelParams>,
    pub delta: f64,
    pub mode: EchoMode,
    pub initial: Option<InitialState>,
    pub state: Option<StateLabel>,
    pub projected_norm: Option<f64>,
    pub classical: bool,
    /// Multiplier applied to the raw fidelity (renormalized runs).
    pub prefactor: Option<f64>,
    pub max_norm_drift: Option<f64>,
    pub spectral_residual: Option<f64>,
    pub wall_time_s: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelitySeries {
    pub samples: Vec<FidelitySample>,
    pub meta: SeriesMeta,
}

impl FidelitySeries {
    pub fn times(&self) -> Vec<u64> {
        self.samples.iter().map(|s| s.n).collect()
    }

    pub fn fidelities(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.fidelity).collect()
    }

    /// `(n, F)` pairs as floats.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.n as f64, s.fidelity)).collect()
    }

    /// Fidelities with `lo ≤ n ≤ hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.samples.iter().filter(|s| (s.n as f64) >= lo && (s.n as f64) <= hi).map(|s| s.fidelity).collect()
    }
}

/// `Uⁿψ` through a fresh eigendecomposition of `U`.
pub fn spectral_propagate(u: MatRef<'_, c64>, psi: ColRef<'_, c64>, n: i64) -> Result<Col<c64>> {
    Ok(UnitarySpectrum::new(u)?.propagate(psi, n))
}

/// Precomputed overlap data for a pair of propagators and one initial state.
pub struct EchoPair<'a> {
    reference: &'a UnitarySpectrum,
    perturbed: &'a UnitarySpectrum,
    overlap: Mat<c64>,
    a0: Col<c64>,
    a1: Col<c64>,
    psi_norm_sq: f64,
}

impl<'a> EchoPair<'a> {
    pub fn new(reference: &'a UnitarySpectrum, perturbed: &'a UnitarySpectrum, psi: ColRef<'_, c64>) -> Self {
        let overlap = reference.vectors().adjoint() * perturbed.vectors();
        let psi_norm_sq = linalg::norm(psi).powi(2);
        Self { reference, perturbed, overlap, a0: reference.to_eigenbasis(psi), a1: perturbed.to_eigenbasis(psi), psi_norm_sq }
    }

    /// `f(n) = ⟨U0ⁿψ|U1ⁿψ⟩`; `n = 0` returns `⟨ψ|ψ⟩` exactly.
    pub fn amplitude(&self, n: u64) -> c64 {
        if n == 0 {
            return c64::new(self.psi_norm_sq, 0.0);
        }
        let b0 = self.reference.evolve_coefficients(self.a0.as_ref(), n as i64);
        let b1 = self.perturbed.evolve_coefficients(self.a1.as_ref(), n as i64);
        let m = &self.overlap * &b1;
        linalg::inner(b0.as_ref(), m.as_ref())
    }

    /// `(‖U0ⁿψ‖, ‖U1ⁿψ‖)` evaluated in the original basis.
    pub fn branch_norms(&self, n: u64) -> (f64, f64) {
        let b0 = self.reference.evolve_coefficients(self.a0.as_ref(), n as i64);
        let b1 = self.perturbed.evolve_coefficients(self.a1.as_ref(), n as i64);
        let v0 = self.reference.from_eigenbasis(b0.as_ref());
        let v1 = self.perturbed.from_eigenbasis(b1.as_ref());
        (linalg::norm(v0.as_ref()), linalg::norm(v1.as_ref()))
    }
}

fn state_kind(initial: &InitialState) -> StateKind {
    match initial {
        InitialState::Cis { .. } => StateKind::Cis,
        InitialState::Ris { .. } => StateKind::Ris,
    }
}

/// Spectrum of the perturbed propagator for a mode; `None` when it equals `U0`.
pub fn perturbed_spectrum(model: &TopModel, delta: f64, mode: EchoMode) -> Result<Option<UnitarySpectrum>> {
    let strength = match mode {
        EchoMode::Direct => delta,
        EchoMode::Renormalized => delta * delta / 2.0,
    };
    if strength == 0.0 {
        return Ok(None);
    }
    let u = match mode {
        EchoMode::Direct => model.perturbed_propagator(delta)?,
        EchoMode::Renormalized => model.renormalized_propagator(delta)?,
    };
    Ok(Some(UnitarySpectrum::new(u.as_ref())?))
}

/// Direct or renormalized fidelity series, building the perturbed spectrum.
pub fn fidelity_series(model: &TopModel, config: &EchoRunConfig) -> Result<FidelitySeries> {
    config.validate()?;
    let start = Instant::now();
    let spectrum = perturbed_spectrum(model, config.delta, config.mode)?;
    let mut series = fidelity_series_with(model, spectrum.as_ref(), config)?;
    series.meta.wall_time_s = start.elapsed().as_secs_f64();
    Ok(series)
}

/// Renormalized-mode series; the same as [`fidelity_series`] with the mode forced.
pub fn renormalized_fidelity_series(model: &TopModel, config: &EchoRunConfig) -> Result<FidelitySeries> {
    let cfg = EchoRunConfig { mode: EchoMode::Renormalized, ..config.clone() };
    fidelity_series(model, &cfg)
}

/// Fidelity series with a precomputed perturbed spectrum (`None` means `U1 = U0`).
pub fn fidelity_series_with(model: &TopModel, perturbed: Option<&UnitarySpectrum>, config: &EchoRunConfig) -> Result<FidelitySeries> {
    config.validate()?;
    let start = Instant::now();
    let prepared = model.prepare_state(&config.initial)?;
    let reference = model.u0_spectrum()?;
    let perturbed = perturbed.unwrap_or(reference);
    if perturbed.dim() != reference.dim() {
        return Err(FreezeError::InvalidConfig("perturbed spectrum dimension differs from the model".into()));
    }
    let prefactor = match config.mode {
        EchoMode::Direct => None,
        EchoMode::Renormalized => Some(renormalized_prefactor(model, config)?),
    };
    let pair = EchoPair::new(reference, perturbed, prepared.coeffs.as_ref());
    let scale = prefactor.map_or(1.0, f64::sqrt);
    let samples: Vec<FidelitySample> =
        config.sample_times.iter().map(|&n| FidelitySample::new(n, pair.amplitude(n) * scale)).collect();
    let max_norm_drift = norm_drift(&pair, &config.sample_times, config.norm_checks);
    Ok(FidelitySeries {
        samples,
        meta: series_meta(model, config, &prepared, prefactor, max_norm_drift, reference.residual().max(perturbed.residual()), start),
    })
}

fn renormalized_prefactor(model: &TopModel, config: &EchoRunConfig) -> Result<f64> {
    if let Some(p) = config.plateau_prefactor {
        return Ok(p);
    }
    match model.kind() {
        ModelKind::Custom { .. } => Err(FreezeError::Unsupported(
            "the generating-function plateau (set plateau_prefactor for renormalized runs)".into(),
        )),
        _ => Ok(plateau_prediction(state_kind(&config.initial), config.delta, model.hbar(), model.degrees_of_freedom(), PlateauOrder::Exact)
            .value),
    }
}

/// Evenly spread indices into `times`, endpoints included.
fn check_indices(len: usize, count: usize) -> Vec<usize> {
    if count == 0 || len == 0 {
        return Vec::new();
    }
    if count >= len {
        return (0..len).collect();
    }
    let mut idx: Vec<usize> = (0..count).map(|k| k * (len - 1) / (count - 1).max(1)).collect();
    idx.dedup();
    idx
}

fn norm_drift(pair: &EchoPair<'_>, times: &[u64], checks: usize) -> Option<f64> {
    let idx = check_indices(times.len(), checks);
    if idx.is_empty() {
        return None;
    }
    Some(idx.into_iter().map(|i| {
        let (a, b) = pair.branch_norms(times[i]);
        (a - 1.0).abs().max((b - 1.0).abs())
    }).fold(0.0, f64::max))
}

fn series_meta(
    model: &TopModel,
    config: &EchoRunConfig,
    prepared: &PreparedState,
    prefactor: Option<f64>,
    max_norm_drift: Option<f64>,
    spectral_residual: f64,
    start: Instant,
) -> SeriesMeta {
    SeriesMeta {
        model: Some(model.params()),
        delta: config.delta,
        mode: config.mode,
        initial: Some(config.initial),
        state: Some(prepared.label),
        projected_norm: Some(prepared.projected_norm),
        classical: false,
        prefactor,
        max_norm_drift,
        spectral_residual: Some(spectral_residual),
        wall_time_s: start.elapsed().as_secs_f64(),
        notes: Vec::new(),
    }
}

/// Which operator a correlation function refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    V,
    W,
    R,
}

fn observable_matrix(model: &TopModel, which: Observable) -> MatRef<'_, c64> {
    match which {
        Observable::V => model.v(),
        Observable::W => model.w(),
        Observable::R => model.r(),
    }
}

/// `C(n1, n2) = ⟨A_{n1} A_{n2}⟩ − ⟨A_{n1}⟩⟨A_{n2}⟩` with `A_n = U0⁻ⁿ A U0ⁿ`.
pub fn correlation_function(model: &TopModel, psi: ColRef<'_, c64>, n1: u64, n2: u64, which: Observable) -> Result<c64> {
    let u = model.u0_spectrum()?;
    let a = observable_matrix(model, which);
    let (n1, n2) = (n1 as i64, n2 as i64);
    let phi1 = u.propagate(psi, n1);
    let phi2 = u.propagate(psi, n2);
    let a_phi2 = a * &phi2;
    let chi = u.propagate(a_phi2.as_ref(), n1 - n2);
    let a_chi = a * &chi;
    let joint = linalg::inner(phi1.as_ref(), a_chi.as_ref());
    let m1 = linalg::expectation(a, phi1.as_ref());
    let m2 = linalg::inner(phi2.as_ref(), a_phi2.as_ref());
    Ok(joint - m1 * m2)
}

/// Quantities entering the second-order fidelity at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearResponse {
    pub n: u64,
    pub kappa0_sq: f64,
    pub kappa_n_sq: f64,
    pub correlation: c64,
    pub fidelity: f64,
}

/// `F ≈ 1 − (δ/ħ)²(κ0² + κn² − 2 Re C_n)` with `C_n = ⟨W_n W_0⟩ − ⟨W_n⟩⟨W_0⟩`.
pub fn linear_response_fidelity(model: &TopModel, psi: ColRef<'_, c64>, delta: f64, n: u64) -> Result<LinearResponse> {
    let kappa0_sq = correlation_function(model, psi, 0, 0, Observable::W)?.re;
    let kappa_n_sq = correlation_function(model, psi, n, n, Observable::W)?.re;
    let correlation = correlation_function(model, psi, n, 0, Observable::W)?;
    let z = delta / model.hbar();
    let fidelity = if n == 0 { 1.0 } else { 1.0 - z * z * (kappa0_sq + kappa_n_sq - 2.0 * correlation.re) };
    Ok(LinearResponse { n, kappa0_sq, kappa_n_sq, correlation, fidelity })
}

/// Threshold on `|C_W(0,n)| / (κ0 κn)` defining the mixing time.
pub const MIXING_THRESHOLD: f64 = 0.05;

/// Smallest `n ≤ n_max` with `|C_W(0,n)| < 0.05·κ0κn`, if any.
pub fn mixing_time(model: &TopModel, psi: ColRef<'_, c64>, n_max: u64) -> Result<Option<u64>> {
    let u = model.u0_spectrum()?;
    let w = model.w();
    let w_psi = w * psi;
    let kappa0_sq = (linalg::inner(psi, w_psi.as_ref()) - linalg::expectation(w, psi).powi(2)).re.max(0.0);
    let m0 = linalg::expectation(w, psi);
    let c_psi = u.to_eigenbasis(psi);
    let c_wpsi = u.to_eigenbasis(w_psi.as_ref());
    for n in 1..=n_max {
        let phi = u.from_eigenbasis(u.evolve_coefficients(c_psi.as_ref(), n as i64).as_ref());
        let chi = u.from_eigenbasis(u.evolve_coefficients(c_wpsi.as_ref(), n as i64).as_ref());
        let w_phi = w * &phi;
        let mn = linalg::inner(phi.as_ref(), w_phi.as_ref());
        let kappa_n_sq = (linalg::inner(w_phi.as_ref(), w_phi.as_ref()) - mn * mn).re.max(0.0);
        let c = linalg::inner(w_phi.as_ref(), chi.as_ref()) - mn * m0;
        if c.norm() < MIXING_THRESHOLD * (kappa0_sq * kappa_n_sq).sqrt() {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Mean, standard deviation and count of `F` over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauStats {
    pub mean: f64,
    pub std: f64,
    pub samples: usize,
    pub lo: f64,
    pub hi: f64,
}

pub fn plateau_stats(series: &FidelitySeries, lo: f64, hi: f64) -> Option<PlateauStats> {
    let w = series.window(lo, hi);
    let (mean, std) = crate::analysis::mean_std(&w)?;
    Some(PlateauStats { mean, std, samples: w.len(), lo, hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::single_top;
    use crate::spin::SpinRep;

    #[test]
    fn log_grid_shape() {
        let g = log_grid(1_000_000, 60, 512);
        assert_eq!(g[0], 0);
        assert_eq!(*g.last().unwrap(), 1_000_000);
        assert!(g.len() <= 512);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let dense = log_grid(10u64.pow(12), 60, 100);
        assert!(dense.len() <= 100);
        assert_eq!(log_grid(0, 60, 512), vec![0]);
    }

    #[test]
    fn linear_grid_includes_end() {
        assert_eq!(linear_grid(10, 4), vec![0, 4, 8, 10]);
        assert_eq!(linear_grid(8, 4), vec![0, 4, 8]);
    }

    #[test]
    fn config_validation() {
        let good = EchoRunConfig::new(1e-3, InitialState::default(), 100);
        assert!(good.validate().is_ok());
        assert!(good.clone().with_sample_times(vec![0, 5, 5]).validate().is_err());
        assert!(good.clone().with_sample_times(vec![0, 500]).validate().is_err());
        assert!(EchoRunConfig::new(f64::NAN, InitialState::default(), 10).validate().is_err());
    }

    #[test]
    fn zero_delta_gives_unit_fidelity() {
        let m = single_top(SpinRep::new(20.0).unwrap(), 30.0).unwrap();
        let cfg = EchoRunConfig::new(0.0, InitialState::default(), 1000);
        let s = fidelity_series(&m, &cfg).unwrap();
        assert!(s.samples.iter().all(|p| (p.fidelity - 1.0).abs() < 1e-10));
        assert!(s.meta.max_norm_drift.unwrap() < 1e-10);
    }

    #[test]
    fn linear_response_is_exact_at_zero() {
        let m = single_top(SpinRep::new(20.0).unwrap(), 30.0).unwrap();
        let psi = m.prepare_state(&InitialState::default()).unwrap().coeffs;
        assert_eq!(linear_response_fidelity(&m, psi.as_ref(), 1e-3, 0).unwrap().fidelity, 1.0);
    }

    #[test]
    fn variance_is_real_and_nonnegative() {
        let m = single_top(SpinRep::new(20.0).unwrap(), 30.0).unwrap();
        let psi = m.prepare_state(&InitialState::Ris { seed: 4 }).unwrap().coeffs;
        let c = correlation_function(&m, psi.as_ref(), 3, 3, Observable::V).unwrap();
        assert!(c.re >= 0.0 && c.im.abs() < 1e-14);
    }
}
