//! Semiclassical predictions: plateau values, crossover times and decay laws.
//!
//! All predictions assume the tops' perturbation generator `W_cl = Σ z²/2`
//! and take the uniform measure on the sphere as the invariant measure of the
//! chaotic classical map.

pub mod classical;
pub mod erf;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{FreezeError, Result};
use crate::models::TopModel;

pub use classical::{
    classical_average, lyapunov_exponent, sample_uniform, transport_rate_sigma, variance_growth_rate, ClassicalSystem, Estimate, SigmaEstimate,
    SpherePoint, VariancePoint,
};

/// Tabulated `σ` for the single top at `α = 30`.
pub const SIGMA_SINGLE_TOP: f64 = 5.1e-3;
/// Tabulated `σ` for the coupled tops at `ε = 20`.
pub const SIGMA_COUPLED_TOPS: f64 = 9.2e-3;

/// `κ²_cl = Var(W_cl)` under the uniform measure: `1/45` per top.
pub fn kappa_cl_sq(degrees_of_freedom: usize) -> f64 {
    degrees_of_freedom as f64 / 45.0
}

/// `G(z) = ⟨exp(−i z z²/2)⟩_cl` for one top.
///
/// Since `z` is uniform on `[−1, 1]`, `G(z) = ∫₀¹ exp(−i z u²/2) du`
/// `= e^{−iπ/4} √(π/2z) erf(e^{iπ/4} √(z/2))`. The Maclaurin form is used for
/// `|z| < 1`, where the closed form suffers from `0/0`.
pub fn generating_function(z: f64) -> c64 {
    if z < 0.0 {
        return generating_function(-z).conj();
    }
    if z < 1.0 {
        // Σ (−iz/2)ⁿ / (n! (2n+1))
        let a = c64::new(0.0, -z / 2.0);
        let mut power = c64::new(1.0, 0.0);
        let mut sum = power;
        for n in 1..60 {
            power = power * a / n as f64;
            let term = power / (2 * n + 1) as f64;
            sum += term;
            if term.norm() < 1e-18 {
                break;
            }
        }
        return sum;
    }
    let arg = c64::from_polar((z / 2.0).sqrt(), std::f64::consts::FRAC_PI_4);
    c64::from_polar((std::f64::consts::PI / (2.0 * z)).sqrt(), -std::f64::consts::FRAC_PI_4) * erf::erf(arg)
}

/// `G` for `d` independent tops, `G(z)^d`.
pub fn generating_function_tops(z: f64, degrees_of_freedom: usize) -> c64 {
    generating_function(z).powi(degrees_of_freedom as i32)
}

/// Monte Carlo estimate of `⟨exp(−i z W_cl)⟩` for an arbitrary observable, with
/// standard errors of the real and imaginary parts.
pub fn generating_function_mc<F>(w_cl: F, dof: usize, z: f64, n_samples: usize, seed: u64) -> Result<(c64, c64)>
where
    F: Fn(&[SpherePoint]) -> f64 + Sync + Send,
{
    let re = classical_average(|p| (z * w_cl(p)).cos(), dof, n_samples, seed)?;
    let im = classical_average(|p| -(z * w_cl(p)).sin(), dof, n_samples, seed)?;
    Ok((c64::new(re.mean, im.mean), c64::new(re.std_error, im.std_error)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Cis,
    Ris,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlateauOrder {
    /// Second order in `δ/ħ`.
    Linear,
    /// Generating-function form.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauPrediction {
    pub value: f64,
    pub warning: Option<String>,
}

/// Plateau of the fidelity for perturbation strength `δ` and `ħ`.
///
/// Linear: `1 − (δ/ħ)²κ²_cl` (CIS), `1 − 2(δ/ħ)²κ²_cl` (RIS).
/// Exact: `|G(δ/ħ)|²` (CIS), `|G(δ/ħ)|⁴` (RIS), with `G` for all tops.
pub fn plateau_prediction(kind: StateKind, delta: f64, hbar: f64, degrees_of_freedom: usize, order: PlateauOrder) -> PlateauPrediction {
    let z = delta / hbar;
    match order {
        PlateauOrder::Linear => {
            let factor = match kind {
                StateKind::Cis => 1.0,
                StateKind::Ris => 2.0,
            };
            let raw = 1.0 - factor * z * z * kappa_cl_sq(degrees_of_freedom);
            let warning = (1.0 - raw > 0.5).then(|| {
                format!("linear-response plateau {raw:.3} is outside its validity range (1 − F > 0.5); use the exact order")
            });
            PlateauPrediction { value: raw.clamp(0.0, 1.0), warning }
        }
        PlateauOrder::Exact => {
            let g2 = generating_function_tops(z, degrees_of_freedom).norm_sqr();
            let value = match kind {
                StateKind::Cis => g2,
                StateKind::Ris => g2 * g2,
            };
            PlateauPrediction { value: value.min(1.0), warning: None }
        }
    }
}

/// Stationary-phase magnitude `|π/2z|^{N/2} |det ∂²W|^{−1/2}`; no diffraction oscillations.
pub fn stationary_phase_g(z: f64, n: usize, hessian_det: f64) -> f64 {
    (std::f64::consts::PI / (2.0 * z.abs())).powf(n as f64 / 2.0) / hessian_det.abs().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayRegime {
    Exponential,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum T2Branch {
    /// `√(t_H/σ)·κ_cl/δ`
    InverseLinear,
    /// `κ²_cl/(σδ²)`
    InverseQuadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timescales {
    pub t2: f64,
    pub t2_inverse_linear: f64,
    pub t2_inverse_quadratic: f64,
    pub branch: T2Branch,
    pub t_h: f64,
    pub regime: DecayRegime,
}

/// Heisenberg time `N/(2s)` in kicks.
pub fn heisenberg_time(subspace_dim: usize, symmetry_classes: usize) -> f64 {
    subspace_dim as f64 / (2.0 * symmetry_classes.max(1) as f64)
}

/// Crossover time `t₂`, Heisenberg time and decay regime.
pub fn timescales(kappa_cl_sq: f64, sigma: f64, t_h: f64, delta: f64) -> Timescales {
    let kappa = kappa_cl_sq.sqrt();
    let d = delta.abs();
    let t2_inverse_linear = (t_h / sigma).sqrt() * kappa / d;
    let t2_inverse_quadratic = kappa_cl_sq / (sigma * d * d);
    let (t2, branch) = if t2_inverse_linear <= t2_inverse_quadratic {
        (t2_inverse_linear, T2Branch::InverseLinear)
    } else {
        (t2_inverse_quadratic, T2Branch::InverseQuadratic)
    };
    let regime = if t2 < t_h { DecayRegime::Exponential } else { DecayRegime::Gaussian };
    Timescales { t2, t2_inverse_linear, t2_inverse_quadratic, branch, t_h, regime }
}

/// Perturbation strength at which `t₂ = t_H`; both branches of `t₂` cross there,
/// so `|δ| > δ*` is the exponential regime.
pub fn crossover_delta(kappa_cl_sq: f64, sigma: f64, t_h: f64) -> f64 {
    (kappa_cl_sq / (sigma * t_h)).sqrt()
}

/// Exponential decay rate `δ⁴σ/2ħ²` per kick.
pub fn exponential_rate(delta: f64, hbar: f64, sigma: f64) -> f64 {
    delta.powi(4) * sigma / (2.0 * hbar * hbar)
}

/// Gaussian decay rate `δ⁴σ/(2ħ²t_H)` per kick².
pub fn gaussian_rate(delta: f64, hbar: f64, sigma: f64, t_h: f64) -> f64 {
    exponential_rate(delta, hbar, sigma) / t_h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub fidelity: f64,
    pub law: DecayRegime,
    /// `false` before `t₂`, where the plateau rather than the decay law applies.
    pub valid: bool,
}

/// Long-time fidelity: exponential law for `n < t_H`, Gaussian law beyond.
pub fn decay_prediction(n: f64, f_plat: f64, delta: f64, hbar: f64, sigma: f64, scales: &Timescales) -> DecayPoint {
    let (exponent, law) = if n < scales.t_h {
        (exponential_rate(delta, hbar, sigma) * n, DecayRegime::Exponential)
    } else {
        (gaussian_rate(delta, hbar, sigma, scales.t_h) * n * n, DecayRegime::Gaussian)
    };
    DecayPoint { fidelity: f_plat * (-exponent).exp(), law, valid: n >= scales.t2 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSource {
    Tabulated,
    MonteCarlo,
    User,
}

/// Everything predicted for one model and perturbation strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub delta: f64,
    pub delta_r: f64,
    pub hbar: f64,
    pub degrees_of_freedom: usize,
    pub subspace_dim: usize,
    pub symmetry_classes: usize,
    pub kappa_cl_sq: f64,
    pub sigma: f64,
    pub sigma_source: SigmaSource,
    pub g_re: f64,
    pub g_im: f64,
    pub f_plat_cis: f64,
    pub f_plat_ris: f64,
    pub f_plat_cis_linear: f64,
    pub f_plat_ris_linear: f64,
    pub t2: f64,
    pub t2_branch: T2Branch,
    pub t_h: f64,
    pub decay_regime: DecayRegime,
    pub exponential_rate: f64,
    pub gaussian_rate: f64,
    pub warnings: Vec<String>,
}

impl PredictionSet {
    /// Predictions for a kicked-top model; `sigma` falls back to the tabulated value for
    /// the model family when `None`.
    pub fn for_model(model: &TopModel, delta: f64, sigma: Option<f64>) -> Result<Self> {
        let dof = model.degrees_of_freedom();
        let (sigma, sigma_source) = match (sigma, model.kind()) {
            (Some(s), _) => (s, SigmaSource::User),
            (None, crate::models::ModelKind::Single { .. }) => (SIGMA_SINGLE_TOP, SigmaSource::Tabulated),
            (None, crate::models::ModelKind::Coupled { .. }) => (SIGMA_COUPLED_TOPS, SigmaSource::Tabulated),
            (None, crate::models::ModelKind::Custom { .. }) => return Err(FreezeError::Unsupported("a tabulated σ".into())),
        };
        Self::build(delta, model.hbar(), dof, model.dim(), model.subspace().symmetry_classes(), sigma, sigma_source)
    }

    pub fn build(
        delta: f64,
        hbar: f64,
        degrees_of_freedom: usize,
        subspace_dim: usize,
        symmetry_classes: usize,
        sigma: f64,
        sigma_source: SigmaSource,
    ) -> Result<Self> {
        if !(sigma >= 0.0) || !delta.is_finite() || !(hbar > 0.0) {
            return Err(FreezeError::InvalidConfig(format!("bad prediction inputs: σ = {sigma}, δ = {delta}, ħ = {hbar}")));
        }
        let kappa = kappa_cl_sq(degrees_of_freedom);
        let g = generating_function_tops(delta / hbar, degrees_of_freedom);
        let t_h = heisenberg_time(subspace_dim, symmetry_classes);
        let scales = timescales(kappa, sigma, t_h, delta);
        let plat = |kind, order| plateau_prediction(kind, delta, hbar, degrees_of_freedom, order);
        let lin_cis = plat(StateKind::Cis, PlateauOrder::Linear);
        let lin_ris = plat(StateKind::Ris, PlateauOrder::Linear);
        let warnings = [lin_cis.warning.clone(), lin_ris.warning.clone()].into_iter().flatten().collect();
        Ok(Self {
            delta,
            delta_r: delta * delta / 2.0,
            hbar,
            degrees_of_freedom,
            subspace_dim,
            symmetry_classes,
            kappa_cl_sq: kappa,
            sigma,
            sigma_source,
            g_re: g.re,
            g_im: g.im,
            f_plat_cis: plat(StateKind::Cis, PlateauOrder::Exact).value,
            f_plat_ris: plat(StateKind::Ris, PlateauOrder::Exact).value,
            f_plat_cis_linear: lin_cis.value,
            f_plat_ris_linear: lin_ris.value,
            t2: scales.t2,
            t2_branch: scales.branch,
            t_h,
            decay_regime: scales.regime,
            exponential_rate: exponential_rate(delta, hbar, sigma),
            gaussian_rate: gaussian_rate(delta, hbar, sigma, t_h),
            warnings,
        })
    }

    pub fn timescales(&self) -> Timescales {
        timescales(self.kappa_cl_sq, self.sigma, self.t_h, self.delta)
    }

    pub fn plateau(&self, kind: StateKind) -> f64 {
        match kind {
            StateKind::Cis => self.f_plat_cis,
            StateKind::Ris => self.f_plat_ris,
        }
    }

    pub fn decay(&self, n: f64, kind: StateKind) -> DecayPoint {
        decay_prediction(n, self.plateau(kind), self.delta, self.hbar, self.sigma, &self.timescales())
    }
}
