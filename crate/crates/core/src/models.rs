//! Single and coupled kicked tops restricted to their invariant subspaces.

use std::sync::OnceLock;

use faer::{c64, Col, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{FreezeError, Result};
use crate::linalg::{self, HermitianSpectrum, UnitarySpectrum, I};
use crate::spin::{coherent_state, kron_state, random_state, SpinRep, StateLabel, YRotation};
use crate::subspace::{subspace_oe, symmetric_coupled_subspace, SparseVector, SubspaceBasis};

/// Default largest subspace dimension handled with dense eigendecompositions.
pub const DEFAULT_DIMENSION_CAP: usize = 12_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// `U0 = exp(−iαJz²/2J) exp(−iπJy/2)`, `W = Jz²/2J²`.
    Single { alpha: f64 },
    /// `U0 = exp(−iεJz1Jz2) exp(−iπJy1/2) exp(−iπJy2/2)`, `W = (Jz1² + Jz2²)/2J²`.
    Coupled { eps: f64 },
    /// Operators supplied directly.
    Custom { label: String },
}

/// Serializable summary of a model, written into run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub j: Option<f64>,
    pub hbar: f64,
    pub degrees_of_freedom: usize,
    pub subspace_dim: usize,
    pub full_dim: usize,
    pub symmetry_classes: usize,
    pub invariance_residual: f64,
}

/// Initial state of an echo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    /// Coherent state (product of identical ones for two tops), projected and renormalized.
    Cis { theta: f64, phi: f64 },
    /// Gaussian random coefficients drawn directly in the subspace.
    Ris { seed: u64 },
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Cis { theta: 1.0, phi: 1.0 }
    }
}

/// An initial state in subspace coordinates.
#[derive(Debug, Clone)]
pub struct PreparedState {
    pub coeffs: Col<c64>,
    pub label: StateLabel,
    /// Norm of the full-space state's projection before renormalization.
    pub projected_norm: f64,
}

#[derive(Debug)]
pub struct TopModel {
    kind: ModelKind,
    rep: Option<SpinRep>,
    degrees_of_freedom: usize,
    hbar: f64,
    subspace: SubspaceBasis,
    invariance_residual: f64,
    u0: Mat<c64>,
    w: Mat<c64>,
    v: Mat<c64>,
    r: Mat<c64>,
    u0_spectrum: OnceLock<UnitarySpectrum>,
    v_spectrum: OnceLock<HermitianSpectrum>,
    r_spectrum: OnceLock<HermitianSpectrum>,
}

/// `V = U0† W U0 − W`.
pub fn residual_perturbation(u0: MatRef<'_, c64>, w: MatRef<'_, c64>) -> Mat<c64> {
    let w1 = linalg::conjugate_by(u0, w);
    linalg::hermitian_part(linalg::sub(w1.as_ref(), w).as_ref())
}

/// `R = (i/ħ)[W, U0† W U0]`.
pub fn renormalized_operator(u0: MatRef<'_, c64>, w: MatRef<'_, c64>, hbar: f64) -> Mat<c64> {
    let w1 = linalg::conjugate_by(u0, w);
    let c = linalg::commutator(w, w1.as_ref());
    linalg::hermitian_part(linalg::scale(c.as_ref(), I / hbar).as_ref())
}

fn check_cap(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        Err(FreezeError::DimensionCap { dim, cap })
    } else {
        Ok(())
    }
}

fn jz_squared_generator(rep: SpinRep) -> Vec<f64> {
    let j = rep.j();
    rep.m_values().map(|m| m * m / (2.0 * j * j)).collect()
}

/// Single kicked top on the odd sector.
pub fn single_top(rep: SpinRep, alpha: f64) -> Result<TopModel> {
    single_top_capped(rep, alpha, DEFAULT_DIMENSION_CAP)
}

pub fn single_top_capped(rep: SpinRep, alpha: f64, cap: usize) -> Result<TopModel> {
    if !alpha.is_finite() {
        return Err(FreezeError::InvalidConfig(format!("kick strength α = {alpha} is not finite")));
    }
    let subspace = subspace_oe(rep)?;
    check_cap(subspace.dim(), cap)?;
    let d = rep.dim();
    let j = rep.j();
    let rot = YRotation::new(rep)?.real_matrix(std::f64::consts::FRAC_PI_2);
    let kick: Vec<c64> = rep.m_values().map(|m| c64::from_polar(1.0, -alpha * m * m / (2.0 * j))).collect();
    let (u0, residual) = subspace.restrict_operator(|e: &SparseVector| {
        let mut out = Col::<c64>::zeros(d);
        for &(col, v) in e.entries() {
            for i in 0..d {
                out[i] += c64::new(rot[(i, col)] * v, 0.0);
            }
        }
        for i in 0..d {
            out[i] *= kick[i];
        }
        out
    });
    let w_diag: Vec<c64> = jz_squared_generator(rep).into_iter().map(|x| c64::new(x, 0.0)).collect();
    let (w, w_residual) = subspace.restrict_diagonal(&w_diag);
    TopModel::assemble(ModelKind::Single { alpha }, Some(rep), 1, rep.hbar(), subspace, residual.max(w_residual), u0, w)
}

/// Two tops coupled by `εJz1Jz2`, on the exchange-symmetric sector.
pub fn coupled_tops(rep: SpinRep, eps: f64) -> Result<TopModel> {
    coupled_tops_capped(rep, eps, DEFAULT_DIMENSION_CAP)
}

pub fn coupled_tops_capped(rep: SpinRep, eps: f64, cap: usize) -> Result<TopModel> {
    if !eps.is_finite() {
        return Err(FreezeError::InvalidConfig(format!("coupling ε = {eps} is not finite")));
    }
    // Check the cap before allocating the basis.
    if let Some(j) = rep.even_integer_j() {
        check_cap((j as usize) * (j as usize + 1), cap)?;
    }
    let subspace = symmetric_coupled_subspace(rep)?;
    let d = rep.dim();
    let rot = YRotation::new(rep)?.real_matrix(std::f64::consts::FRAC_PI_2);
    let m: Vec<f64> = rep.m_values().collect();
    let (u0, residual) = subspace.restrict_operator(|e: &SparseVector| {
        let mut out = Col::<c64>::zeros(d * d);
        for &(idx, v) in e.entries() {
            let (c1, c2) = (idx / d, idx % d);
            for i1 in 0..d {
                let a = rot[(i1, c1)] * v;
                if a == 0.0 {
                    continue;
                }
                for i2 in 0..d {
                    out[i1 * d + i2].re += a * rot[(i2, c2)];
                }
            }
        }
        for i1 in 0..d {
            for i2 in 0..d {
                out[i1 * d + i2] *= c64::from_polar(1.0, -eps * m[i1] * m[i2]);
            }
        }
        out
    });
    let a = jz_squared_generator(rep);
    let w_diag: Vec<c64> = (0..d * d).map(|k| c64::new(a[k / d] + a[k % d], 0.0)).collect();
    let (w, w_residual) = subspace.restrict_diagonal(&w_diag);
    TopModel::assemble(ModelKind::Coupled { eps }, Some(rep), 2, rep.hbar(), subspace, residual.max(w_residual), u0, w)
}

impl TopModel {
    /// Model from explicit operators on the whole space.
    pub fn from_operators(label: impl Into<String>, u0: Mat<c64>, w: Mat<c64>, hbar: f64) -> Result<Self> {
        let n = u0.nrows();
        if u0.ncols() != n || w.nrows() != n || w.ncols() != n {
            return Err(FreezeError::InvalidConfig("U0 and W must be square of equal size".into()));
        }
        if !(hbar > 0.0) {
            return Err(FreezeError::InvalidConfig(format!("ħ = {hbar} must be positive")));
        }
        let defect = linalg::unitarity_defect(u0.as_ref());
        if defect > 1e-10 {
            return Err(FreezeError::InvalidConfig(format!("U0 is not unitary (defect {defect:.2e})")));
        }
        let dof = 1;
        Self::assemble(ModelKind::Custom { label: label.into() }, None, dof, hbar, SubspaceBasis::full(n), 0.0, u0, w)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        kind: ModelKind,
        rep: Option<SpinRep>,
        degrees_of_freedom: usize,
        hbar: f64,
        subspace: SubspaceBasis,
        invariance_residual: f64,
        u0: Mat<c64>,
        w: Mat<c64>,
    ) -> Result<Self> {
        let w = linalg::hermitian_part(w.as_ref());
        let v = residual_perturbation(u0.as_ref(), w.as_ref());
        let r = renormalized_operator(u0.as_ref(), w.as_ref(), hbar);
        log::debug!("built {kind:?}: N = {}, invariance residual {invariance_residual:.2e}", subspace.dim());
        Ok(Self {
            kind,
            rep,
            degrees_of_freedom,
            hbar,
            subspace,
            invariance_residual,
            u0,
            w,
            v,
            r,
            u0_spectrum: OnceLock::new(),
            v_spectrum: OnceLock::new(),
            r_spectrum: OnceLock::new(),
        })
    }

    /// Override the number of symmetry classes `s` entering `t_H = N/2s`.
    pub fn with_symmetry_classes(mut self, s: usize) -> Self {
        self.subspace = self.subspace.with_symmetry_classes(s);
        self
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn rep(&self) -> Option<SpinRep> {
        self.rep
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn degrees_of_freedom(&self) -> usize {
        self.degrees_of_freedom
    }

    /// Subspace dimension `N`.
    pub fn dim(&self) -> usize {
        self.u0.nrows()
    }

    pub fn subspace(&self) -> &SubspaceBasis {
        &self.subspace
    }

    /// Largest `‖(1 − P)Ae‖` seen while restricting `U0` and `W`.
    pub fn invariance_residual(&self) -> f64 {
        self.invariance_residual
    }

    pub fn u0(&self) -> MatRef<'_, c64> {
        self.u0.as_ref()
    }

    pub fn w(&self) -> MatRef<'_, c64> {
        self.w.as_ref()
    }

    pub fn v(&self) -> MatRef<'_, c64> {
        self.v.as_ref()
    }

    pub fn r(&self) -> MatRef<'_, c64> {
        self.r.as_ref()
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            kind: self.kind.clone(),
            j: self.rep.map(|r| r.j()),
            hbar: self.hbar,
            degrees_of_freedom: self.degrees_of_freedom,
            subspace_dim: self.dim(),
            full_dim: self.subspace.full_dim(),
            symmetry_classes: self.subspace.symmetry_classes(),
            invariance_residual: self.invariance_residual,
        }
    }

    pub fn u0_spectrum(&self) -> Result<&UnitarySpectrum> {
        cached(&self.u0_spectrum, || UnitarySpectrum::new(self.u0.as_ref()))
    }

    pub fn v_spectrum(&self) -> Result<&HermitianSpectrum> {
        cached(&self.v_spectrum, || HermitianSpectrum::new(self.v.as_ref()))
    }

    pub fn r_spectrum(&self) -> Result<&HermitianSpectrum> {
        cached(&self.r_spectrum, || HermitianSpectrum::new(self.r.as_ref()))
    }

    /// `U_δ = U0 exp(−iVδ/ħ)`; exactly `U0` for `δ = 0`.
    pub fn perturbed_propagator(&self, delta: f64) -> Result<Mat<c64>> {
        if !delta.is_finite() {
            return Err(FreezeError::InvalidConfig(format!("δ = {delta} is not finite")));
        }
        if delta == 0.0 {
            return Ok(self.u0.clone());
        }
        let kick = self.v_spectrum()?.unitary_exponential(delta / self.hbar);
        Ok(&self.u0 * &kick)
    }

    /// `U0 exp(−iRδ_R/ħ)` with `δ_R = δ²/2`.
    pub fn renormalized_propagator(&self, delta: f64) -> Result<Mat<c64>> {
        if !delta.is_finite() {
            return Err(FreezeError::InvalidConfig(format!("δ = {delta} is not finite")));
        }
        let delta_r = delta * delta / 2.0;
        if delta_r == 0.0 {
            return Ok(self.u0.clone());
        }
        let kick = self.r_spectrum()?.unitary_exponential(delta_r / self.hbar);
        Ok(&self.u0 * &kick)
    }

    /// Initial state in subspace coordinates, normalized.
    pub fn prepare_state(&self, initial: &InitialState) -> Result<PreparedState> {
        match *initial {
            InitialState::Ris { seed } => {
                let s = random_state(self.dim(), seed)?;
                Ok(PreparedState { coeffs: s.amplitudes, label: s.label, projected_norm: 1.0 })
            }
            InitialState::Cis { theta, phi } => {
                let rep = self.rep.ok_or_else(|| FreezeError::Unsupported("a coherent initial state".into()))?;
                let single = coherent_state(rep, theta, phi)?;
                let (full, label) = match self.degrees_of_freedom {
                    1 => (single.amplitudes, single.label),
                    _ => (kron_state(&single.amplitudes, &single.amplitudes), StateLabel::CoherentPair { theta, phi }),
                };
                let mut coeffs = self.subspace.project(full.as_ref());
                let projected_norm = linalg::norm(coeffs.as_ref());
                if projected_norm < 1e-8 {
                    return Err(FreezeError::InvalidConfig(format!(
                        "coherent state at (θ, φ) = ({theta}, {phi}) has no weight in the invariant subspace"
                    )));
                }
                for k in 0..coeffs.nrows() {
                    coeffs[k] /= projected_norm;
                }
                Ok(PreparedState { coeffs, label, projected_norm })
            }
        }
    }

    /// Full-space operator `A` restricted to the model subspace, for diagonal `A`.
    pub fn restrict_full_diagonal(&self, diag: &[c64]) -> Result<Mat<c64>> {
        if diag.len() != self.subspace.full_dim() {
            return Err(FreezeError::InvalidConfig("diagonal length differs from the full dimension".into()));
        }
        Ok(self.subspace.restrict_diagonal(diag).0)
    }
}

fn cached<T, F>(cell: &OnceLock<T>, init: F) -> Result<&T>
where
    F: FnOnce() -> Result<T>,
{
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let value = init()?;
    Ok(cell.get_or_init(|| value))
}
