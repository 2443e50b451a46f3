//! Angular-momentum representations, y-axis rotations and initial states.
//!
//! Basis ordering follows the `Jz` eigenvalues `m = J, J−1, …, −J`, so index
//! `i` holds `m = J − i`.

use faer::{c64, Col, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FreezeError, Result};
use crate::linalg::{ONE, ZERO};

/// Spin representation of magnitude `J` (integer or half-integer), stored as `2J`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinRep {
    twice_j: u32,
}

impl SpinRep {
    pub fn new(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !twice.is_finite() || twice < 1.0 || (twice - twice.round()).abs() > 1e-9 {
            return Err(FreezeError::InvalidSpin(format!("J = {j} must be a positive multiple of 1/2")));
        }
        Self::from_twice_j(twice.round() as u32)
    }

    pub fn from_twice_j(twice_j: u32) -> Result<Self> {
        if twice_j == 0 {
            return Err(FreezeError::InvalidSpin("J = 0 gives a one-dimensional space".into()));
        }
        Ok(Self { twice_j })
    }

    pub fn twice_j(&self) -> u32 {
        self.twice_j
    }

    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.twice_j as usize + 1
    }

    /// Effective Planck constant `ħ = 1/J`.
    pub fn hbar(&self) -> f64 {
        1.0 / self.j()
    }

    /// `Jz` eigenvalue stored at basis index `i`.
    pub fn m(&self, i: usize) -> f64 {
        self.j() - i as f64
    }

    /// Basis index of the `Jz` eigenvalue `m`, if it belongs to the representation.
    pub fn index_of(&self, m: f64) -> Option<usize> {
        let i = self.j() - m;
        if i < -1e-9 || i > self.twice_j as f64 + 1e-9 || (i - i.round()).abs() > 1e-9 {
            None
        } else {
            Some(i.round() as usize)
        }
    }

    /// `J` as an integer when `J` is an even integer.
    pub fn even_integer_j(&self) -> Option<u32> {
        (self.twice_j % 4 == 0).then_some(self.twice_j / 2)
    }

    pub fn m_values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim()).map(|i| self.m(i))
    }
}

/// Dense `Jx, Jy, Jz` in the standard (Condon–Shortley) phase convention.
#[derive(Debug, Clone)]
pub struct AngularMomentum {
    pub jx: Mat<c64>,
    pub jy: Mat<c64>,
    pub jz: Mat<c64>,
}

/// `⟨m+1|J₊|m⟩ = √(J(J+1) − m(m+1))`.
fn raising_element(j: f64, m: f64) -> f64 {
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

pub fn build_angular_momentum(rep: SpinRep) -> AngularMomentum {
    let n = rep.dim();
    let j = rep.j();
    let mut jx = Mat::<c64>::zeros(n, n);
    let mut jy = Mat::<c64>::zeros(n, n);
    let mut jz = Mat::<c64>::zeros(n, n);
    for i in 0..n {
        jz[(i, i)] = c64::new(rep.m(i), 0.0);
    }
    // J₊ maps index i+1 (m) to index i (m+1).
    for i in 0..n - 1 {
        let a = raising_element(j, rep.m(i + 1));
        jx[(i, i + 1)] = c64::new(a / 2.0, 0.0);
        jx[(i + 1, i)] = c64::new(a / 2.0, 0.0);
        // Jy = (J₊ − J₋)/2i
        jy[(i, i + 1)] = c64::new(0.0, -a / 2.0);
        jy[(i + 1, i)] = c64::new(0.0, a / 2.0);
    }
    AngularMomentum { jx, jy, jz }
}

/// Rotations `exp(−iθJy)` for one representation.
///
/// `Jy = S Jx S†` with `S = exp(−iπJz/2)`, and `Jx` is real symmetric
/// tridiagonal, so a single real eigendecomposition serves every angle. The
/// resulting Wigner small-d matrix is real.
#[derive(Debug, Clone)]
pub struct YRotation {
    rep: SpinRep,
    eigenvalues: Vec<f64>,
    vectors: Mat<f64>,
}

impl YRotation {
    pub fn new(rep: SpinRep) -> Result<Self> {
        let n = rep.dim();
        let j = rep.j();
        let mut jx = Mat::<f64>::zeros(n, n);
        for i in 0..n - 1 {
            let a = raising_element(j, rep.m(i + 1)) / 2.0;
            jx[(i, i + 1)] = a;
            jx[(i + 1, i)] = a;
        }
        let evd = jx
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| FreezeError::Eigen(format!("Jx eigendecomposition: {e:?}")))?;
        // The spectrum of Jx is exactly {−J, …, J}; snap away the rounding.
        let eigenvalues = evd
            .S()
            .column_vector()
            .iter()
            .map(|&v| {
                let snapped = (v - j).round() + j;
                if (snapped - v).abs() < 1e-6 { snapped } else { v }
            })
            .collect();
        Ok(Self { rep, eigenvalues, vectors: evd.U().to_owned() })
    }

    pub fn rep(&self) -> SpinRep {
        self.rep
    }

    /// Real Wigner matrix `d^J(θ)`, indices ordered as the `Jz` basis.
    pub fn real_matrix(&self, angle: f64) -> Mat<f64> {
        let q = self.vectors.as_ref();
        let n = self.rep.dim();
        let qc = Mat::from_fn(n, n, |i, k| q[(i, k)] * (angle * self.eigenvalues[k]).cos());
        let qs = Mat::from_fn(n, n, |i, k| q[(i, k)] * (angle * self.eigenvalues[k]).sin());
        let c = &qc * q.transpose();
        let s = &qs * q.transpose();
        // exp(−iθJx) = C − iS, and conjugation by S multiplies entry (a, b)
        // by e^{−iπ(m_a − m_b)/2} = e^{iπ(a − b)/2}.
        Mat::from_fn(n, n, |a, b| {
            let k = (a as i64 - b as i64).rem_euclid(4);
            match k {
                0 => c[(a, b)],
                1 => s[(a, b)],
                2 => -c[(a, b)],
                _ => -s[(a, b)],
            }
        })
    }

    pub fn matrix(&self, angle: f64) -> Mat<c64> {
        let d = self.real_matrix(angle);
        Mat::from_fn(d.nrows(), d.ncols(), |i, j| c64::new(d[(i, j)], 0.0))
    }
}

/// `exp(−i·angle·Jy)` as a dense unitary.
pub fn rotation_y(rep: SpinRep, angle: f64) -> Result<Mat<c64>> {
    Ok(YRotation::new(rep)?.matrix(angle))
}

/// Provenance of a state vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateLabel {
    /// SU(2) coherent state; `theta` is the polar angle from +z, `phi` the azimuth from +x.
    Coherent { theta: f64, phi: f64 },
    /// Normalized vector of i.i.d. complex Gaussian amplitudes.
    Random { seed: u64 },
    /// Tensor product of two identical coherent states.
    CoherentPair { theta: f64, phi: f64 },
}

/// Normalized state with its provenance.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub amplitudes: Col<c64>,
    pub label: StateLabel,
}

impl StateVector {
    pub fn dim(&self) -> usize {
        self.amplitudes.nrows()
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(self.amplitudes.as_ref())
    }
}

/// `ln n!` for `n = 0..=max`.
fn ln_factorials(max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=max {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `x^k` in log space, with `0^0 = 1`.
fn ln_pow(x: f64, k: u32) -> f64 {
    if k == 0 {
        0.0
    } else if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        k as f64 * x.ln()
    }
}

/// SU(2) coherent state `|θ, φ⟩ = e^{−iφJz} e^{−iθJy} |J, J⟩`.
///
/// Amplitudes `c_m = √C(2J, J+m) cos^{J+m}(θ/2) sin^{J−m}(θ/2) e^{−imφ}`,
/// evaluated in log space so that `J` in the thousands does not underflow.
pub fn coherent_state(rep: SpinRep, theta: f64, phi: f64) -> Result<StateVector> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) || !phi.is_finite() {
        return Err(FreezeError::InvalidConfig(format!("coherent state needs 0 ≤ θ ≤ π and finite φ, got ({theta}, {phi})")));
    }
    let n = rep.dim();
    let two_j = rep.twice_j() as usize;
    let lf = ln_factorials(two_j);
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut amps = Col::<c64>::zeros(n);
    for i in 0..n {
        // i = J − m, so J + m = 2J − i.
        let up = (two_j - i) as u32;
        let down = i as u32;
        let ln_binom = 0.5 * (lf[two_j] - lf[up as usize] - lf[down as usize]);
        let ln_mag = ln_binom + ln_pow(c, up) + ln_pow(s, down);
        if ln_mag.is_finite() {
            amps[i] = c64::from_polar(ln_mag.exp(), -rep.m(i) * phi);
        }
    }
    let nrm = crate::linalg::norm(amps.as_ref());
    for i in 0..n {
        amps[i] /= nrm;
    }
    Ok(StateVector { amplitudes: amps, label: StateLabel::Coherent { theta, phi } })
}

/// Normalized vector of i.i.d. complex Gaussian amplitudes from a ChaCha8 stream.
pub fn random_state(dim: usize, seed: u64) -> Result<StateVector> {
    if dim == 0 {
        return Err(FreezeError::InvalidConfig("random state needs dim ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<c64> = (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            c64::new(re, im)
        })
        .collect();
    let nrm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let amplitudes = Col::from_fn(dim, |i| raw[i] / nrm);
    Ok(StateVector { amplitudes, label: StateLabel::Random { seed } })
}

/// Kronecker product `a ⊗ b` of two vectors, first factor slowest.
pub fn kron_state(a: &Col<c64>, b: &Col<c64>) -> Col<c64> {
    let nb = b.nrows();
    Col::from_fn(a.nrows() * nb, |k| a[k / nb] * b[k % nb])
}

/// Basis vector `|m⟩`.
pub fn basis_state(rep: SpinRep, m: f64) -> Result<Col<c64>> {
    let idx = rep
        .index_of(m)
        .ok_or_else(|| FreezeError::InvalidConfig(format!("m = {m} is not in the J = {} multiplet", rep.j())))?;
    Ok(Col::from_fn(rep.dim(), |i| if i == idx { ONE } else { ZERO }))
}
