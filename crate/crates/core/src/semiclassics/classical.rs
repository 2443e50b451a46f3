//! Classical kicked-top maps on the unit sphere and Monte Carlo phase-space averages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FreezeError, Result};
use crate::models::ModelKind;

/// Trajectories per RNG substream. Chunk boundaries do not depend on the
/// number of worker threads, so results are reproducible for a fixed seed.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpherePoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// `theta` polar from +z, `phi` azimuth from +x.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self { x: theta.sin() * phi.cos(), y: theta.sin() * phi.sin(), z: theta.cos() }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self { x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn dot(&self, o: &SpherePoint) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Polar and azimuthal angles, azimuth in `[0, 2π)`.
    pub fn angles(&self) -> (f64, f64) {
        let theta = self.z.clamp(-1.0, 1.0).acos();
        let phi = self.y.atan2(self.x).rem_euclid(std::f64::consts::TAU);
        (theta, phi)
    }

    /// Rotation by `angle` about +z.
    pub fn rotate_z(&mut self, angle: f64) {
        let (s, c) = angle.sin_cos();
        let x = self.x * c - self.y * s;
        self.y = self.x * s + self.y * c;
        self.x = x;
    }

    /// Rotation by `π/2` about +y: `(x, y, z) → (z, y, −x)`.
    pub fn quarter_turn_y(&mut self) {
        let x = self.x;
        self.x = self.z;
        self.z = -x;
    }

    pub fn quarter_turn_y_inverse(&mut self) {
        let z = self.z;
        self.z = self.x;
        self.x = -z;
    }
}

/// Classical limit of a kicked-top propagator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassicalSystem {
    /// Quarter turn about y, then rotation about z by `alpha·z`.
    SingleTop { alpha: f64 },
    /// Quarter turns of both tops, then rotation of each about z by `torsion` times the partner's z.
    CoupledTops { torsion: f64 },
}

impl ClassicalSystem {
    /// Classical limit of a model; the coupled torsion is `εJ`.
    pub fn from_model(kind: &ModelKind, j: Option<f64>) -> Result<Self> {
        match kind {
            ModelKind::Single { alpha } => Ok(Self::SingleTop { alpha: *alpha }),
            ModelKind::Coupled { eps } => {
                let j = j.ok_or_else(|| FreezeError::InvalidConfig("coupled tops need J for the classical torsion".into()))?;
                Ok(Self::CoupledTops { torsion: eps * j })
            }
            ModelKind::Custom { .. } => Err(FreezeError::Unsupported("a classical limit".into())),
        }
    }

    pub fn dof(&self) -> usize {
        match self {
            Self::SingleTop { .. } => 1,
            Self::CoupledTops { .. } => 2,
        }
    }

    pub fn step(&self, p: &mut [SpherePoint]) {
        match *self {
            Self::SingleTop { alpha } => {
                p[0].quarter_turn_y();
                let z = p[0].z;
                p[0].rotate_z(alpha * z);
            }
            Self::CoupledTops { torsion } => {
                p[0].quarter_turn_y();
                p[1].quarter_turn_y();
                let (z1, z2) = (p[0].z, p[1].z);
                p[0].rotate_z(torsion * z2);
                p[1].rotate_z(torsion * z1);
            }
        }
    }

    pub fn step_inverse(&self, p: &mut [SpherePoint]) {
        match *self {
            Self::SingleTop { alpha } => {
                let z = p[0].z;
                p[0].rotate_z(-alpha * z);
                p[0].quarter_turn_y_inverse();
            }
            Self::CoupledTops { torsion } => {
                let (z1, z2) = (p[0].z, p[1].z);
                p[0].rotate_z(-torsion * z2);
                p[1].rotate_z(-torsion * z1);
                p[0].quarter_turn_y_inverse();
                p[1].quarter_turn_y_inverse();
            }
        }
    }

    /// `W_cl = Σ z²/2`.
    pub fn w(&self, p: &[SpherePoint]) -> f64 {
        p[..self.dof()].iter().map(|q| q.z * q.z / 2.0).sum()
    }

    /// `R_cl = −Σ xyz`.
    pub fn r(&self, p: &[SpherePoint]) -> f64 {
        -p[..self.dof()].iter().map(|q| q.x * q.y * q.z).sum::<f64>()
    }

    /// Hamiltonian flow of `W_cl` for time `t`: each top rotates about z by `t·z`.
    pub fn flow_w(&self, p: &mut [SpherePoint], t: f64) {
        for q in &mut p[..self.dof()] {
            let z = q.z;
            q.rotate_z(t * z);
        }
    }

    /// Flow of `V_cl = W_cl∘F − W_cl` for time `t`, symmetric splitting.
    ///
    /// The flow of `W_cl∘F` is `F⁻¹ ∘ φ_W ∘ F`; the splitting error is `O(t³)`.
    pub fn flow_v(&self, p: &mut [SpherePoint], t: f64) {
        self.flow_w(p, -t / 2.0);
        self.step(p);
        self.flow_w(p, t);
        self.step_inverse(p);
        self.flow_w(p, -t / 2.0);
    }

    /// One perturbed step `F ∘ φ_V^δ`, the classical counterpart of `U0 exp(−iVδ/ħ)`.
    pub fn step_perturbed(&self, p: &mut [SpherePoint], delta: f64) {
        if delta != 0.0 {
            self.flow_v(p, delta);
        }
        self.step(p);
    }
}

/// Uniformly distributed point on the sphere.
pub fn sample_uniform<R: Rng>(rng: &mut R) -> SpherePoint {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let rho = (1.0 - z * z).max(0.0).sqrt();
    SpherePoint { x: rho * phi.cos(), y: rho * phi.sin(), z }
}

/// Runs `f(rng, len)` on consecutive chunks of `n` samples with independent substreams.
pub(crate) fn map_chunks<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            f(&mut rng, CHUNK.min(n - c * CHUNK))
        })
        .collect()
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    fn from_sums(sum: f64, sum_sq: f64, n: usize) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        Self { mean, std_error: (var / nf).sqrt(), samples: n }
    }
}

/// Average of `observable` over the uniform measure on `dof` spheres.
pub fn classical_average<F>(observable: F, dof: usize, n_samples: usize, seed: u64) -> Result<Estimate>
where
    F: Fn(&[SpherePoint]) -> f64 + Sync + Send,
{
    if n_samples < 2 || dof == 0 {
        return Err(FreezeError::InvalidConfig("classical average needs at least two samples and one degree of freedom".into()));
    }
    let partial = map_chunks(n_samples, seed, |rng, len| {
        let mut p = vec![SpherePoint::new(0.0, 0.0, 1.0); dof];
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..len {
            for q in p.iter_mut() {
                *q = sample_uniform(rng);
            }
            let v = observable(&p);
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    let (s, s2) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(Estimate::from_sums(s, s2, n_samples))
}

/// Variance of the Birkhoff sum at one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub n: usize,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    /// Half the variance-growth slope over `[n_cut, 2·n_cut]`.
    pub sigma: f64,
    /// Same estimator over `[2·n_cut, 4·n_cut]`.
    pub sigma_late: f64,
    pub converged: bool,
    pub n_cut: usize,
    pub ensemble: usize,
    pub seed: u64,
    pub diagnostics: Vec<VariancePoint>,
}

/// Largest relative disagreement between the two windows accepted as converged.
pub const SIGMA_CONVERGENCE_TOL: f64 = 0.2;

/// Transport rate `σ` of `R_cl`.
pub fn transport_rate_sigma(system: &ClassicalSystem, n_cut: usize, ensemble: usize, seed: u64) -> Result<SigmaEstimate> {
    let sys = *system;
    variance_growth_rate(system, move |p: &[SpherePoint]| sys.r(p), n_cut, ensemble, seed)
}

/// Growth rate `(1/2)·d Var(Σ_n A)/dn` of the Birkhoff sum of `observable`.
pub fn variance_growth_rate<F>(system: &ClassicalSystem, observable: F, n_cut: usize, ensemble: usize, seed: u64) -> Result<SigmaEstimate>
where
    F: Fn(&[SpherePoint]) -> f64 + Sync + Send,
{
    if n_cut < 10 {
        return Err(FreezeError::InvalidConfig(format!("n_cut = {n_cut} is below the minimum of 10")));
    }
    if ensemble < 2 {
        return Err(FreezeError::InvalidConfig("ensemble needs at least two trajectories".into()));
    }
    let n_max = 4 * n_cut;
    let dof = system.dof();
    let partial = map_chunks(ensemble, seed, |rng, len| {
        let mut s1 = vec![0.0; n_max + 1];
        let mut s2 = vec![0.0; n_max + 1];
        let mut p = vec![SpherePoint::new(0.0, 0.0, 1.0); dof];
        for _ in 0..len {
            for q in p.iter_mut() {
                *q = sample_uniform(rng);
            }
            let mut sum = 0.0;
            for n in 1..=n_max {
                sum += observable(&p);
                system.step(&mut p);
                s1[n] += sum;
                s2[n] += sum * sum;
            }
        }
        (s1, s2)
    });
    let mut s1 = vec![0.0; n_max + 1];
    let mut s2 = vec![0.0; n_max + 1];
    for (a, b) in &partial {
        for n in 0..=n_max {
            s1[n] += a[n];
            s2[n] += b[n];
        }
    }
    let m = ensemble as f64;
    let diagnostics: Vec<VariancePoint> = (1..=n_max)
        .map(|n| {
            let mean = s1[n] / m;
            VariancePoint { n, variance: (s2[n] / m - mean * mean).max(0.0) }
        })
        .collect();
    let slope = |lo: usize, hi: usize| -> f64 {
        let (x, y): (Vec<f64>, Vec<f64>) = diagnostics[lo - 1..hi].iter().map(|d| (d.n as f64, d.variance)).unzip();
        crate::analysis::linear_regression(&x, &y).map(|f| f.slope / 2.0).unwrap_or(0.0)
    };
    let sigma = slope(n_cut, 2 * n_cut).max(0.0);
    let sigma_late = slope(2 * n_cut, 4 * n_cut).max(0.0);
    let scale = sigma.abs().max(sigma_late.abs());
    let converged = scale == 0.0 || (sigma - sigma_late).abs() <= SIGMA_CONVERGENCE_TOL * scale;
    if !converged {
        log::warn!("σ estimate not converged: {sigma:.4e} on [{n_cut}, {}] vs {sigma_late:.4e} on [{}, {}]", 2 * n_cut, 2 * n_cut, 4 * n_cut);
    }
    Ok(SigmaEstimate { sigma, sigma_late, converged, n_cut, ensemble, seed, diagnostics })
}

/// Largest Lyapunov exponent from the growth of a small separation, renormalized
/// every step and averaged over `trajectories` uniformly drawn starting points.
pub fn lyapunov_exponent(system: &ClassicalSystem, steps: usize, trajectories: usize, seed: u64) -> Result<Estimate> {
    if steps == 0 || trajectories < 2 {
        return Err(FreezeError::InvalidConfig("Lyapunov estimate needs steps ≥ 1 and at least two trajectories".into()));
    }
    let dof = system.dof();
    let partial = map_chunks(trajectories, seed, |rng, len| {
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..len {
            let mut a: Vec<SpherePoint> = (0..dof).map(|_| sample_uniform(rng)).collect();
            let mut b = a.clone();
            b[0] = SpherePoint::new(b[0].x + SEPARATION, b[0].y + SEPARATION, b[0].z + SEPARATION).normalized();
            let d0 = distance(&a, &b);
            rescale(&a, &mut b, d0);
            let mut log_growth = 0.0;
            for _ in 0..steps {
                system.step(&mut a);
                system.step(&mut b);
                let d = distance(&a, &b);
                log_growth += (d / SEPARATION).ln();
                rescale(&a, &mut b, d);
            }
            let v = log_growth / steps as f64;
            s += v;
            s2 += v * v;
        }
        (s, s2)
    });
    let (s, s2) = partial.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(Estimate::from_sums(s, s2, trajectories))
}

const SEPARATION: f64 = 1e-7;

fn rescale(a: &[SpherePoint], b: &mut [SpherePoint], d: f64) {
    let k = SEPARATION / d;
    for (p, q) in b.iter_mut().zip(a) {
        *p = SpherePoint::new(q.x + (p.x - q.x) * k, q.y + (p.y - q.y) * k, q.z + (p.z - q.z) * k);
    }
}

fn distance(a: &[SpherePoint], b: &[SpherePoint]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_kick_is_a_quarter_turn() {
        let sys = ClassicalSystem::SingleTop { alpha: 0.0 };
        let mut p = [SpherePoint::new(0.0, 0.0, 1.0)];
        sys.step(&mut p);
        assert!((p[0].x - 1.0).abs() < 1e-15 && p[0].y.abs() < 1e-15 && p[0].z.abs() < 1e-15);
    }

    #[test]
    fn inverse_undoes_step() {
        // Rounding errors grow like e^{λn}, so keep n·λ modest.
        for (sys, steps) in [(ClassicalSystem::SingleTop { alpha: 30.0 }, 5), (ClassicalSystem::CoupledTops { torsion: 1000.0 }, 1)] {
            let mut p = [SpherePoint::from_angles(1.0, 1.0), SpherePoint::from_angles(2.0, 0.3)];
            let start = p;
            for _ in 0..steps {
                sys.step(&mut p);
            }
            for _ in 0..steps {
                sys.step_inverse(&mut p);
            }
            for k in 0..sys.dof() {
                assert!((p[k].x - start[k].x).abs() + (p[k].y - start[k].y).abs() + (p[k].z - start[k].z).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn angles_round_trip() {
        let (t, f) = SpherePoint::from_angles(1.0, 1.0).angles();
        assert!((t - 1.0).abs() < 1e-15 && (f - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_observable_has_no_error() {
        let e = classical_average(|_| 1.0, 1, 5000, 3).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn zero_observable_has_zero_rate() {
        let sys = ClassicalSystem::SingleTop { alpha: 30.0 };
        let est = variance_growth_rate(&sys, |_| 0.0, 10, 1000, 1).unwrap();
        assert_eq!(est.sigma, 0.0);
        assert!(est.converged);
        assert!(variance_growth_rate(&sys, |_| 0.0, 5, 1000, 1).is_err());
    }

    #[test]
    fn rotation_has_zero_lyapunov_exponent() {
        let sys = ClassicalSystem::SingleTop { alpha: 0.0 };
        let l = lyapunov_exponent(&sys, 40, 50, 1).unwrap();
        assert!(l.mean.abs() < 1e-3, "{l:?}");
        let chaotic = lyapunov_exponent(&ClassicalSystem::SingleTop { alpha: 30.0 }, 40, 50, 1).unwrap();
        assert!(chaotic.mean > 1.0);
    }

    #[test]
    fn chunking_is_reproducible() {
        let a = classical_average(|p| p[0].z, 1, 10_000, 9).unwrap();
        let b = classical_average(|p| p[0].z, 1, 10_000, 9).unwrap();
        assert_eq!(a, b);
    }
}
