//! Classical fidelity: overlap of an echoed phase-space density with the initial one.
//!
//! Each ensemble point is propagated `n` steps with the perturbed map and then
//! `n` steps back with the unperturbed inverse. The fidelity is the normalized
//! overlap `∫ρ_echo ρ_0 / (∫ρ_echo² ∫ρ_0²)^{1/2}`, estimated either by
//! histograms on an equal-area grid or, for Gaussian patches, by averaging the
//! initial density over the echoed points. Area preservation makes the two
//! norms equal, so for a Gaussian `ρ_0` of width `s` the second estimator is
//! `2⟨exp(−r²/2s²)⟩` with `r` the tangent-plane distance from the patch center.
//!
//! Backward iteration amplifies rounding like `e^{λn}`; by the time this
//! matters the echo has already decayed, so no correction is attempted.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::mean_std;
use crate::echo::{EchoMode, FidelitySample, FidelitySeries, SeriesMeta};
use crate::error::{FreezeError, Result};
use crate::semiclassics::classical::map_chunks;
use crate::semiclassics::{ClassicalSystem, SpherePoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleProvenance {
    GaussianPatch { theta: f64, phi: f64, width: f64 },
    Uniform,
}

#[derive(Debug, Clone)]
pub struct ClassicalEnsemble {
    pub points: Vec<SpherePoint>,
    pub provenance: EnsembleProvenance,
    pub seed: u64,
}

/// Isotropic Gaussian of standard deviation `width` on the tangent plane at
/// `(theta, phi)`, projected radially onto the sphere.
pub fn gaussian_patch_ensemble(theta: f64, phi: f64, width: f64, count: usize, seed: u64) -> Result<ClassicalEnsemble> {
    if !(width >= 0.0) || !width.is_finite() {
        return Err(FreezeError::InvalidConfig(format!("patch width {width} must be finite and nonnegative")));
    }
    if count == 0 {
        return Err(FreezeError::InvalidConfig("ensemble needs at least one point".into()));
    }
    let (e_theta, e_phi) = tangent_basis(theta, phi);
    let c = SpherePoint::from_angles(theta, phi);
    let chunks = map_chunks(count, seed, |rng, len| {
        (0..len)
            .map(|_| {
                let a: f64 = StandardNormal.sample(rng);
                let b: f64 = StandardNormal.sample(rng);
                let (u, v) = (width * a, width * b);
                SpherePoint::new(
                    c.x + u * e_theta.x + v * e_phi.x,
                    c.y + u * e_theta.y + v * e_phi.y,
                    c.z + u * e_theta.z + v * e_phi.z,
                )
                .normalized()
            })
            .collect::<Vec<_>>()
    });
    Ok(ClassicalEnsemble { points: chunks.concat(), provenance: EnsembleProvenance::GaussianPatch { theta, phi, width }, seed })
}

/// Unit vectors along increasing `θ` and `φ` at a point.
pub fn tangent_basis(theta: f64, phi: f64) -> (SpherePoint, SpherePoint) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    (SpherePoint::new(ct * cp, ct * sp, -st), SpherePoint::new(-sp, cp, 0.0))
}

/// Density-overlap estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OverlapEstimator {
    /// Histograms on `bands` equal-area z-bands times `sectors` azimuthal sectors.
    Grid { bands: usize, sectors: usize },
    /// Initial Gaussian density averaged over echoed points (Gaussian patches only).
    Kernel,
}

impl Default for OverlapEstimator {
    fn default() -> Self {
        OverlapEstimator::Grid { bands: 128, sectors: 256 }
    }
}

/// Batches used for the grid estimator's error bar.
const GRID_BATCHES: usize = 8;
/// Fewer points per occupied cell than this triggers a resolution warning.
const MIN_POINTS_PER_CELL: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct ClassicalFidelity {
    pub series: FidelitySeries,
    pub std_errors: Vec<f64>,
    pub estimator: OverlapEstimator,
    pub warnings: Vec<String>,
}

fn cell_index(p: &SpherePoint, bands: usize, sectors: usize) -> usize {
    let b = (((p.z + 1.0) / 2.0 * bands as f64) as usize).min(bands - 1);
    let phi = p.y.atan2(p.x).rem_euclid(std::f64::consts::TAU);
    let s = ((phi / std::f64::consts::TAU * sectors as f64) as usize).min(sectors - 1);
    b * sectors + s
}

fn histogram(points: &[SpherePoint], bands: usize, sectors: usize) -> Vec<f64> {
    let mut h = vec![0.0; bands * sectors];
    for p in points {
        h[cell_index(p, bands, sectors)] += 1.0;
    }
    h
}

fn normalized_overlap(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa * bb).sqrt()
    }
}

fn grid_estimate(initial: &[SpherePoint], echoed: &[SpherePoint], bands: usize, sectors: usize) -> (f64, f64) {
    let full = normalized_overlap(&histogram(initial, bands, sectors), &histogram(echoed, bands, sectors));
    let size = initial.len() / GRID_BATCHES;
    if size < 2 {
        return (full, f64::NAN);
    }
    let parts: Vec<f64> = (0..GRID_BATCHES)
        .map(|b| {
            let r = b * size..(b + 1) * size;
            normalized_overlap(&histogram(&initial[r.clone()], bands, sectors), &histogram(&echoed[r], bands, sectors))
        })
        .collect();
    let (_, std) = mean_std(&parts).unwrap_or((0.0, 0.0));
    (full, std / (GRID_BATCHES as f64).sqrt())
}

fn kernel_estimate(echoed: &[SpherePoint], center: &SpherePoint, width: f64) -> (f64, f64) {
    let two_s2 = 2.0 * width * width;
    let vals: Vec<f64> = echoed
        .iter()
        .map(|p| {
            // Central projection onto the tangent plane inverts the patch construction.
            let c = p.dot(center);
            if c <= 0.0 {
                return 0.0;
            }
            let (dx, dy, dz) = (p.x / c - center.x, p.y / c - center.y, p.z / c - center.z);
            2.0 * (-(dx * dx + dy * dy + dz * dz) / two_s2).exp()
        })
        .collect();
    let (m, s) = mean_std(&vals).unwrap_or((0.0, 0.0));
    (m, s / (vals.len() as f64).sqrt())
}

/// Classical echo fidelity at the given (strictly increasing) sample times.
pub fn classical_fidelity_series(
    ensemble: &ClassicalEnsemble,
    system: &ClassicalSystem,
    delta: f64,
    sample_times: &[u64],
    estimator: OverlapEstimator,
) -> Result<ClassicalFidelity> {
    if system.dof() != 1 {
        return Err(FreezeError::Unsupported("classical fidelity for more than one top".into()));
    }
    if sample_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FreezeError::InvalidConfig("sample times must be strictly increasing".into()));
    }
    if !delta.is_finite() {
        return Err(FreezeError::InvalidConfig(format!("δ = {delta} is not finite")));
    }
    let start = std::time::Instant::now();
    let mut warnings = Vec::new();
    let kernel_params = match (estimator, ensemble.provenance) {
        (OverlapEstimator::Kernel, EnsembleProvenance::GaussianPatch { theta, phi, width }) => {
            if width == 0.0 {
                return Err(FreezeError::InvalidConfig("the kernel estimator needs a patch of nonzero width".into()));
            }
            Some((SpherePoint::from_angles(theta, phi), width))
        }
        (OverlapEstimator::Kernel, _) => {
            return Err(FreezeError::InvalidConfig("the kernel estimator needs a Gaussian-patch ensemble".into()));
        }
        (OverlapEstimator::Grid { bands, sectors }, _) => {
            if bands == 0 || sectors == 0 {
                return Err(FreezeError::InvalidConfig("grid needs at least one band and one sector".into()));
            }
            let h = histogram(&ensemble.points, bands, sectors);
            let occupied = h.iter().filter(|&&c| c > 0.0).count().max(1);
            let per_cell = ensemble.points.len() as f64 / occupied as f64;
            if per_cell < MIN_POINTS_PER_CELL {
                warnings.push(format!(
                    "only {per_cell:.1} points per occupied cell on the {bands}×{sectors} grid; estimates are noise dominated"
                ));
            }
            None
        }
    };

    let mut forward = ensemble.points.clone();
    let mut reached = 0u64;
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut std_errors = Vec::with_capacity(sample_times.len());
    for &n in sample_times {
        let advance = n - reached;
        forward.par_iter_mut().for_each(|p| {
            let mut q = [*p];
            for _ in 0..advance {
                system.step_perturbed(&mut q, delta);
            }
            *p = q[0];
        });
        reached = n;
        let echoed: Vec<SpherePoint> = forward
            .par_iter()
            .map(|p| {
                let mut q = [*p];
                for _ in 0..n {
                    system.step_inverse(&mut q);
                }
                q[0]
            })
            .collect();
        let (f, err) = match (estimator, kernel_params) {
            (OverlapEstimator::Grid { bands, sectors }, _) => grid_estimate(&ensemble.points, &echoed, bands, sectors),
            (OverlapEstimator::Kernel, Some((c, w))) => kernel_estimate(&echoed, &c, w),
            (OverlapEstimator::Kernel, None) => unreachable!("validated above"),
        };
        samples.push(FidelitySample::new(n, faer::c64::new(f.max(0.0).sqrt(), 0.0)));
        std_errors.push(err);
    }

    let functional = match estimator {
        OverlapEstimator::Grid { bands, sectors } => {
            format!("normalized histogram overlap Σpq/√(Σp²Σq²) on a {bands}×{sectors} equal-area grid")
        }
        OverlapEstimator::Kernel => "2·mean exp(−r²/2s²) over echoed points, r the tangent-plane distance to the patch center".to_string(),
    };
    let meta = SeriesMeta {
        model: None,
        delta,
        mode: EchoMode::Direct,
        initial: None,
        state: None,
        projected_norm: None,
        classical: true,
        prefactor: None,
        max_norm_drift: None,
        spectral_residual: None,
        wall_time_s: start.elapsed().as_secs_f64(),
        notes: std::iter::once(functional).chain(warnings.iter().cloned()).collect(),
    };
    Ok(ClassicalFidelity { series: FidelitySeries { samples, meta }, std_errors, estimator, warnings })
}
