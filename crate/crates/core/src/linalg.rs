//! Dense complex linear algebra shared by the quantum modules.
//!
//! Unitary matrices are diagonalized through a Hermitian route: for a normal
//! matrix `U` the operator `Re(e^{-iγ} U)` shares its eigenvectors, so a
//! self-adjoint solver yields an exactly unitary eigenbasis. Pairs of
//! eigenphases that are mirror images about the axis `γ` collapse onto the
//! same Hermitian eigenvalue; those clusters are detected from the residual
//! off-diagonal part of `X† U X` and re-split with a different axis.

use faer::{c64, Col, ColRef, Mat, MatRef, Side};

use crate::error::{FreezeError, Result};

/// Off-diagonal magnitude of `X† U X` above which two eigenvectors are
/// considered mixed and get re-diagonalized together.
const CLUSTER_TOL: f64 = 1e-11;

/// Residual `max_k ‖U x_k − λ_k x_k‖` above which a unitary decomposition is rejected.
const RESIDUAL_TOL: f64 = 1e-8;

// Irrational axis angles; any generic choice works.
const SPLIT_ANGLES: [f64; 4] = [0.618_033_988_749_894_8, 2.236_067_977_499_79, 1.414_213_562_373_095, 0.301_029_995_663_981_2];

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn diagonal(values: &[c64]) -> Mat<c64> {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { values[i] } else { ZERO })
}

pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// `max |A − A†|`.
pub fn hermiticity_defect(a: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// `max |A†A − 1|`.
pub fn unitarity_defect(a: MatRef<'_, c64>) -> f64 {
    let g = a.adjoint() * a;
    let n = g.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { ONE } else { ZERO };
            m = m.max((g[(i, j)] - target).norm());
        }
    }
    m
}

/// `(A + A†)/2`, removing rounding-level anti-Hermitian noise.
pub fn hermitian_part(a: MatRef<'_, c64>) -> Mat<c64> {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

pub fn commutator(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    a * b - b * a
}

/// `U† A U`.
pub fn conjugate_by(u: MatRef<'_, c64>, a: MatRef<'_, c64>) -> Mat<c64> {
    u.adjoint() * (a * u)
}

pub fn sub(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

pub fn scale(a: MatRef<'_, c64>, s: c64) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn trace(a: MatRef<'_, c64>) -> c64 {
    (0..a.nrows()).map(|i| a[(i, i)]).sum()
}

/// `⟨a|b⟩ = Σ conj(a_i) b_i`.
pub fn inner(a: ColRef<'_, c64>, b: ColRef<'_, c64>) -> c64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        acc += a[i].conj() * b[i];
    }
    acc
}

pub fn norm(a: ColRef<'_, c64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨ψ|A|ψ⟩`.
pub fn expectation(a: MatRef<'_, c64>, psi: ColRef<'_, c64>) -> c64 {
    let a_psi = a * psi;
    inner(psi, a_psi.as_ref())
}

/// Eigendecomposition `A = Y diag(λ) Y†` of a Hermitian matrix, ascending `λ`.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    values: Vec<f64>,
    vectors: Mat<c64>,
}

impl HermitianSpectrum {
    pub fn new(a: MatRef<'_, c64>) -> Result<Self> {
        let sym = hermitian_part(a);
        let evd = sym
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| FreezeError::Eigen(format!("self-adjoint solver: {e:?}")))?;
        let values = evd.S().column_vector().iter().map(|z| z.re).collect();
        Ok(Self { values, vectors: evd.U().to_owned() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> MatRef<'_, c64> {
        self.vectors.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `exp(−i·t·A)`, exactly unitary up to the accuracy of the eigenbasis.
    pub fn unitary_exponential(&self, t: f64) -> Mat<c64> {
        let y = self.vectors.as_ref();
        let n = self.dim();
        let scaled = Mat::from_fn(n, n, |i, k| y[(i, k)] * c64::cis(-t * self.values[k]));
        scaled * y.adjoint()
    }
}

/// Spectral form `U = X diag(e^{iφ}) X†` of a unitary matrix with `X` unitary.
#[derive(Debug, Clone)]
pub struct UnitarySpectrum {
    phases: Vec<f64>,
    vectors: Mat<c64>,
    residual: f64,
}

impl UnitarySpectrum {
    pub fn new(u: MatRef<'_, c64>) -> Result<Self> {
        let n = u.nrows();
        if n != u.ncols() {
            return Err(FreezeError::Eigen(format!("matrix is {}x{}, not square", n, u.ncols())));
        }
        let mut x = axis_eigenvectors(u, SPLIT_ANGLES[0])?;
        let mut d = x.adjoint() * (u * &x);

        for &angle in &SPLIT_ANGLES[1..] {
            let clusters = mixed_clusters(d.as_ref());
            if clusters.is_empty() {
                break;
            }
            for cluster in clusters {
                let k = cluster.len();
                let block = Mat::from_fn(k, k, |a, b| d[(cluster[a], cluster[b])]);
                let rot = axis_eigenvectors(block.as_ref(), angle)?;
                let cols = Mat::from_fn(n, k, |i, a| x[(i, cluster[a])]);
                let new_cols = cols * &rot;
                for (a, &c) in cluster.iter().enumerate() {
                    for i in 0..n {
                        x[(i, c)] = new_cols[(i, a)];
                    }
                }
            }
            d = x.adjoint() * (u * &x);
        }

        let phases: Vec<f64> = (0..n).map(|k| d[(k, k)].arg()).collect();
        let ux = u * &x;
        let mut residual = 0.0f64;
        for k in 0..n {
            let lam = c64::cis(phases[k]);
            let r: f64 = (0..n).map(|i| (ux[(i, k)] - x[(i, k)] * lam).norm_sqr()).sum::<f64>().sqrt();
            residual = residual.max(r);
        }
        if !(residual < RESIDUAL_TOL) {
            let defect = unitarity_defect(u);
            return Err(FreezeError::Eigen(format!(
                "unitary decomposition residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e} \
                 (input unitarity defect {defect:.3e}, dimension {n})"
            )));
        }
        Ok(Self { phases, vectors: x, residual })
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// Eigenphases `φ_k ∈ (−π, π]`.
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn vectors(&self) -> MatRef<'_, c64> {
        self.vectors.as_ref()
    }

    /// Largest eigen-residual `‖U x_k − e^{iφ_k} x_k‖` seen at construction.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `X† ψ`.
    pub fn to_eigenbasis(&self, psi: ColRef<'_, c64>) -> Col<c64> {
        self.vectors.adjoint() * psi
    }

    /// `X c`.
    pub fn from_eigenbasis(&self, coeffs: ColRef<'_, c64>) -> Col<c64> {
        self.vectors.as_ref() * coeffs
    }

    /// Multiplies eigenbasis coefficients by `e^{i n φ_k}` (negative `n` runs backwards).
    pub fn evolve_coefficients(&self, coeffs: ColRef<'_, c64>, n: i64) -> Col<c64> {
        let nf = n as f64;
        Col::from_fn(self.dim(), |k| coeffs[k] * c64::cis(reduced_phase(nf, self.phases[k])))
    }

    /// `Uⁿ ψ` by one transform into the eigenbasis and one back.
    pub fn propagate(&self, psi: ColRef<'_, c64>, n: i64) -> Col<c64> {
        let c = self.to_eigenbasis(psi);
        let c = self.evolve_coefficients(c.as_ref(), n);
        self.from_eigenbasis(c.as_ref())
    }

    /// `Uⁿ` as a dense matrix.
    pub fn power(&self, n: i64) -> Mat<c64> {
        let x = self.vectors.as_ref();
        let dim = self.dim();
        let nf = n as f64;
        let scaled = Mat::from_fn(dim, dim, |i, k| x[(i, k)] * c64::cis(reduced_phase(nf, self.phases[k])));
        scaled * x.adjoint()
    }
}

/// `n·φ` reduced to `[−π, π)` before taking the exponential.
fn reduced_phase(n: f64, phase: f64) -> f64 {
    let t = n * phase;
    if t.abs() <= std::f64::consts::PI {
        t
    } else {
        (t + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI
    }
}

/// Eigenvectors of the Hermitian matrix `Re(e^{-iγ} U) = (e^{-iγ}U + e^{iγ}U†)/2`.
fn axis_eigenvectors(u: MatRef<'_, c64>, angle: f64) -> Result<Mat<c64>> {
    let n = u.nrows();
    let rot = c64::cis(-angle);
    let h = Mat::from_fn(n, n, |i, j| (rot * u[(i, j)] + (rot * u[(j, i)]).conj()) * 0.5);
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| FreezeError::Eigen(format!("self-adjoint solver: {e:?}")))?;
    Ok(evd.U().to_owned())
}

/// Groups indices connected by off-diagonal entries above [`CLUSTER_TOL`].
fn mixed_clusters(d: MatRef<'_, c64>) -> Vec<Vec<usize>> {
    let n = d.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut any = false;
    for j in 0..n {
        for i in 0..n {
            if i != j && d[(i, j)].norm() > CLUSTER_TOL {
                any = true;
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    if !any {
        return Vec::new();
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().filter(|g| g.len() > 1).collect()
}
