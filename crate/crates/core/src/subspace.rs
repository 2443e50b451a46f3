//! Symmetry-adapted invariant subspaces.
//!
//! Every basis vector used here has at most eight nonzero real components in
//! the `Jz` product basis, so bases are stored sparsely and operators are
//! restricted by applying a structured full-space action to each basis
//! vector, never by forming full-space matrices.

use std::f64::consts::FRAC_1_SQRT_2;

use faer::{c64, Col, ColRef, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{FreezeError, Result};
use crate::linalg::ZERO;
use crate::spin::SpinRep;

/// Real vector with few nonzero entries, indices strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Builds from unordered entries; repeated indices are summed and zeros dropped.
    pub fn new(mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        Self { entries: merged }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn dot(&self, v: ColRef<'_, c64>) -> c64 {
        self.entries.iter().fold(ZERO, |acc, &(i, w)| acc + v[i] * w)
    }

    pub fn dot_sparse(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b, mut acc) = (0, 0, 0.0);
        while a < self.entries.len() && b < other.entries.len() {
            let (ia, va) = self.entries[a];
            let (ib, vb) = other.entries[b];
            match ia.cmp(&ib) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += va * vb;
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    pub fn to_dense(&self, dim: usize) -> Col<c64> {
        let mut out = Col::<c64>::zeros(dim);
        for &(i, v) in &self.entries {
            out[i] = c64::new(v, 0.0);
        }
        out
    }
}

/// Which construction produced a basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceKind {
    /// Whole space, no reduction.
    Full,
    /// Odd sector of the π rotation about y of one spin.
    OddEven,
    /// Exchange-symmetric part of (odd sector) ⊗ (even sector) for two spins.
    CoupledSymmetric,
}

/// Orthonormal basis of an invariant subspace.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    kind: SubspaceKind,
    full_dim: usize,
    vectors: Vec<SparseVector>,
    symmetry_classes: usize,
}

impl SubspaceBasis {
    pub fn full(dim: usize) -> Self {
        let vectors = (0..dim).map(|i| SparseVector::new(vec![(i, 1.0)])).collect();
        Self { kind: SubspaceKind::Full, full_dim: dim, vectors, symmetry_classes: 1 }
    }

    pub fn kind(&self) -> SubspaceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }

    pub fn vectors(&self) -> &[SparseVector] {
        &self.vectors
    }

    /// Number of symmetry classes `s` left inside the subspace.
    pub fn symmetry_classes(&self) -> usize {
        self.symmetry_classes
    }

    pub fn with_symmetry_classes(mut self, s: usize) -> Self {
        self.symmetry_classes = s.max(1);
        self
    }

    /// Coefficients `⟨e_k|ψ⟩` of a full-space vector.
    pub fn project(&self, psi: ColRef<'_, c64>) -> Col<c64> {
        Col::from_fn(self.dim(), |k| self.vectors[k].dot(psi))
    }

    /// Full-space vector `Σ c_k |e_k⟩`.
    pub fn embed(&self, coeffs: ColRef<'_, c64>) -> Col<c64> {
        let mut out = Col::<c64>::zeros(self.full_dim);
        for (k, e) in self.vectors.iter().enumerate() {
            for &(i, v) in e.entries() {
                out[i] += coeffs[k] * v;
            }
        }
        out
    }

    /// Restriction of an operator given by its action on basis vectors.
    ///
    /// Returns the matrix `⟨e_k|A|e_l⟩` together with the invariance residual
    /// `max_l ‖(1 − P) A e_l‖`.
    pub fn restrict_operator<F>(&self, mut apply: F) -> (Mat<c64>, f64)
    where
        F: FnMut(&SparseVector) -> Col<c64>,
    {
        let n = self.dim();
        let mut out = Mat::<c64>::zeros(n, n);
        let mut residual = 0.0f64;
        for (l, e) in self.vectors.iter().enumerate() {
            let image = apply(e);
            let coeffs = self.project(image.as_ref());
            let back = self.embed(coeffs.as_ref());
            let leak = (0..self.full_dim).map(|i| (image[i] - back[i]).norm_sqr()).sum::<f64>().sqrt();
            residual = residual.max(leak);
            for k in 0..n {
                out[(k, l)] = coeffs[k];
            }
        }
        (out, residual)
    }

    /// Restriction of a dense full-space operator.
    pub fn restrict_dense(&self, a: faer::MatRef<'_, c64>) -> (Mat<c64>, f64) {
        self.restrict_operator(|e| {
            let mut out = Col::<c64>::zeros(self.full_dim);
            for &(j, v) in e.entries() {
                for i in 0..self.full_dim {
                    out[i] += a[(i, j)] * v;
                }
            }
            out
        })
    }

    /// Restriction of a full-space diagonal operator.
    pub fn restrict_diagonal(&self, diag: &[c64]) -> (Mat<c64>, f64) {
        self.restrict_operator(|e| {
            let mut out = Col::<c64>::zeros(self.full_dim);
            for &(i, v) in e.entries() {
                out[i] = diag[i] * v;
            }
            out
        })
    }

    /// `max |⟨e_k|e_l⟩ − δ_kl|`.
    pub fn gram_defect(&self) -> f64 {
        // Sparse supports overlap only locally, so bucket vectors by index.
        let mut owners: Vec<Vec<usize>> = vec![Vec::new(); self.full_dim];
        for (k, e) in self.vectors.iter().enumerate() {
            for &(i, _) in e.entries() {
                owners[i].push(k);
            }
        }
        let mut worst = 0.0f64;
        for (k, e) in self.vectors.iter().enumerate() {
            worst = worst.max((e.dot_sparse(e) - 1.0).abs());
            let mut seen: Vec<usize> = e.entries().iter().flat_map(|&(i, _)| owners[i].iter().copied()).filter(|&l| l != k).collect();
            seen.sort_unstable();
            seen.dedup();
            for l in seen {
                worst = worst.max(e.dot_sparse(&self.vectors[l]).abs());
            }
        }
        worst
    }
}

/// Sparse `(|m⟩ + sign·|−m⟩)/√2` for `m > 0`.
fn mirror_pair(rep: SpinRep, m: i64, sign: f64) -> SparseVector {
    let hi = rep.index_of(m as f64).expect("m inside multiplet");
    let lo = rep.index_of(-(m as f64)).expect("m inside multiplet");
    SparseVector::new(vec![(hi, FRAC_1_SQRT_2), (lo, sign * FRAC_1_SQRT_2)])
}

fn require_even_j(rep: SpinRep) -> Result<i64> {
    rep.even_integer_j().map(|j| j as i64).ok_or_else(|| {
        FreezeError::Subspace(format!(
            "J = {} must be an even integer so that the odd/even parity sectors split into J/2 pairs",
            rep.j()
        ))
    })
}

/// Odd sector of `exp(−iπJy)` for one spin, dimension `J`.
///
/// Ordered as `|2m⟩ − |−2m⟩` for `m = 1..J/2`, then `|2m−1⟩ + |−(2m−1)⟩`.
pub fn subspace_oe(rep: SpinRep) -> Result<SubspaceBasis> {
    let j = require_even_j(rep)?;
    let vectors = oe_vectors(rep, j);
    Ok(SubspaceBasis { kind: SubspaceKind::OddEven, full_dim: rep.dim(), vectors, symmetry_classes: 1 })
}

fn oe_vectors(rep: SpinRep, j: i64) -> Vec<SparseVector> {
    let mut v: Vec<SparseVector> = (1..=j / 2).map(|m| mirror_pair(rep, 2 * m, -1.0)).collect();
    v.extend((1..=j / 2).map(|m| mirror_pair(rep, 2 * m - 1, 1.0)));
    v
}

/// Complement of the odd sector, dimension `J + 1`.
fn even_vectors(rep: SpinRep, j: i64) -> Vec<SparseVector> {
    let mut v: Vec<SparseVector> = (1..=j / 2).map(|m| mirror_pair(rep, 2 * m, 1.0)).collect();
    v.push(SparseVector::new(vec![(rep.index_of(0.0).expect("integer J"), 1.0)]));
    v.extend((1..=j / 2).map(|m| mirror_pair(rep, 2 * m - 1, -1.0)));
    v
}

/// Exchange-symmetric `(a⊗b + b⊗a)/√2` with `a` in the odd sector and `b` in
/// its complement; dimension `J(J+1)`. Index `(a, b)` is stored at `a·(J+1) + b`.
pub fn symmetric_coupled_subspace(rep: SpinRep) -> Result<SubspaceBasis> {
    let j = require_even_j(rep)?;
    let d = rep.dim();
    let odd = oe_vectors(rep, j);
    let even = even_vectors(rep, j);
    let mut vectors = Vec::with_capacity(odd.len() * even.len());
    for a in &odd {
        for b in &even {
            let mut entries = Vec::with_capacity(2 * a.entries().len() * b.entries().len());
            for &(ia, va) in a.entries() {
                for &(ib, vb) in b.entries() {
                    let w = va * vb * FRAC_1_SQRT_2;
                    entries.push((ia * d + ib, w));
                    entries.push((ib * d + ia, w));
                }
            }
            vectors.push(SparseVector::new(entries));
        }
    }
    Ok(SubspaceBasis { kind: SubspaceKind::CoupledSymmetric, full_dim: d * d, vectors, symmetry_classes: 1 })
}
