//! Truncated standard subproduct systems over the complex scalars.
//!
//! A system of generator dimension `d` truncated at degree `N` is the family of
//! subspaces `X(n) ⊆ E^⊗n` (`E = C^d`, `0 ≤ n ≤ N`), each stored as an
//! isometry `V_n : C^{dim X(n)} → E^⊗n`. The projections `p_n = V_n V_n*` must
//! satisfy `p_{n+m}(p_n ⊗ I) = p_{n+m} = p_{n+m}(I ⊗ p_m)`.

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    identity, op_norm, real, subspace_intersection, tensor_product, zeros, CMatrix, Subspace,
};

/// Largest degree for which the symmetric system is built.
pub const MAX_SYMMETRIC_DEGREE: usize = 8;

const ISOMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// The product system `X(n) = E^⊗n`.
    Full,
    /// Symmetric tensor powers.
    Symmetric,
    /// Generated in degree two by a chosen `X(2) ⊆ E ⊗ E`.
    Degree2,
    /// Isometries supplied directly.
    Custom,
}

#[derive(Debug, Clone)]
pub struct SubproductSystem {
    d: usize,
    truncation: usize,
    kind: SystemKind,
    isometries: Vec<CMatrix>,
    // shift_blocks[m][i] = V_{m+1}* (e_i ⊗ V_m), the degree m → m+1 block of S(e_i).
    shift_blocks: Vec<Vec<CMatrix>>,
}

fn check_sizes(d: usize, n: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::DegenerateInput("generator dimension d must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::DegenerateInput("truncation degree N must be at least 1".into()));
    }
    Ok(())
}

impl SubproductSystem {
    fn assemble(d: usize, kind: SystemKind, isometries: Vec<CMatrix>) -> Self {
        let truncation = isometries.len() - 1;
        let shift_blocks = (0..truncation)
            .map(|m| {
                let width = d.pow(m as u32);
                (0..d)
                    .map(|i| isometries[m + 1].rows(i * width, width).adjoint() * &isometries[m])
                    .collect()
            })
            .collect();
        Self { d, truncation, kind, isometries, shift_blocks }
    }

    /// Builds a system from explicit isometries `V_0, …, V_N`.
    ///
    /// Shapes and the isometry property are checked; compatibility is left to
    /// [`validate_system`].
    pub fn from_isometries(d: usize, isometries: Vec<CMatrix>) -> Result<Self> {
        check_sizes(d, isometries.len().saturating_sub(1))?;
        for (n, v) in isometries.iter().enumerate() {
            let ambient = d.pow(n as u32);
            if v.nrows() != ambient {
                return Err(Error::AmbientMismatch { expected: ambient, found: v.nrows() });
            }
            let defect = op_norm(&(v.adjoint() * v - identity(v.ncols())));
            if defect > ISOMETRY_TOL {
                return Err(Error::ShapeMismatch(format!(
                    "V_{n} is not an isometry (‖V*V − I‖ = {defect:.3e})"
                )));
            }
        }
        if isometries[0].ncols() != 1 || isometries[1].ncols() != d {
            return Err(Error::ShapeMismatch("dim X(0) must be 1 and dim X(1) must be d".into()));
        }
        Ok(Self::assemble(d, SystemKind::Custom, isometries))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn dim(&self, n: usize) -> usize {
        self.isometries[n].ncols()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.isometries.iter().map(|v| v.ncols()).collect()
    }

    /// `dim X(n)`, also past the truncation when a closed formula is known.
    pub fn dim_formula(&self, n: usize) -> Option<usize> {
        if n <= self.truncation {
            return Some(self.dim(n));
        }
        match self.kind {
            SystemKind::Full => self.d.checked_pow(n as u32),
            SystemKind::Symmetric => binomial(n + self.d - 1, n),
            SystemKind::Degree2 | SystemKind::Custom => None,
        }
    }

    pub fn isometry(&self, n: usize) -> &CMatrix {
        &self.isometries[n]
    }

    pub fn projection(&self, n: usize) -> CMatrix {
        let v = &self.isometries[n];
        v * v.adjoint()
    }

    /// The block `V_{m+1}*(e_i ⊗ V_m)` of the creation operator `S(e_i)`.
    pub fn shift_block(&self, i: usize, m: usize) -> &CMatrix {
        &self.shift_blocks[m][i]
    }

    /// Same system with `V_n` replaced. Used to build deliberately broken
    /// systems for validation tests.
    pub fn with_isometry(&self, n: usize, v: CMatrix) -> Result<Self> {
        let mut isos = self.isometries.clone();
        if n >= isos.len() {
            return Err(Error::DegreeOutOfRange { degree: n, max: self.truncation });
        }
        isos[n] = v;
        Self::from_isometries(self.d, isos)
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// The product system `X(n) = E^⊗n`.
pub fn full_system(d: usize, n: usize) -> Result<SubproductSystem> {
    check_sizes(d, n)?;
    let isos = (0..=n).map(|k| identity(d.pow(k as u32))).collect();
    Ok(SubproductSystem::assemble(d, SystemKind::Full, isos))
}

fn digits(mut index: usize, d: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

fn word_index(word: &[usize], d: usize) -> usize {
    word.iter().fold(0, |acc, &i| acc * d + i)
}

/// Orthonormal basis of `Sym^n(C^d)`: one column per multiset of letters, in
/// lexicographic order of sorted words, equal to the normalised sum of the
/// distinct rearrangements.
fn symmetric_basis(d: usize, n: usize) -> CMatrix {
    let total = d.pow(n as u32);
    let mut classes: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for idx in 0..total {
        let mut w = digits(idx, d, n);
        w.sort_unstable();
        classes.entry(w).or_default().push(idx);
    }
    let mut v = zeros(total, classes.len());
    for (col, members) in classes.values().enumerate() {
        let c = real(1.0 / (members.len() as f64).sqrt());
        for &idx in members {
            v[(idx, col)] = c;
        }
    }
    v
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// The symmetrizer `(1/n!) Σ_σ U_σ` on `(C^d)^⊗n`, by explicit permutation sum.
pub fn symmetrizer(d: usize, n: usize) -> CMatrix {
    let total = d.pow(n as u32);
    let perms = permutations(n);
    let weight = 1.0 / perms.len() as f64;
    let mut p = zeros(total, total);
    for idx in 0..total {
        let w = digits(idx, d, n);
        let mut permuted = vec![0; n];
        for sigma in &perms {
            for (slot, &s) in permuted.iter_mut().zip(sigma) {
                *slot = w[s];
            }
            p[(word_index(&permuted, d), idx)] += real(weight);
        }
    }
    p
}

/// Symmetric tensor powers, `dim X(n) = C(n+d−1, n)`.
pub fn symmetric_system(d: usize, n: usize) -> Result<SubproductSystem> {
    check_sizes(d, n)?;
    if n > MAX_SYMMETRIC_DEGREE {
        return Err(Error::UnsupportedCase(format!(
            "symmetric systems are built up to degree {MAX_SYMMETRIC_DEGREE}, requested {n}"
        )));
    }
    let isos = (0..=n).map(|k| symmetric_basis(d, k)).collect();
    Ok(SubproductSystem::assemble(d, SystemKind::Symmetric, isos))
}

/// System generated in degree two: `X(n) = ⋂_i E^⊗i ⊗ X(2) ⊗ E^⊗(n−2−i)`.
pub fn degree2_system(d: usize, n: usize, x2: &Subspace) -> Result<SubproductSystem> {
    check_sizes(d, n)?;
    if x2.ambient_dim() != d * d {
        return Err(Error::AmbientMismatch { expected: d * d, found: x2.ambient_dim() });
    }
    let mut isos = vec![identity(1), identity(d)];
    if n >= 2 {
        isos.push(x2.basis().clone());
    }
    for k in 3..=n {
        let pieces: Vec<Subspace> = (0..=k - 2)
            .map(|i| {
                let left = identity(d.pow(i as u32));
                let right = identity(d.pow((k - 2 - i) as u32));
                let basis = tensor_product(&tensor_product(&left, x2.basis()), &right);
                Subspace::from_isometry_unchecked(basis)
            })
            .collect();
        isos.push(subspace_intersection(&pieces)?.into_basis());
    }
    isos.truncate(n + 1);
    Ok(SubproductSystem::assemble(d, SystemKind::Degree2, isos))
}

/// Residuals of the structural checks on a system.
#[derive(Debug, Clone, Serialize)]
pub struct SystemValidation {
    pub dims: Vec<usize>,
    pub isometry_residual: f64,
    pub left_compatibility: f64,
    pub right_compatibility: f64,
    pub max_residual: f64,
    pub passes: bool,
}

/// `‖((I − p_n) ⊗ I) V_{n+m}‖` (left) or `‖(I ⊗ (I − p_m)) V_{n+m}‖` (right),
/// evaluated by reshaping each column of `V_{n+m}` into a `d^n × d^m` matrix.
fn compatibility_residual(sys: &SubproductSystem, n: usize, m: usize, left: bool) -> f64 {
    let d = sys.d;
    let rows = d.pow(n as u32);
    let cols = d.pow(m as u32);
    let big = sys.isometry(n + m);
    let vn = sys.isometry(n);
    let vm = sys.isometry(m);
    let mut residual = zeros(rows * cols, big.ncols());
    for c in 0..big.ncols() {
        let col = big.column(c);
        let mat = CMatrix::from_fn(rows, cols, |a, b| col[a * cols + b]);
        let kept = if left {
            vn * (vn.adjoint() * &mat)
        } else {
            (&mat * vm.map(|z| z.conj())) * vm.transpose()
        };
        let diff = mat - kept;
        for a in 0..rows {
            for b in 0..cols {
                residual[(a * cols + b, c)] = diff[(a, b)];
            }
        }
    }
    op_norm(&residual)
}

/// Checks isometries and both compatibility families for all `n + m ≤ N`.
pub fn validate_system(sys: &SubproductSystem, tol: f64) -> SystemValidation {
    let isometry_residual = sys
        .isometries
        .iter()
        .map(|v| op_norm(&(v.adjoint() * v - identity(v.ncols()))))
        .fold(0.0, f64::max);
    let mut left = 0.0f64;
    let mut right = 0.0f64;
    for total in 2..=sys.truncation {
        for n in 1..total {
            let m = total - n;
            left = left.max(compatibility_residual(sys, n, m, true));
            right = right.max(compatibility_residual(sys, n, m, false));
        }
    }
    let dim_ok = sys.dim(0) == 1 && sys.dim(1) == sys.d;
    let max_residual = isometry_residual.max(left).max(right);
    SystemValidation {
        dims: sys.dims(),
        isometry_residual,
        left_compatibility: left,
        right_compatibility: right,
        max_residual,
        passes: dim_ok && max_residual <= tol,
    }
}

/// Coordinates of the truncated Fock space `F_X = ⊕_{n ≤ N} X(n)`.
#[derive(Debug, Clone)]
pub struct FockBasis {
    system: Arc<SubproductSystem>,
    degree_offsets: Vec<usize>,
    total_dim: usize,
}

impl FockBasis {
    pub fn new(system: Arc<SubproductSystem>) -> Self {
        let mut degree_offsets = Vec::with_capacity(system.truncation + 1);
        let mut acc = 0;
        for n in 0..=system.truncation {
            degree_offsets.push(acc);
            acc += system.dim(n);
        }
        Self { system, degree_offsets, total_dim: acc }
    }

    pub fn system(&self) -> &Arc<SubproductSystem> {
        &self.system
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn offsets(&self) -> &[usize] {
        &self.degree_offsets
    }

    pub fn truncation(&self) -> usize {
        self.system.truncation
    }

    /// Index range of degree `n` in `F_X ⊗ C^r`.
    pub fn degree_range(&self, n: usize, r: usize) -> Range<usize> {
        let start = self.degree_offsets[n] * r;
        start..start + self.system.dim(n) * r
    }

    /// Index range of degrees `0..=n` in `F_X ⊗ C^r`.
    pub fn up_to_degree(&self, n: usize, r: usize) -> Range<usize> {
        0..self.degree_range(n, r).end
    }

    /// Creation operators `S_i = S_1(e_i)`; the top degree is annihilated.
    pub fn shift_matrices(&self) -> Vec<CMatrix> {
        let sys = &self.system;
        (0..sys.d)
            .map(|i| {
                let mut s = zeros(self.total_dim, self.total_dim);
                for m in 0..sys.truncation {
                    let rows = self.degree_range(m + 1, 1);
                    let cols = self.degree_range(m, 1);
                    s.view_mut((rows.start, cols.start), (rows.len(), cols.len()))
                        .copy_from(sys.shift_block(i, m));
                }
                s
            })
            .collect()
    }

    /// The operator `S_n(ζ)`, mapping degree `m` to `m + n` by
    /// `η ↦ V_{n+m}*(V_n ζ ⊗ V_m η)`.
    pub fn shift_n(&self, n: usize, zeta: &DVector<Complex64>) -> Result<CMatrix> {
        let sys = &self.system;
        if n > sys.truncation {
            return Err(Error::DegreeOutOfRange { degree: n, max: sys.truncation });
        }
        if zeta.len() != sys.dim(n) {
            return Err(Error::ShapeMismatch(format!(
                "ζ has {} coordinates, dim X({n}) = {}",
                zeta.len(),
                sys.dim(n)
            )));
        }
        let lifted = sys.isometry(n) * zeta;
        let lifted = CMatrix::from_column_slice(lifted.len(), 1, lifted.as_slice());
        let mut s = zeros(self.total_dim, self.total_dim);
        for m in 0..=sys.truncation - n {
            let block = sys.isometry(n + m).adjoint() * tensor_product(&lifted, sys.isometry(m));
            let rows = self.degree_range(n + m, 1);
            let cols = self.degree_range(m, 1);
            s.view_mut((rows.start, cols.start), (rows.len(), cols.len())).copy_from(&block);
        }
        Ok(s)
    }

    /// `(S_i ⊗ I_r) x` for `x` with rows indexed by `F_X ⊗ C^r`.
    pub fn shift_left(&self, i: usize, r: usize, x: &CMatrix) -> CMatrix {
        let sys = &self.system;
        let mut out = zeros(x.nrows(), x.ncols());
        for m in 0..sys.truncation {
            let src = self.degree_range(m, r);
            let dst = self.degree_range(m + 1, r);
            let block = sys.shift_block(i, m);
            for a in 0..block.nrows() {
                for b in 0..block.ncols() {
                    let w = block[(a, b)];
                    if w == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for s in 0..r {
                        let from = src.start + b * r + s;
                        let to = dst.start + a * r + s;
                        for c in 0..x.ncols() {
                            out[(to, c)] += w * x[(from, c)];
                        }
                    }
                }
            }
        }
        out
    }

    /// `x (S_i ⊗ I_r)` for `x` with columns indexed by `F_X ⊗ C^r`.
    pub fn shift_right(&self, i: usize, r: usize, x: &CMatrix) -> CMatrix {
        let sys = &self.system;
        let mut out = zeros(x.nrows(), x.ncols());
        for m in 0..sys.truncation {
            let src = self.degree_range(m, r);
            let dst = self.degree_range(m + 1, r);
            let block = sys.shift_block(i, m);
            for a in 0..block.nrows() {
                for b in 0..block.ncols() {
                    let w = block[(a, b)];
                    if w == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for s in 0..r {
                        let from = dst.start + a * r + s;
                        let to = src.start + b * r + s;
                        for row in 0..x.nrows() {
                            out[(row, to)] += x[(row, from)] * w;
                        }
                    }
                }
            }
        }
        out
    }

    /// Diagonal blocks of `Θ_S^k(I_{F_X})`, one per degree.
    ///
    /// `Θ_S` maps block-diagonal operators to block-diagonal operators, so the
    /// iteration never leaves the per-degree blocks.
    pub fn shift_theta_diagonal(&self, k: usize) -> Vec<CMatrix> {
        let sys = &self.system;
        let mut blocks: Vec<CMatrix> = (0..=sys.truncation).map(|n| identity(sys.dim(n))).collect();
        for _ in 0..k {
            let mut next: Vec<CMatrix> =
                (0..=sys.truncation).map(|n| zeros(sys.dim(n), sys.dim(n))).collect();
            for m in 0..sys.truncation {
                for i in 0..sys.d {
                    let b = sys.shift_block(i, m);
                    next[m + 1] += b * &blocks[m] * b.adjoint();
                }
            }
            blocks = next;
        }
        blocks
    }
}
