//! Dense complex linear algebra shared by every construction in the crate.
//!
//! Operators and vectors are `DMatrix<Complex64>`. Tensor products follow the
//! Kronecker convention `(A⊗B)(x⊗y) = Ax ⊗ By`, where `x⊗y` sits at index
//! `ix · dim(y) + iy`. Subspaces are stored as isometries whose columns form an
//! orthonormal basis.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative singular-value cutoff used when deciding numerical rank.
pub const RANK_TOL: f64 = 1e-10;

/// Singular values at or below this are zero regardless of the relative cutoff.
///
/// Every operator handled here is a contraction or an isometry, so entries are
/// of unit scale and anything this small is rounding noise.
pub const ABS_RANK_FLOOR: f64 = 1e-12;

const ORTHONORMAL_TOL: f64 = 1e-12;

#[inline]
pub fn cplx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Builds a matrix from real row-major entries.
pub fn from_real_rows(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    assert_eq!(entries.len(), rows * cols, "entry count must equal rows × cols");
    CMatrix::from_row_iterator(rows, cols, entries.iter().map(|&x| real(x)))
}

/// Kronecker product with the crate-wide index convention.
pub fn tensor_product(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Real part of the trace.
pub fn trace_re(a: &CMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// Spectral norm (largest singular value); zero for empty matrices.
///
/// Computed as the square root of the top eigenvalue of the Gram matrix on the
/// short side, which the Hermitian eigensolver delivers to full relative
/// accuracy.
pub fn op_norm(a: &CMatrix) -> f64 {
    if a.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
        return 0.0;
    }
    let gram = if a.nrows() <= a.ncols() { a * a.adjoint() } else { a.adjoint() * a };
    hermitian_eigenvalues(&gram).last().cloned().unwrap_or(0.0).max(0.0).sqrt()
}

/// Hermitian part `(A + A*)/2`.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut vals: Vec<f64> = hermitian_part(a).symmetric_eigenvalues().iter().cloned().collect();
    vals.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
    vals
}

/// Smallest eigenvalue of the Hermitian part; `+∞` for an empty matrix.
pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    hermitian_eigenvalues(a).first().cloned().unwrap_or(f64::INFINITY)
}

/// Positive square root of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues in `[-tol, 0)` are clamped to zero.
pub fn psd_sqrt(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "psd_sqrt needs a square matrix, got {}×{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(zeros(0, 0));
    }
    let skew = op_norm(&(a - a.adjoint()));
    if skew > tol {
        return Err(Error::NotHermitian { residual: skew });
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let roots = DVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| real(l.max(0.0).sqrt())));
    let u = &eig.eigenvectors;
    Ok(u * CMatrix::from_diagonal(&roots) * u.adjoint())
}

/// Rotates a vector so its largest-modulus component is real and positive.
fn fix_phase(mut v: DVector<Complex64>) -> DVector<Complex64> {
    let mut best = 0usize;
    let mut best_mod = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mod * (1.0 + 1e-12) {
            best = i;
            best_mod = m;
        }
    }
    if best_mod > 0.0 {
        let phase = v[best] / best_mod;
        v *= phase.conj();
    }
    v
}

fn columns_to_matrix(rows: usize, cols: Vec<DVector<Complex64>>) -> CMatrix {
    if cols.is_empty() {
        return zeros(rows, 0);
    }
    CMatrix::from_columns(&cols)
}

/// A subspace of a coordinate space, stored as an isometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: CMatrix,
}

impl Subspace {
    /// Wraps a matrix with orthonormal columns, checking the isometry property.
    pub fn from_orthonormal(basis: CMatrix) -> Result<Self> {
        let r = basis.ncols();
        if r > basis.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "basis has {r} columns in a {}-dimensional space",
                basis.nrows()
            )));
        }
        let defect = op_norm(&(basis.adjoint() * &basis - identity(r)));
        if defect > ORTHONORMAL_TOL {
            return Err(Error::ShapeMismatch(format!(
                "basis columns are not orthonormal (‖B*B − I‖ = {defect:.3e})"
            )));
        }
        Ok(Self { basis })
    }

    pub(crate) fn from_isometry_unchecked(basis: CMatrix) -> Self {
        Self { basis }
    }

    /// Span of the columns of `a`.
    pub fn span(a: &CMatrix) -> Self {
        range_isometry(a, RANK_TOL)
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Self { basis: zeros(ambient_dim, 0) }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self { basis: identity(ambient_dim) }
    }

    /// Span of the given standard basis vectors.
    pub fn coordinate<I: IntoIterator<Item = usize>>(ambient_dim: usize, indices: I) -> Self {
        let cols: Vec<_> = indices
            .into_iter()
            .map(|i| {
                let mut v = DVector::zeros(ambient_dim);
                v[i] = real(1.0);
                v
            })
            .collect();
        Self { basis: columns_to_matrix(ambient_dim, cols) }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.rank() == 0
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn into_basis(self) -> CMatrix {
        self.basis
    }

    pub fn projection(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }

    /// `‖(I − P)x‖` maximised over unit vectors `x` in `other`.
    pub fn excess(&self, other: &Subspace) -> f64 {
        let inside = &self.basis * (self.basis.adjoint() * other.basis());
        op_norm(&(other.basis() - inside))
    }

    /// Orthogonal complement in the ambient space.
    pub fn orthogonal_complement(&self) -> Self {
        let n = self.ambient_dim();
        let r = self.rank();
        if r == 0 {
            return Subspace::full(n);
        }
        if r == n {
            return Subspace::zero(n);
        }
        // The trailing columns of the full Householder Q of [B | I] are an
        // orthonormal basis of ran B^⊥.
        let q = hcat(&[self.basis.clone(), identity(n)], n).qr().q();
        let cols = (r..n).map(|j| fix_phase(q.column(j).into_owned())).collect();
        Subspace::from_isometry_unchecked(columns_to_matrix(n, cols))
    }

    /// `self ⊖ other`: the part of `self` orthogonal to `other`.
    pub fn minus(&self, other: &Subspace) -> Result<Self> {
        check_ambient(self, other)?;
        let along = other.basis() * (other.basis().adjoint() * &self.basis);
        Ok(range_isometry(&(&self.basis - along), RANK_TOL))
    }

    /// Span of `a · basis`.
    pub fn image(&self, a: &CMatrix) -> Result<Self> {
        if a.ncols() != self.ambient_dim() {
            return Err(Error::AmbientMismatch { expected: a.ncols(), found: self.ambient_dim() });
        }
        Ok(range_isometry(&(a * &self.basis), RANK_TOL))
    }

    /// Joint span of several subspaces of the same ambient space.
    pub fn join(parts: &[Subspace]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::DegenerateInput("join of an empty family".into()));
        };
        for p in parts {
            check_ambient(first, p)?;
        }
        let total: usize = parts.iter().map(Subspace::rank).sum();
        let mut stacked = zeros(first.ambient_dim(), total);
        let mut col = 0;
        for p in parts {
            stacked.columns_mut(col, p.rank()).copy_from(p.basis());
            col += p.rank();
        }
        Ok(range_isometry(&stacked, RANK_TOL))
    }
}

fn check_ambient(a: &Subspace, b: &Subspace) -> Result<()> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::AmbientMismatch { expected: a.ambient_dim(), found: b.ambient_dim() });
    }
    Ok(())
}

/// Orthonormal basis of the column space of `a`.
///
/// Rank counts singular values above `tol · σ_max` (and above
/// [`ABS_RANK_FLOOR`]). Columns come in decreasing singular-value order, each
/// rotated so its largest-modulus entry is real and positive.
pub fn range_isometry(a: &CMatrix, tol: f64) -> Subspace {
    let m = a.nrows();
    if m == 0 || a.ncols() == 0 {
        return Subspace::zero(m);
    }
    let pairs = if is_hermitian(a) {
        // Singular values are |λ|, left singular vectors the eigenvectors.
        let eig = SymmetricEigen::new(hermitian_part(a));
        (0..m).map(|i| (eig.eigenvalues[i].abs(), eig.eigenvectors.column(i).into_owned())).collect()
    } else if m >= a.ncols() {
        let qr = a.clone().qr();
        let q = qr.q();
        square_left_singular(&qr.r()).into_iter().map(|(s, u)| (s, &q * u)).collect()
    } else {
        // a = R* Q* with Q an isometry, so a and R* share left singular pairs.
        square_left_singular(&a.adjoint().qr().r().adjoint())
    };
    leading_range(m, pairs, tol)
}

// Singular pairs (σ, u) of a square matrix, from the Hermitian eigenproblem
// of [[0, M], [M*, 0]], whose eigenvalues are ±σ with eigenvectors (u; ±v)/√2.
// Only the k largest eigenvalues are returned, so the zero cluster, where u
// and v mix, enters only through pairs later dropped by the cutoff.
fn square_left_singular(m: &CMatrix) -> Vec<(f64, DVector<Complex64>)> {
    let k = m.nrows();
    let mut jw = zeros(2 * k, 2 * k);
    jw.view_mut((0, k), (k, k)).copy_from(m);
    jw.view_mut((k, 0), (k, k)).copy_from(&m.adjoint());
    let eig = SymmetricEigen::new(jw);
    let mut order: Vec<usize> = (0..2 * k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).expect("eigenvalues are finite"));
    order
        .into_iter()
        .take(k)
        .map(|i| {
            let top = eig.eigenvectors.view((0, i), (k, 1)).column(0).into_owned();
            (eig.eigenvalues[i].max(0.0), top * real(std::f64::consts::SQRT_2))
        })
        .collect()
}

// Keeps the pairs above the cutoff, largest first, and orthonormalizes their
// vectors (a no-op up to rounding).
fn leading_range(m: usize, mut pairs: Vec<(f64, DVector<Complex64>)>, tol: f64) -> Subspace {
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).expect("singular values are finite"));
    let smax = pairs.first().map_or(0.0, |p| p.0);
    let cutoff = (tol * smax).max(ABS_RANK_FLOOR);
    let kept: Vec<DVector<Complex64>> = pairs.into_iter().filter(|p| p.0 > cutoff).map(|p| p.1).collect();
    if kept.is_empty() {
        return Subspace::zero(m);
    }
    let q = CMatrix::from_columns(&kept).qr().q();
    let cols = (0..kept.len()).map(|j| fix_phase(q.column(j).into_owned())).collect();
    Subspace::from_isometry_unchecked(columns_to_matrix(m, cols))
}

fn is_hermitian(a: &CMatrix) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let n = a.nrows();
    (0..n).all(|i| (i..n).all(|j| (a[(i, j)] - a[(j, i)].conj()).norm() <= 1e-15 * scale))
}

/// Intersection of subspaces, as the kernel of the stacked complementary
/// projections `[I − P_1; …; I − P_k]`.
pub fn subspace_intersection(parts: &[Subspace]) -> Result<Subspace> {
    let Some(first) = parts.first() else {
        return Err(Error::DegenerateInput("intersection of an empty family".into()));
    };
    let n = first.ambient_dim();
    for p in parts {
        check_ambient(first, p)?;
    }
    if n == 0 {
        return Ok(Subspace::zero(0));
    }
    if parts.iter().any(Subspace::is_zero) {
        return Ok(Subspace::zero(n));
    }
    // ker [I − P_1; …; I − P_k] = (ran [I − P_1, …, I − P_k])^⊥.
    let gaps: Vec<CMatrix> = parts.iter().map(|p| identity(n) - p.projection()).collect();
    let stacked = hcat(&gaps, n);
    if stacked.iter().all(|z| z.norm() <= ABS_RANK_FLOOR) {
        return Ok(Subspace::full(n));
    }
    Ok(range_isometry(&stacked, RANK_TOL).orthogonal_complement())
}

/// Operator-norm distance `‖P_A − P_B‖` between two subspaces.
pub fn subspace_distance(a: &Subspace, b: &Subspace) -> Result<f64> {
    check_ambient(a, b)?;
    Ok(op_norm(&(a.projection() - b.projection())))
}

/// A matrix stored by its nonzero entries when at most a quarter are nonzero,
/// densely otherwise. Shift matrices and the `T̃_n` blocks of shift
/// representations are of the sparse kind, and left products with them cost
/// `O(nnz · cols)` instead of a dense product.
#[derive(Debug, Clone)]
pub(crate) struct SparseAware {
    rows: usize,
    cols: usize,
    storage: Storage,
}

#[derive(Debug, Clone)]
enum Storage {
    Dense(CMatrix),
    Sparse(Vec<(usize, usize, Complex64)>),
}

impl SparseAware {
    pub(crate) fn new(dense: CMatrix) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let (rows, cols) = dense.shape();
        let count = dense.iter().filter(|z| **z != zero).count();
        let storage = if count * 4 <= dense.len() {
            let mut entries = Vec::with_capacity(count);
            for c in 0..cols {
                for r in 0..rows {
                    let z = dense[(r, c)];
                    if z != zero {
                        entries.push((r, c, z));
                    }
                }
            }
            Storage::Sparse(entries)
        } else {
            Storage::Dense(dense)
        };
        Self { rows, cols, storage }
    }

    fn from_entries(rows: usize, cols: usize, entries: BTreeMap<(usize, usize), Complex64>) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let mut list: Vec<(usize, usize, Complex64)> =
            entries.into_iter().filter(|(_, z)| *z != zero).map(|((c, r), z)| (r, c, z)).collect();
        if list.len() * 4 > rows * cols {
            let mut dense = zeros(rows, cols);
            for (r, c, z) in list.drain(..) {
                dense[(r, c)] = z;
            }
            return Self { rows, cols, storage: Storage::Dense(dense) };
        }
        Self { rows, cols, storage: Storage::Sparse(list) }
    }

    /// `Σ c_k B_k` over equally shaped terms.
    pub(crate) fn combine(rows: usize, cols: usize, terms: &[(Complex64, &SparseAware)]) -> Self {
        if terms.iter().any(|(_, b)| matches!(b.storage, Storage::Dense(_))) {
            let mut out = zeros(rows, cols);
            for (c, b) in terms {
                b.add_scaled_to(&mut out, *c);
            }
            return Self::new(out);
        }
        // Keyed by (column, row) to keep the column-major entry order.
        let mut acc = BTreeMap::new();
        for (c, b) in terms {
            if let Storage::Sparse(entries) = &b.storage {
                for &(r, col, z) in entries {
                    *acc.entry((col, r)).or_insert(Complex64::new(0.0, 0.0)) += z * c;
                }
            }
        }
        Self::from_entries(rows, cols, acc)
    }

    /// `self · other`.
    pub(crate) fn product(&self, other: &SparseAware) -> Self {
        let (Storage::Sparse(left), Storage::Sparse(right)) = (&self.storage, &other.storage) else {
            return Self::new(self.mul(&other.to_dense()));
        };
        let mut by_row: BTreeMap<usize, Vec<(usize, Complex64)>> = BTreeMap::new();
        for &(r, c, z) in right {
            by_row.entry(r).or_default().push((c, z));
        }
        let mut acc = BTreeMap::new();
        for &(r, k, z) in left {
            if let Some(row) = by_row.get(&k) {
                for &(c, w) in row {
                    *acc.entry((c, r)).or_insert(Complex64::new(0.0, 0.0)) += z * w;
                }
            }
        }
        Self::from_entries(self.rows, other.cols, acc)
    }

    pub(crate) fn adjoint(&self) -> Self {
        match &self.storage {
            Storage::Dense(m) => Self { rows: self.cols, cols: self.rows, storage: Storage::Dense(m.adjoint()) },
            Storage::Sparse(entries) => {
                let acc = entries.iter().map(|&(r, c, z)| ((r, c), z.conj())).collect();
                Self::from_entries(self.cols, self.rows, acc)
            }
        }
    }

    pub(crate) fn to_dense(&self) -> CMatrix {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(entries) => {
                let mut out = zeros(self.rows, self.cols);
                for &(r, c, z) in entries {
                    out[(r, c)] = z;
                }
                out
            }
        }
    }

    /// `self · x`.
    pub(crate) fn mul(&self, x: &CMatrix) -> CMatrix {
        match &self.storage {
            Storage::Dense(m) => m * x,
            Storage::Sparse(entries) => {
                let mut out = zeros(self.rows, x.ncols());
                for col in 0..x.ncols() {
                    let src = x.column(col);
                    let mut dst = out.column_mut(col);
                    for &(r, c, z) in entries {
                        dst[r] += z * src[c];
                    }
                }
                out
            }
        }
    }

    /// `out += c · self`.
    pub(crate) fn add_scaled_to(&self, out: &mut CMatrix, c: Complex64) {
        match &self.storage {
            Storage::Dense(m) => *out += m * c,
            Storage::Sparse(entries) => {
                for &(r, col, z) in entries {
                    out[(r, col)] += z * c;
                }
            }
        }
    }

    /// `self · a · self*`.
    pub(crate) fn conjugate(&self, a: &CMatrix) -> CMatrix {
        let half = self.mul(&a.adjoint()).adjoint();
        self.mul(&half)
    }

    /// `out += self · self*`.
    pub(crate) fn add_gram_to(&self, out: &mut CMatrix) {
        match &self.storage {
            Storage::Dense(m) => *out += m * m.adjoint(),
            Storage::Sparse(_) => self.product(&self.adjoint()).add_scaled_to(out, Complex64::new(1.0, 0.0)),
        }
    }

    /// Squared Frobenius norm.
    pub(crate) fn norm_squared(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m.norm_squared(),
            Storage::Sparse(entries) => entries.iter().map(|e| e.2.norm_sqr()).sum(),
        }
    }
}

/// Horizontal concatenation of equally tall blocks.
pub fn hcat(blocks: &[CMatrix], rows: usize) -> CMatrix {
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, total);
    let mut col = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.columns_mut(col, b.ncols()).copy_from(b);
        col += b.ncols();
    }
    out
}

/// Vertical concatenation of equally wide blocks.
pub fn vcat(blocks: &[CMatrix], cols: usize) -> CMatrix {
    let total: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(total, cols);
    let mut row = 0;
    for b in blocks {
        debug_assert_eq!(b.ncols(), cols);
        out.rows_mut(row, b.nrows()).copy_from(b);
        row += b.nrows();
    }
    out
}
