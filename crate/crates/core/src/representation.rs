//! Covariant representations of a truncated subproduct system on `H = C^h`.
//!
//! A representation is the tuple `T_1, …, T_d` of `h × h` matrices, i.e. the
//! row `T̃_1 = [T_1 … T_d] : E ⊗ H → H`. Higher rows `T̃_n : X(n) ⊗ H → H` are
//! stored blockwise: block `α` is the `h × h` operator `h ↦ T̃_n(V_n e_α ⊗ h)`,
//! so `T̃_n` itself is the horizontal concatenation of its blocks.

use std::sync::Arc;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigenvalues, hermitian_part, identity, op_norm, range_isometry,
    real, tensor_product, trace_re, zeros, CMatrix, SparseAware, Subspace, RANK_TOL,
};
use crate::subproduct::{FockBasis, SubproductSystem};

/// Invariance residual above which a restriction is refused.
pub const INVARIANCE_TOL: f64 = 1e-9;

/// Default tolerance for deciding purity.
pub const PURITY_TOL: f64 = 1e-9;

/// Default iteration cap for the purity limit.
pub const PURITY_K_MAX: usize = 200;

/// Row norms up to `1 + ROW_NORM_SLACK` count as contractive.
pub const ROW_NORM_SLACK: f64 = 1e-10;

// Eigenvalues of I − T̃_1T̃_1* at or below this are treated as zero. Without
// the floor, rounding noise of size 1e-16 would surface as spurious defect
// directions of size 1e-8 after the square root.
const DEFECT_EIG_FLOOR: f64 = 1e-12;

// Monotonicity of Θ^k(I) is checked with this much slack.
const MONOTONE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CovariantRep {
    system: Arc<SubproductSystem>,
    h_dim: usize,
    coefficients: Vec<CMatrix>,
    factors: Vec<SparseAware>,
}

impl CovariantRep {
    /// Wraps coefficient matrices after checking their shapes.
    ///
    /// Contractivity and the relations are not checked here; see
    /// [`validate_rep`].
    pub fn new(system: Arc<SubproductSystem>, coefficients: Vec<CMatrix>) -> Result<Self> {
        let h_dim = check_coefficients(&system, &coefficients)?;
        let factors = coefficients.iter().cloned().map(SparseAware::new).collect();
        Ok(Self { system, h_dim, coefficients, factors })
    }

    /// The induced shift `S ⊗ I_r` on `F_X ⊗ C^r`.
    pub fn induced_shift(fock: &FockBasis, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::DegenerateInput("shift multiplicity must be at least 1".into()));
        }
        let eye = identity(r);
        let coefficients = fock.shift_matrices().iter().map(|s| tensor_product(s, &eye)).collect();
        Self::new(fock.system().clone(), coefficients)
    }

    pub fn system(&self) -> &Arc<SubproductSystem> {
        &self.system
    }

    pub fn fock(&self) -> FockBasis {
        FockBasis::new(self.system.clone())
    }

    pub fn h_dim(&self) -> usize {
        self.h_dim
    }

    pub fn d(&self) -> usize {
        self.system.d()
    }

    pub fn coefficients(&self) -> &[CMatrix] {
        &self.coefficients
    }

    /// The row `T̃_1 = [T_1 … T_d]`.
    pub fn row(&self) -> CMatrix {
        crate::linalg::hcat(&self.coefficients, self.h_dim)
    }

    /// `‖T̃_1‖`.
    pub fn row_norm(&self) -> f64 {
        block_row_norm(&self.coefficients, self.h_dim)
    }
}

fn check_coefficients(sys: &SubproductSystem, coeffs: &[CMatrix]) -> Result<usize> {
    if coeffs.len() != sys.d() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} coefficient matrices, got {}",
            sys.d(),
            coeffs.len()
        )));
    }
    let h = coeffs[0].nrows();
    if h == 0 {
        return Err(Error::DegenerateInput("the Hilbert space H is zero-dimensional".into()));
    }
    for (i, t) in coeffs.iter().enumerate() {
        if t.nrows() != h || t.ncols() != h {
            return Err(Error::ShapeMismatch(format!(
                "T_{} is {}×{}, expected {h}×{h}",
                i + 1,
                t.nrows(),
                t.ncols()
            )));
        }
    }
    Ok(h)
}

/// `‖[B_1 … B_m]‖`, through the Gram sum `Σ B_i B_i*`.
pub(crate) fn block_row_norm(blocks: &[CMatrix], rows: usize) -> f64 {
    let mut gram = zeros(rows, rows);
    for b in blocks {
        gram += b * b.adjoint();
    }
    top_root(&gram)
}

pub(crate) fn sparse_block_row_norm(blocks: &[SparseAware], rows: usize) -> f64 {
    let mut gram = zeros(rows, rows);
    for b in blocks {
        b.add_gram_to(&mut gram);
    }
    top_root(&gram)
}

fn top_root(gram: &CMatrix) -> f64 {
    hermitian_eigenvalues(gram).last().cloned().unwrap_or(0.0).max(0.0).sqrt()
}

fn check_degree(sys: &SubproductSystem, n: usize) -> Result<()> {
    if n > sys.truncation() {
        return Err(Error::DegreeOutOfRange { degree: n, max: sys.truncation() });
    }
    Ok(())
}

fn check_square(rep: &CovariantRep, a: &CMatrix) -> Result<()> {
    if a.nrows() != rep.h_dim || a.ncols() != rep.h_dim {
        return Err(Error::ShapeMismatch(format!(
            "operator is {}×{}, expected {h}×{h}",
            a.nrows(),
            a.ncols(),
            h = rep.h_dim
        )));
    }
    Ok(())
}

// T̃_0, …, T̃_{n_max} by the recursion
//   T̃_n[α] = Σ_i T_i Σ_β conj(B_{i,n−1}[α, β]) T̃_{n−1}[β],
// which expands V_n e_α along E ⊗ X(n−1). Since X(n) ⊆ E ⊗ X(n−1), this equals
// μ_n(V_n ⊗ I) without using the relations.
fn tower(sys: &SubproductSystem, coeffs: &[SparseAware], h: usize, n_max: usize) -> Vec<Vec<SparseAware>> {
    let mut levels: Vec<Vec<SparseAware>> = Vec::with_capacity(n_max + 1);
    levels.push(vec![SparseAware::new(identity(h))]);
    for n in 1..=n_max {
        let prev = &levels[n - 1];
        let level = (0..sys.dim(n))
            .map(|alpha| {
                let one = Complex64::new(1.0, 0.0);
                let mut parts = Vec::new();
                for (i, t) in coeffs.iter().enumerate() {
                    let b = sys.shift_block(i, n - 1);
                    let terms: Vec<(Complex64, &SparseAware)> = prev
                        .iter()
                        .enumerate()
                        .map(|(beta, p)| (b[(alpha, beta)].conj(), p))
                        .filter(|(c, _)| *c != Complex64::new(0.0, 0.0))
                        .collect();
                    if !terms.is_empty() {
                        parts.push(t.product(&SparseAware::combine(h, h, &terms)));
                    }
                }
                let terms: Vec<(Complex64, &SparseAware)> = parts.iter().map(|p| (one, p)).collect();
                SparseAware::combine(h, h, &terms)
            })
            .collect();
        levels.push(level);
    }
    levels
}

// μ_n blocks from the μ_{n−1} blocks: the products T_{i_1}⋯T_{i_n}, indexed
// like E^⊗n.
fn extend_words(coeffs: &[SparseAware], words: &[SparseAware]) -> Vec<SparseAware> {
    let mut next = Vec::with_capacity(words.len() * coeffs.len());
    for t in coeffs {
        for w in words {
            next.push(t.product(w));
        }
    }
    next
}

fn word_products(coeffs: &[SparseAware], h: usize, n: usize) -> Vec<SparseAware> {
    let mut words = vec![SparseAware::new(identity(h))];
    for _ in 0..n {
        words = extend_words(coeffs, &words);
    }
    words
}

pub(crate) fn sparse_tower(rep: &CovariantRep, n_max: usize) -> Result<Vec<Vec<SparseAware>>> {
    check_degree(&rep.system, n_max)?;
    Ok(tower(&rep.system, &rep.factors, rep.h_dim, n_max))
}

/// Blocks of `T̃_0, …, T̃_{n_max}`.
pub fn t_tilde_tower(rep: &CovariantRep, n_max: usize) -> Result<Vec<Vec<CMatrix>>> {
    Ok(sparse_tower(rep, n_max)?
        .iter()
        .map(|level| level.iter().map(SparseAware::to_dense).collect())
        .collect())
}

pub(crate) fn sparse_blocks(rep: &CovariantRep, n: usize) -> Result<Vec<SparseAware>> {
    Ok(sparse_tower(rep, n)?.pop().expect("tower has n + 1 levels"))
}

/// Blocks of `T̃_n`.
pub fn t_tilde_blocks(rep: &CovariantRep, n: usize) -> Result<Vec<CMatrix>> {
    Ok(sparse_blocks(rep, n)?.iter().map(SparseAware::to_dense).collect())
}

/// The matrix of `T̃_n : X(n) ⊗ H → H`.
pub fn t_tilde_n(rep: &CovariantRep, n: usize) -> Result<CMatrix> {
    Ok(crate::linalg::hcat(&t_tilde_blocks(rep, n)?, rep.h_dim))
}

/// Blocks of `μ_n (V_n ⊗ I_H)`, computed from the word products.
///
/// Agrees with [`t_tilde_blocks`]; kept as an independent route.
pub fn t_tilde_via_products(rep: &CovariantRep, n: usize) -> Result<Vec<CMatrix>> {
    check_degree(&rep.system, n)?;
    let words = word_products(&rep.factors, rep.h_dim, n);
    let v = rep.system.isometry(n);
    Ok((0..v.ncols())
        .map(|alpha| {
            let mut acc = zeros(rep.h_dim, rep.h_dim);
            for (idx, w) in words.iter().enumerate() {
                let c = v[(idx, alpha)];
                if c != Complex64::new(0.0, 0.0) {
                    w.add_scaled_to(&mut acc, c);
                }
            }
            acc
        })
        .collect())
}

/// `max ‖T̃_n[α] T̃_m[β] − Σ_γ U[γ, (α, β)] T̃_{n+m}[γ]‖` with
/// `U = V_{n+m}*(V_n ⊗ V_m)`, the multiplication `X(n) ⊗ X(m) → X(n+m)`.
///
/// Zero for a representation: `T̃_n(I ⊗ T̃_m) = T̃_{n+m}(U_{n,m} ⊗ I)`.
pub fn product_residual(rep: &CovariantRep, n: usize, m: usize) -> Result<f64> {
    let sys = &rep.system;
    check_degree(sys, n + m)?;
    let levels = t_tilde_tower(rep, n + m)?;
    let u = sys.isometry(n + m).adjoint() * tensor_product(sys.isometry(n), sys.isometry(m));
    let mut worst: f64 = 0.0;
    for (alpha, a) in levels[n].iter().enumerate() {
        for (beta, b) in levels[m].iter().enumerate() {
            let col = alpha * sys.dim(m) + beta;
            let mut rhs = zeros(rep.h_dim, rep.h_dim);
            for (gamma, g) in levels[n + m].iter().enumerate() {
                rhs += g * u[(gamma, col)];
            }
            worst = worst.max(op_norm(&(a * b - rhs)));
        }
    }
    Ok(worst)
}

/// Row norm and relation residuals of a candidate representation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepValidation {
    pub row_norm: f64,
    /// `‖μ_n((I − p_n) ⊗ I_H)‖`, indexed by degree; entries 0 and 1 are 0.
    pub relation_residuals: Vec<f64>,
    pub valid: bool,
}

/// Checks contractivity of `T̃_1` and the relations `μ_n((I − p_n) ⊗ I) = 0`
/// for every degree `2 ≤ n ≤ N`.
pub fn validate_rep(sys: &SubproductSystem, coeffs: &[CMatrix], tol: f64) -> Result<RepValidation> {
    let h = check_coefficients(sys, coeffs)?;
    let n_max = sys.truncation();
    let factors: Vec<SparseAware> = coeffs.iter().cloned().map(SparseAware::new).collect();
    let levels = tower(sys, &factors, h, n_max);
    let mut relation_residuals = vec![0.0; n_max + 1];
    let mut words = extend_words(&factors, &[SparseAware::new(identity(h))]);
    for n in 2..=n_max {
        words = extend_words(&factors, &words);
        let v = sys.isometry(n);
        // μ_n − μ_n(V_n V_n* ⊗ I), word by word.
        let mut gram = zeros(h, h);
        for (idx, w) in words.iter().enumerate() {
            let mut terms = vec![(Complex64::new(1.0, 0.0), w)];
            for (alpha, t) in levels[n].iter().enumerate() {
                let c = v[(idx, alpha)].conj();
                if c != Complex64::new(0.0, 0.0) {
                    terms.push((-c, t));
                }
            }
            SparseAware::combine(h, h, &terms).add_gram_to(&mut gram);
        }
        relation_residuals[n] = top_root(&gram);
    }
    let row_norm = block_row_norm(coeffs, h);
    let valid = row_norm <= 1.0 + tol && relation_residuals.iter().all(|&r| r <= tol);
    Ok(RepValidation { row_norm, relation_residuals, valid })
}

/// `Θ_T(a) = Σ_i T_i a T_i*`.
pub fn theta(rep: &CovariantRep, a: &CMatrix) -> Result<CMatrix> {
    check_square(rep, a)?;
    Ok(theta_unchecked(rep, a))
}

fn theta_unchecked(rep: &CovariantRep, a: &CMatrix) -> CMatrix {
    let mut out = zeros(rep.h_dim, rep.h_dim);
    for t in &rep.factors {
        out += t.conjugate(a);
    }
    out
}

/// `Θ_T^k(a)` by repeated application of [`theta`].
pub fn theta_pow(rep: &CovariantRep, k: usize, a: &CMatrix) -> Result<CMatrix> {
    check_square(rep, a)?;
    let mut x = a.clone();
    for _ in 0..k {
        x = theta_unchecked(rep, &x);
    }
    Ok(x)
}

/// `T̃_k (I_{X(k)} ⊗ a) T̃_k*`, available for `k ≤ N`.
pub fn theta_pow_direct(rep: &CovariantRep, k: usize, a: &CMatrix) -> Result<CMatrix> {
    check_square(rep, a)?;
    let mut out = zeros(rep.h_dim, rep.h_dim);
    for t in sparse_blocks(rep, k)? {
        out += t.conjugate(a);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PurityTermination {
    /// `‖Θ^k(I)‖` fell below the tolerance.
    Vanished,
    /// The iterates stopped moving while still of non-negligible size.
    Stationary,
    /// `k_max` was reached first.
    KExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurityReport {
    /// The last iterate `Q_k = Θ^k(I)`.
    #[serde(skip)]
    pub q: CMatrix,
    pub q_norm: f64,
    pub is_pure: bool,
    pub k_used: usize,
    /// `‖Q_{k−1} − Q_k‖` at the last step (0 when no step was taken).
    pub last_step: f64,
    pub converged: bool,
    /// Whether `Q_{k+1} ≼ Q_k` held at every step.
    pub monotone: bool,
    pub termination: PurityTermination,
}

impl PurityReport {
    /// Turns a run that hit `k_max` into [`Error::NoConvergence`].
    pub fn require_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NoConvergence { k_used: self.k_used, step: self.last_step })
        }
    }

    /// Turns a non-pure verdict into [`Error::NotPure`].
    pub fn require_pure(&self) -> Result<()> {
        if self.is_pure {
            Ok(())
        } else {
            Err(Error::NotPure { q_norm: self.q_norm, k_used: self.k_used })
        }
    }
}

/// Iterates `Q_k = Θ^k(I)` towards the purity limit `Q`.
///
/// Stops as pure once `‖Q_k‖ ≤ tol`, and as stationary once a step moves by
/// at most `tol · ‖Q_k‖`. A geometric decay never looks stationary under
/// this relative test, so strict contractions run until they vanish.
pub fn purity(rep: &CovariantRep, tol: f64, k_max: usize) -> PurityReport {
    // Every iterate and every step is Hermitian, so norms come from eigenvalues.
    let spread = |a: &CMatrix| {
        let eig = hermitian_eigenvalues(a);
        let lo = eig.first().cloned().unwrap_or(0.0);
        let hi = eig.last().cloned().unwrap_or(0.0);
        (lo, lo.abs().max(hi.abs()))
    };
    let mut q = identity(rep.h_dim);
    let mut q_norm = 1.0;
    let mut last_step = 0.0;
    let mut monotone = true;
    let mut k = 0;
    let termination = loop {
        if q_norm <= tol {
            break PurityTermination::Vanished;
        }
        if k == k_max {
            break PurityTermination::KExhausted;
        }
        let next = theta_unchecked(rep, &q);
        let (lowest, step) = spread(&(&q - &next));
        if lowest < -MONOTONE_SLACK {
            monotone = false;
        }
        last_step = step;
        q = next;
        q_norm = spread(&q).1;
        k += 1;
        if last_step <= tol * q_norm {
            break if q_norm <= tol {
                PurityTermination::Vanished
            } else {
                PurityTermination::Stationary
            };
        }
    };
    PurityReport {
        q,
        q_norm,
        is_pure: q_norm <= tol,
        k_used: k,
        last_step,
        converged: termination != PurityTermination::KExhausted,
        monotone,
        termination,
    }
}

/// The defect operator and its range.
#[derive(Debug, Clone, PartialEq)]
pub struct Defect {
    /// `Δ*(T) = (I − T̃_1T̃_1*)^{1/2}`.
    pub delta: CMatrix,
    /// Closure of the range of `Δ*(T)`.
    pub space: Subspace,
}

/// `Δ*(T)` and the defect space `𝒟`.
pub fn defect(rep: &CovariantRep) -> Result<Defect> {
    let h = rep.h_dim;
    let gap = identity(h) - theta_unchecked(rep, &identity(h));
    let skew = op_norm(&(&gap - gap.adjoint()));
    if skew > 1e-9 {
        return Err(Error::NotHermitian { residual: skew });
    }
    let eig = SymmetricEigen::new(hermitian_part(&gap));
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -2.0 * ROW_NORM_SLACK {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let roots = eig
        .eigenvalues
        .map(|l| if l > DEFECT_EIG_FLOOR { real(l.sqrt()) } else { real(0.0) });
    let u = &eig.eigenvectors;
    let delta = u * CMatrix::from_diagonal(&roots) * u.adjoint();
    let space = range_isometry(&delta, RANK_TOL);
    Ok(Defect { delta, space })
}

/// Intertwining residuals of a Poisson kernel or factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntertwiningResidual {
    /// Worst residual over inputs supported on degrees `≤ N − 1`.
    pub restricted: f64,
    /// Residual on the top degree, where truncation breaks the identity.
    pub top_degree: f64,
}

/// The Poisson kernel `K(T) : H → F_X ⊗ 𝒟`.
#[derive(Debug, Clone)]
pub struct PoissonKernel {
    rep: CovariantRep,
    fock: FockBasis,
    defect: Defect,
    matrix: CMatrix,
}

impl PoissonKernel {
    pub fn fock(&self) -> &FockBasis {
        &self.fock
    }

    pub fn defect(&self) -> &Defect {
        &self.defect
    }

    pub fn defect_rank(&self) -> usize {
        self.defect.space.rank()
    }

    /// Rows indexed by `F_X ⊗ 𝒟`, columns by `H`.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// `‖K*K − (I − Θ^{N+1}(I))‖`.
    pub fn identity_residual(&self) -> f64 {
        let h = self.rep.h_dim;
        let n = self.fock.truncation();
        let tail = theta_pow(&self.rep, n + 1, &identity(h)).expect("square by construction");
        let gram = self.matrix.adjoint() * &self.matrix;
        op_norm(&(gram - (identity(h) - tail)))
    }

    /// `max_i ‖K*(S_i ⊗ I_𝒟) − T_i K*‖` on degrees `≤ N − 1`, with the
    /// top-degree defect reported separately.
    pub fn intertwining(&self) -> IntertwiningResidual {
        let q = self.defect_rank();
        let adj = self.matrix.adjoint();
        let mut out = IntertwiningResidual { restricted: 0.0, top_degree: 0.0 };
        for (i, t) in self.rep.factors.iter().enumerate() {
            let diff = self.fock.shift_right(i, q, &adj) - t.mul(&adj);
            out = split_by_degree(&self.fock, q, &diff, out);
        }
        out
    }

    /// `‖K*(S_n(ζ) ⊗ I_𝒟) − T_n(ζ)K*‖` on degrees `≤ N − n`, where
    /// `T_n(ζ) = T̃_n(ζ ⊗ ·)`.
    pub fn intertwining_n(&self, n: usize, zeta: &nalgebra::DVector<Complex64>) -> Result<f64> {
        let q = self.defect_rank();
        let s = tensor_product(&self.fock.shift_n(n, zeta)?, &identity(q));
        let mut t_zeta = zeros(self.rep.h_dim, self.rep.h_dim);
        for (alpha, b) in sparse_blocks(&self.rep, n)?.iter().enumerate() {
            b.add_scaled_to(&mut t_zeta, zeta[alpha]);
        }
        let adj = self.matrix.adjoint();
        let diff = &adj * s - t_zeta * &adj;
        let keep = self.fock.up_to_degree(self.fock.truncation() - n, q);
        Ok(op_norm(&diff.columns(0, keep.end).into_owned()))
    }

    /// `‖K‖`.
    pub fn norm(&self) -> f64 {
        op_norm(&self.matrix)
    }
}

// Folds the column split (degrees ≤ N − 1 versus degree N) of `diff` into `acc`.
pub(crate) fn split_by_degree(
    fock: &FockBasis,
    r: usize,
    diff: &CMatrix,
    acc: IntertwiningResidual,
) -> IntertwiningResidual {
    let n = fock.truncation();
    let low = fock.up_to_degree(n - 1, r).end;
    let top = fock.degree_range(n, r);
    IntertwiningResidual {
        restricted: acc.restricted.max(op_norm(&diff.columns(0, low).into_owned())),
        top_degree: acc
            .top_degree
            .max(op_norm(&diff.columns(top.start, top.len()).into_owned())),
    }
}

/// `K(T)h = Σ_n (I_{X(n)} ⊗ D*Δ*) T̃_n* h`, with `𝒟` compressed to its rank.
pub fn poisson_kernel(rep: &CovariantRep) -> Result<PoissonKernel> {
    let defect = defect(rep)?;
    let fock = rep.fock();
    let q = defect.space.rank();
    let h = rep.h_dim;
    let reduced = defect.space.basis().adjoint() * &defect.delta;
    let mut matrix = zeros(fock.total_dim() * q, h);
    if q > 0 {
        let levels = sparse_tower(rep, fock.truncation())?;
        let reduced_adj = reduced.adjoint();
        for (n, level) in levels.iter().enumerate() {
            let start = fock.degree_range(n, q).start;
            for (alpha, t) in level.iter().enumerate() {
                // (D*Δ) T̃_n[α]* = (T̃_n[α] (D*Δ)*)*.
                matrix.rows_mut(start + alpha * q, q).copy_from(&t.mul(&reduced_adj).adjoint());
            }
        }
    }
    Ok(PoissonKernel { rep: rep.clone(), fock, defect, matrix })
}

/// `max_i ‖(I − P_S) T_i P_S‖`.
pub fn invariance_residual(rep: &CovariantRep, s: &Subspace) -> Result<f64> {
    if s.ambient_dim() != rep.h_dim {
        return Err(Error::AmbientMismatch { expected: rep.h_dim, found: s.ambient_dim() });
    }
    let j = s.basis();
    let mut worst: f64 = 0.0;
    for t in &rep.factors {
        let image = t.mul(j);
        let inside = j * (j.adjoint() * &image);
        worst = worst.max(op_norm(&(image - inside)));
    }
    Ok(worst)
}

/// Compression `J* T_i J` without the invariance check.
pub(crate) fn compress(rep: &CovariantRep, s: &Subspace) -> Result<CovariantRep> {
    if s.is_zero() {
        return Err(Error::DegenerateInput("cannot restrict to the zero subspace".into()));
    }
    let j = s.basis();
    let coefficients = rep.coefficients.iter().map(|t| j.adjoint() * t * j).collect();
    CovariantRep::new(rep.system.clone(), coefficients)
}

/// The restriction `V_i = T_i|_S`, written in the basis of `S`.
pub fn restrict(rep: &CovariantRep, s: &Subspace) -> Result<CovariantRep> {
    let residual = invariance_residual(rep, s)?;
    if residual > INVARIANCE_TOL {
        return Err(Error::NotInvariant { residual });
    }
    compress(rep, s)
}

/// `tr Θ^k(I)` for `k = 0..=k_max`, by iteration.
pub(crate) fn theta_traces(rep: &CovariantRep, k_max: usize) -> Vec<f64> {
    let mut q = identity(rep.h_dim);
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(trace_re(&q));
    for _ in 0..k_max {
        q = theta_unchecked(rep, &q);
        out.push(trace_re(&q));
    }
    out
}
