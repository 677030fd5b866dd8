//! Curvature of a covariant representation.
//!
//! `Curv(T) = lim_k A_k / B_k` with `A_k = tr(I − Θ^k(I)) = Σ_{j<k} a_j` and
//! `B_k = Σ_{j<k} dim X(j)`. The limit is detected from the increments
//! `a_j / b_j`, which converge to the same value whenever `B_k → ∞`.
//!
//! An infinite curvature needs an infinite-rank defect, which cannot occur in
//! finite dimension, so every estimate here is finite or undefined.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariant::complement_factor;
use crate::linalg::{identity, min_eigenvalue, op_norm, tensor_product, trace_re, CMatrix};
use crate::representation::{
    poisson_kernel, purity, sparse_block_row_norm, sparse_blocks, sparse_tower, theta_pow,
    theta_traces, CovariantRep, PURITY_K_MAX, PURITY_TOL,
};
use crate::subproduct::{FockBasis, SystemKind};

const TRACE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureMethod {
    Direct,
    ClosedForm,
    Poisson,
    Complement,
}

impl CurvatureMethod {
    pub const ALL: [CurvatureMethod; 4] =
        [CurvatureMethod::Direct, CurvatureMethod::ClosedForm, CurvatureMethod::Poisson, CurvatureMethod::Complement];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    KExhausted,
    /// The dimensions reached zero, so `B_k` stays bounded and the limit
    /// carries no information.
    DenominatorBounded,
}

/// When a ratio sequence counts as converged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePolicy {
    /// Number of trailing ratios compared.
    pub window: usize,
    /// Largest allowed spread among them.
    pub eps: f64,
}

impl Default for ConvergencePolicy {
    fn default() -> Self {
        Self { window: 4, eps: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub method: CurvatureMethod,
    pub estimate: Option<f64>,
    pub k_used: usize,
    /// `a_j` for `j < k_used`.
    pub numerator_terms: Vec<f64>,
    /// `b_j` for `j < k_used`.
    pub denominator_terms: Vec<f64>,
    /// `A_k` for `k = 1..=k_used`.
    pub partial_numerators: Vec<f64>,
    /// `B_k` for `k = 1..=k_used`.
    pub partial_denominators: Vec<f64>,
    /// `a_j / b_j`.
    pub ratios: Vec<f64>,
    pub termination: Termination,
    /// Set when `Θ` was iterated past the truncation degree.
    pub beyond_truncation: bool,
    /// Known bound on the deviation of the numerators from `tr(I − Θ^k(I))`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_budget: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CurvatureReport {
    /// `A_k / B_k` for `k = 1..=k_used`.
    pub fn partial_quotients(&self) -> Vec<f64> {
        self.partial_numerators.iter().zip(&self.partial_denominators).map(|(a, b)| a / b).collect()
    }
}

/// The last ratio `a_j / b_j`, provided the trailing `window` ratios lie
/// within `eps` of each other.
pub fn limit_ratio(a: &[f64], b: &[f64], window: usize, eps: f64) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("{} numerators, {} denominators", a.len(), b.len())));
    }
    if let Some((index, &value)) = b.iter().enumerate().find(|(_, &v)| v.is_nan() || v <= 0.0) {
        return Err(Error::NonpositiveDenominator { index, value });
    }
    let window = window.max(1);
    if a.len() < window {
        return Ok(None);
    }
    let tail: Vec<f64> = a[a.len() - window..].iter().zip(&b[b.len() - window..]).map(|(x, y)| x / y).collect();
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(if hi - lo <= eps { tail.last().copied() } else { None })
}

fn assemble(
    method: CurvatureMethod,
    mut a: Vec<f64>,
    mut b: Vec<f64>,
    policy: ConvergencePolicy,
    mut notes: Vec<String>,
) -> Result<CurvatureReport> {
    let mut bounded = false;
    if let Some(j) = b.iter().position(|&v| v <= 0.0) {
        notes.push(format!("dim X({j}) = 0; the denominators stay bounded"));
        a.truncate(j);
        b.truncate(j);
        bounded = true;
    }
    let mut partial_numerators = Vec::with_capacity(a.len());
    let mut partial_denominators = Vec::with_capacity(b.len());
    let (mut sa, mut sb) = (0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        sa += x;
        sb += y;
        partial_numerators.push(sa);
        partial_denominators.push(sb);
    }
    let ratios = a.iter().zip(&b).map(|(x, y)| x / y).collect();
    let (estimate, termination) = if bounded {
        (None, Termination::DenominatorBounded)
    } else {
        match limit_ratio(&a, &b, policy.window, policy.eps)? {
            Some(l) => (Some(l), Termination::Converged),
            None => (None, Termination::KExhausted),
        }
    };
    Ok(CurvatureReport {
        method,
        estimate,
        k_used: a.len(),
        numerator_terms: a,
        denominator_terms: b,
        partial_numerators,
        partial_denominators,
        ratios,
        termination,
        beyond_truncation: false,
        residual_budget: None,
        notes,
    })
}

fn dims_as_f64(rep: &CovariantRep, k: usize) -> Vec<f64> {
    (0..k).map(|j| rep.system().dim(j) as f64).collect()
}

/// Curvature from the traces of the iterates `Θ^j(I)`.
///
/// `k_max` defaults to `N`. Larger values iterate `Θ` past the truncation and
/// need a closed dimension formula; without one the run stops at `N + 1`.
pub fn curvature_direct(rep: &CovariantRep, k_max: Option<usize>, policy: ConvergencePolicy) -> Result<CurvatureReport> {
    let sys = rep.system();
    let n = sys.truncation();
    let mut k = k_max.unwrap_or(n);
    let mut notes = Vec::new();
    let mut b = Vec::with_capacity(k);
    for j in 0..k {
        match sys.dim_formula(j) {
            Some(dim) => b.push(dim as f64),
            None => {
                notes.push(format!("no dimension formula past degree {n}; stopped at k = {j}"));
                k = j;
                break;
            }
        }
    }
    let traces = theta_traces(rep, k);
    let a = (0..k).map(|j| traces[j] - traces[j + 1]).collect();
    let mut report = assemble(CurvatureMethod::Direct, a, b, policy, notes)?;
    report.beyond_truncation = k > n;
    Ok(report)
}

/// How the closed form treats a product system of a given left dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFormBranch {
    /// `d > 1`: `Curv = (d − 1) lim A_k / d^k`.
    Geometric,
    /// `d = 1`: `Curv = lim a_k`.
    Unimodular,
}

/// Selects the closed-form branch. Left dimensions below one have no closed
/// form here; over scalar coefficients they cannot arise.
pub fn closed_form_branch(left_dim: f64) -> Result<ClosedFormBranch> {
    if left_dim > 1.0 {
        Ok(ClosedFormBranch::Geometric)
    } else if left_dim == 1.0 {
        Ok(ClosedFormBranch::Unimodular)
    } else {
        Err(Error::UnsupportedCase(format!("closed form for left dimension {left_dim} < 1")))
    }
}

/// Curvature for the product system `X(n) = E^⊗n`, where `b_k = d^k`.
///
/// The increments are taken from the direct forms `tr T̃_kT̃_k*`, independent
/// of the iterated `Θ` used by [`curvature_direct`].
pub fn curvature_closed_form(rep: &CovariantRep, policy: ConvergencePolicy) -> Result<CurvatureReport> {
    let sys = rep.system();
    let d = sys.d();
    let n = sys.truncation();
    let is_product = sys.kind() == SystemKind::Full
        || (0..=n).all(|j| d.checked_pow(j as u32) == Some(sys.dim(j)));
    if !is_product {
        return Err(Error::NotProductSystem);
    }
    let branch = closed_form_branch(d as f64)?;
    let levels = sparse_tower(rep, n)?;
    // tr T̃_kT̃_k* is the squared Frobenius norm of the row.
    let c: Vec<f64> =
        levels.iter().map(|level| level.iter().map(|t| t.norm_squared()).sum()).collect();
    let a = (0..n).map(|j| c[j] - c[j + 1]).collect();
    let b = (0..n).map(|j| (d as f64).powi(j as i32)).collect();
    let mut report = assemble(CurvatureMethod::ClosedForm, a, b, policy, Vec::new())?;
    if report.estimate.is_some() && branch == ClosedFormBranch::Geometric {
        let k = report.k_used;
        let a_k = report.partial_numerators[k - 1];
        report.estimate = Some((d as f64 - 1.0) * a_k / (d as f64).powi(k as i32));
    }
    Ok(report)
}

// Clamps k_max to the truncation degree for the Fock-space methods.
fn fock_k_max(rep: &CovariantRep, k_max: Option<usize>, notes: &mut Vec<String>) -> usize {
    let n = rep.system().truncation();
    match k_max {
        Some(k) if k > n => {
            notes.push(format!("k_max = {k} exceeds the truncation; clamped to {n}"));
            n
        }
        Some(k) => k,
        None => n,
    }
}

// tr(M ((I − Θ_S^k(I)) ⊗ I_q)) for k = 1..=k_max, with M given by its
// diagonal degree blocks.
fn fock_numerators(fock: &FockBasis, q: usize, blocks: &[CMatrix], k_max: usize) -> Vec<f64> {
    let eye_q = identity(q);
    (1..=k_max)
        .map(|k| {
            let theta = fock.shift_theta_diagonal(k);
            blocks
                .iter()
                .zip(&theta)
                .map(|(m, t)| {
                    let gap = tensor_product(&(identity(t.nrows()) - t), &eye_q);
                    trace_re(&(gap * m))
                })
                .sum()
        })
        .collect()
}

fn increments(numerators: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    numerators
        .iter()
        .map(|&x| {
            let step = x - prev;
            prev = x;
            step
        })
        .collect()
}

fn degree_blocks(fock: &FockBasis, q: usize, m: &CMatrix) -> Vec<CMatrix> {
    (0..=fock.truncation())
        .map(|n| {
            let r = fock.degree_range(n, q);
            m.view((r.start, r.start), (r.len(), r.len())).into_owned()
        })
        .collect()
}

/// Curvature with numerators `tr(K*(I − Θ_{S⊗I}^k(I))K)` on `F_X ⊗ 𝒟`.
pub fn curvature_via_poisson(rep: &CovariantRep, k_max: Option<usize>, policy: ConvergencePolicy) -> Result<CurvatureReport> {
    purity(rep, PURITY_TOL, PURITY_K_MAX).require_pure()?;
    let mut notes = Vec::new();
    let k = fock_k_max(rep, k_max, &mut notes);
    let kernel = poisson_kernel(rep)?;
    let q = kernel.defect_rank();
    let gram = kernel.matrix() * kernel.matrix().adjoint();
    let blocks = degree_blocks(kernel.fock(), q, &gram);
    let numerators = fock_numerators(kernel.fock(), q, &blocks, k);
    let mut report = assemble(CurvatureMethod::Poisson, increments(&numerators), dims_as_f64(rep, k), policy, notes)?;
    report.residual_budget = Some(kernel.identity_residual());
    Ok(report)
}

/// Curvature with numerators `tr((I − ΠΠ*)(I − Θ_{S⊗I}^k(I)))`, where `Π`
/// comes from [`complement_factor`].
///
/// The residual budget is `‖(I − KK*) − ΠΠ*‖`, which bounds the error of each
/// ratio `A_k / B_k`.
pub fn curvature_via_complement(rep: &CovariantRep, k_max: Option<usize>, policy: ConvergencePolicy) -> Result<CurvatureReport> {
    let mut notes = Vec::new();
    let k = fock_k_max(rep, k_max, &mut notes);
    let fact = complement_factor(rep)?;
    let fock = rep.fock();
    let q = fact.pi.nrows() / fock.total_dim();
    let gap = identity(fact.pi.nrows()) - &fact.pi * fact.pi.adjoint();
    let blocks = degree_blocks(&fock, q, &gap);
    let numerators = fock_numerators(&fock, q, &blocks, k);
    let mut report =
        assemble(CurvatureMethod::Complement, increments(&numerators), dims_as_f64(rep, k), policy, notes)?;
    report.residual_budget = fact.residual_complement;
    Ok(report)
}

/// Runs one method with the shared options.
pub fn curvature(
    rep: &CovariantRep,
    method: CurvatureMethod,
    k_max: Option<usize>,
    policy: ConvergencePolicy,
) -> Result<CurvatureReport> {
    match method {
        CurvatureMethod::Direct => curvature_direct(rep, k_max, policy),
        CurvatureMethod::ClosedForm => curvature_closed_form(rep, policy),
        CurvatureMethod::Poisson => curvature_via_poisson(rep, k_max, policy),
        CurvatureMethod::Complement => curvature_via_complement(rep, k_max, policy),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceInequality {
    /// `tr Θ^n(x)`.
    pub lhs: f64,
    /// `‖T̃_n‖² · dim X(n) · tr x`.
    pub rhs: f64,
    pub slack: f64,
    pub passes: bool,
}

/// Checks `tr Θ^n(x) ≤ ‖T̃_n‖² dim X(n) tr x` for a positive `x`.
pub fn trace_inequality_check(rep: &CovariantRep, x: &CMatrix, n: usize) -> Result<TraceInequality> {
    let skew = op_norm(&(x - x.adjoint()));
    if skew > TRACE_SLACK {
        return Err(Error::NotHermitian { residual: skew });
    }
    let lhs = trace_re(&theta_pow(rep, n, x)?);
    let min = min_eigenvalue(x);
    if min < -TRACE_SLACK {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let norm = sparse_block_row_norm(&sparse_blocks(rep, n)?, rep.h_dim());
    let rhs = norm * norm * rep.system().dim(n) as f64 * trace_re(x);
    Ok(TraceInequality { lhs, rhs, slack: rhs - lhs, passes: lhs <= rhs + TRACE_SLACK })
}
