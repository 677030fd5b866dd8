//! Invariant subspaces, their Poisson-kernel factorizations, and wandering
//! subspaces.
//!
//! Every identity here is exact on the infinite Fock module. After truncation
//! at degree `N`, two regimes behave differently. Nilpotent representations
//! (`T̃_n = 0` for some `n ≤ N`) satisfy them to rounding. Strict contractions
//! carry errors of order `‖T̃_1‖^{2(N+1)}`, which every result reports as a
//! residual.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    hcat, op_norm, range_isometry, subspace_distance, subspace_intersection, zeros, CMatrix,
    Subspace, RANK_TOL,
};
use crate::representation::{
    compress, invariance_residual, poisson_kernel, purity, sparse_tower, split_by_degree,
    CovariantRep, IntertwiningResidual, INVARIANCE_TOL, PURITY_K_MAX, PURITY_TOL,
};
use crate::subproduct::{FockBasis, SubproductSystem};

/// Tolerance for a subspace to count as wandering.
pub const WANDERING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvarianceReport {
    /// `max_i ‖(I − P_S) T_i P_S‖`.
    pub residual: f64,
    pub invariant: bool,
}

pub fn is_invariant(rep: &CovariantRep, s: &Subspace, tol: f64) -> Result<InvarianceReport> {
    let residual = invariance_residual(rep, s)?;
    Ok(InvarianceReport { residual, invariant: residual <= tol })
}

/// `Π : F_X ⊗ 𝒟' → H` with `ΠΠ* ≈ P_S`, together with its residuals.
#[derive(Debug, Clone, Serialize)]
pub struct FactorizationResult {
    #[serde(skip)]
    pub pi: CMatrix,
    /// `𝒟'`, the defect space of the restricted representation, inside `S`
    /// coordinates.
    #[serde(skip)]
    pub defect_space: Subspace,
    #[serde(skip)]
    pub subspace: Subspace,
    pub subspace_rank: usize,
    pub defect_rank: usize,
    /// `‖ΠΠ*Π − Π‖`.
    pub residual_partial_isometry: f64,
    /// `‖ΠΠ* − P_S‖`.
    pub residual_range: f64,
    /// `max_i ‖Π(S_i ⊗ I_𝒟') − T_iΠ‖` on degrees `≤ N − 1`.
    pub residual_intertwine: f64,
    /// The same residual on the top degree, a truncation diagnostic.
    pub residual_intertwine_top: f64,
    /// Invariance residual of `S` itself (nonzero only for the complement
    /// construction, where `S` is projected rather than checked).
    pub residual_invariance: f64,
    /// `‖(I − KK*) − ΠΠ*‖`, for [`complement_factor`] only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_complement: Option<f64>,
}

impl FactorizationResult {
    /// `ran Π`.
    pub fn range(&self) -> Subspace {
        range_isometry(&self.pi, RANK_TOL)
    }

    /// `(ker Π)^⊥ = ran Π*`.
    pub fn kernel_complement(&self) -> Subspace {
        range_isometry(&self.pi.adjoint(), RANK_TOL)
    }
}

// Π = J K(V)* for the compression V of `rep` to `s`.
fn build_factor(rep: &CovariantRep, s: &Subspace, residual_invariance: f64) -> Result<FactorizationResult> {
    let restricted = compress(rep, s)?;
    let kernel = poisson_kernel(&restricted)?;
    let q = kernel.defect_rank();
    let defect_space = kernel.defect().space.clone();
    let fock = kernel.fock().clone();
    let pi = s.basis() * kernel.matrix().adjoint();
    let ppt = &pi * pi.adjoint();
    let residual_partial_isometry = op_norm(&(&ppt * &pi - &pi));
    let residual_range = op_norm(&(&ppt - s.projection()));
    let mut tw = IntertwiningResidual { restricted: 0.0, top_degree: 0.0 };
    for (i, t) in rep.coefficients().iter().enumerate() {
        let diff = fock.shift_right(i, q, &pi) - t * &pi;
        tw = split_by_degree(&fock, q, &diff, tw);
    }
    Ok(FactorizationResult {
        pi,
        defect_space,
        subspace: s.clone(),
        subspace_rank: s.rank(),
        defect_rank: q,
        residual_partial_isometry,
        residual_range,
        residual_intertwine: tw.restricted,
        residual_intertwine_top: tw.top_degree,
        residual_invariance,
        residual_complement: None,
    })
}

/// Factors `P_S = ΠΠ*` through the Poisson kernel of `T|_S`, for a pure
/// representation and a nonzero invariant subspace `S`.
///
/// At truncation `ΠΠ* = J(I − Θ_V^{N+1}(I))J*`, so `residual_range` equals
/// `‖Θ_V^{N+1}(I)‖`.
pub fn factorization(rep: &CovariantRep, s: &Subspace) -> Result<FactorizationResult> {
    if s.ambient_dim() != rep.h_dim() {
        return Err(Error::AmbientMismatch { expected: rep.h_dim(), found: s.ambient_dim() });
    }
    if s.is_zero() {
        return Err(Error::TrivialSubspace);
    }
    let residual = invariance_residual(rep, s)?;
    if residual > INVARIANCE_TOL {
        return Err(Error::NotInvariant { residual });
    }
    purity(rep, PURITY_TOL, PURITY_K_MAX).require_pure()?;
    build_factor(rep, s, residual)
}

/// Inner factor of an invariant subspace of the induced shift `S ⊗ I_r`.
///
/// `residual_intertwine` is the multi-analyticity residual
/// `Π(S_i ⊗ I_𝒟') − (S_i ⊗ I_r)Π` on degrees `≤ N − 1`.
pub fn beurling(sys: &std::sync::Arc<SubproductSystem>, r: usize, s: &Subspace) -> Result<FactorizationResult> {
    let fock = FockBasis::new(sys.clone());
    let shift = CovariantRep::induced_shift(&fock, r)?;
    factorization(&shift, s)
}

/// Factors `I − K(T)K(T)* = ΠΠ*` through the complement of `ran K(T)` in
/// `F_X ⊗ 𝒟`.
///
/// The complement is shift-invariant only up to a top-degree truncation
/// effect. It is compressed as is, and the invariance residual is reported.
pub fn complement_factor(rep: &CovariantRep) -> Result<FactorizationResult> {
    purity(rep, PURITY_TOL, PURITY_K_MAX).require_pure()?;
    let kernel = poisson_kernel(rep)?;
    let q = kernel.defect_rank();
    let k = kernel.matrix();
    let ambient = k.nrows();
    let kkt = k * k.adjoint();
    let gap = CMatrix::identity(ambient, ambient) - &kkt;
    let complement = range_isometry(k, RANK_TOL).orthogonal_complement();
    if complement.is_zero() || q == 0 {
        let residual = op_norm(&gap);
        return Ok(FactorizationResult {
            pi: zeros(ambient, 0),
            defect_space: Subspace::zero(0),
            subspace: complement,
            subspace_rank: 0,
            defect_rank: 0,
            residual_partial_isometry: 0.0,
            residual_range: 0.0,
            residual_intertwine: 0.0,
            residual_intertwine_top: 0.0,
            residual_invariance: 0.0,
            residual_complement: Some(residual),
        });
    }
    let shift = CovariantRep::induced_shift(kernel.fock(), q)?;
    let residual_invariance = invariance_residual(&shift, &complement)?;
    let mut fact = build_factor(&shift, &complement, residual_invariance)?;
    fact.residual_complement = Some(op_norm(&(gap - &fact.pi * fact.pi.adjoint())));
    Ok(fact)
}

fn generated_pieces(rep: &CovariantRep, w: &Subspace, n_max: usize) -> Result<Vec<Subspace>> {
    if w.ambient_dim() != rep.h_dim() {
        return Err(Error::AmbientMismatch { expected: rep.h_dim(), found: w.ambient_dim() });
    }
    let levels = sparse_tower(rep, n_max)?;
    Ok(levels
        .iter()
        .map(|level| {
            if w.is_zero() {
                return Subspace::zero(rep.h_dim());
            }
            let images: Vec<CMatrix> = level.iter().map(|t| t.mul(w.basis())).collect();
            range_isometry(&hcat(&images, rep.h_dim()), RANK_TOL)
        })
        .collect())
}

/// `𝔏_n(W) = ⋁_ζ T_n(ζ)W`, spanned by the blocks `T̃_n[α] W`.
pub fn l_n(rep: &CovariantRep, w: &Subspace, n: usize) -> Result<Subspace> {
    Ok(generated_pieces(rep, w, n)?.pop().expect("n + 1 pieces"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WanderingReport {
    /// `max_{1 ≤ n ≤ N} ‖P_W P_{𝔏_n(W)}‖`.
    pub residual: f64,
    pub wandering: bool,
}

pub fn is_wandering(rep: &CovariantRep, w: &Subspace, tol: f64) -> Result<WanderingReport> {
    let pieces = generated_pieces(rep, w, rep.system().truncation())?;
    let residual = pieces
        .iter()
        .skip(1)
        .map(|l| op_norm(&(w.basis().adjoint() * l.basis())))
        .fold(0.0, f64::max);
    Ok(WanderingReport { residual, wandering: residual <= tol })
}

/// `S ⊖ 𝔏_1(S)` for an invariant subspace `S`.
pub fn wandering_of_invariant(rep: &CovariantRep, s: &Subspace) -> Result<Subspace> {
    let residual = invariance_residual(rep, s)?;
    if residual > INVARIANCE_TOL {
        return Err(Error::NotInvariant { residual });
    }
    s.minus(&l_n(rep, s, 1)?)
}

/// `⋁_{n ≤ N} 𝔏_n(W)`.
pub fn generated_subspace(rep: &CovariantRep, w: &Subspace) -> Result<Subspace> {
    let pieces = generated_pieces(rep, w, rep.system().truncation())?;
    Subspace::join(&pieces)
}

/// `‖P_W − P_{G ⊖ 𝔏_1(G)}‖` with `G` the subspace generated by a wandering `W`.
pub fn wandering_recovery_check(rep: &CovariantRep, w: &Subspace) -> Result<f64> {
    let report = is_wandering(rep, w, WANDERING_TOL)?;
    if !report.wandering {
        return Err(Error::NotWandering { residual: report.residual });
    }
    let g = generated_subspace(rep, w)?;
    let recovered = g.minus(&l_n(rep, &g, 1)?)?;
    subspace_distance(w, &recovered)
}

/// Both descriptions of the wandering subspace of `ran Π`.
#[derive(Debug, Clone, Serialize)]
pub struct WanderingFromFactor {
    /// `ran Π ⊖ 𝔏_1(ran Π)`.
    #[serde(skip)]
    pub w_direct: Subspace,
    /// `Π((ker Π)^⊥ ∩ degree-0 slice)`.
    #[serde(skip)]
    pub w_factor: Subspace,
    /// `(ker Π)^⊥ ∩ degree-0 slice`, inside `F_X ⊗ 𝒟'`.
    #[serde(skip)]
    pub source: Subspace,
    pub rank_direct: usize,
    pub rank_factor: usize,
    /// `‖P_{w_direct} − P_{w_factor}‖`.
    pub distance: f64,
    /// Distance between the subspace generated by `w_direct` under `T` and
    /// the image under `Π` of the one generated by the source under the shift.
    pub generated_distance: f64,
    /// Wandering residual of the source for `S ⊗ I_𝒟'`.
    pub source_wandering_residual: f64,
}

pub fn wandering_from_factor(rep: &CovariantRep, fact: &FactorizationResult) -> Result<WanderingFromFactor> {
    let range = fact.range();
    let w_direct = wandering_of_invariant(rep, &range)?;
    let q = fact.defect_rank;
    let fock = rep.fock();
    let ambient = fact.pi.ncols();
    let slice = Subspace::coordinate(ambient, fock.degree_range(0, q));
    let source = subspace_intersection(&[fact.kernel_complement(), slice])?;
    let w_factor = source.image(&fact.pi)?;
    let distance = subspace_distance(&w_direct, &w_factor)?;
    let (generated_distance, source_wandering_residual) = if q == 0 {
        (op_norm(&generated_subspace(rep, &w_direct)?.projection()), 0.0)
    } else {
        let shift = CovariantRep::induced_shift(&fock, q)?;
        let lhs = generated_subspace(rep, &w_direct)?;
        let rhs = generated_subspace(&shift, &source)?.image(&fact.pi)?;
        let residual = is_wandering(&shift, &source, WANDERING_TOL)?.residual;
        (subspace_distance(&lhs, &rhs)?, residual)
    };
    Ok(WanderingFromFactor {
        rank_direct: w_direct.rank(),
        rank_factor: w_factor.rank(),
        w_direct,
        w_factor,
        source,
        distance,
        generated_distance,
        source_wandering_residual,
    })
}
