//! Seeded random instances shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subfock::linalg::{cplx, identity, zeros, CMatrix, Subspace};
use subfock::representation::CovariantRep;
use subfock::subproduct::{full_system, symmetric_system, SubproductSystem, SystemKind};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_like(rng: &mut ChaCha8Rng) -> Complex64 {
    cplx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian_like(rng))
}

pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    random_matrix(rng, n, n).qr().q()
}

/// Random PSD matrix of the given size and rank.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> CMatrix {
    let g = random_matrix(rng, n, rank);
    &g * g.adjoint()
}

/// Which kind of row contraction to draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Class {
    /// Strictly upper triangular in a rotated basis: `T̃_h = 0`.
    Nilpotent,
    /// Row norm exactly `ρ`.
    Strict(f64),
}

/// A representation with a known nonzero invariant subspace.
pub struct Instance {
    pub rep: CovariantRep,
    pub invariant: Subspace,
    pub row_norm: f64,
}

fn pattern(rng: &mut ChaCha8Rng, h: usize, m: usize, class: Class) -> CMatrix {
    DMatrix::from_fn(h, h, |r, c| {
        let keep = match class {
            Class::Nilpotent => r < c,
            Class::Strict(_) => !(r >= m && c < m),
        };
        if keep {
            gaussian_like(rng)
        } else {
            cplx(0.0, 0.0)
        }
    })
}

/// Coefficients compatible with `sys`: independent for product systems,
/// polynomials in one matrix (hence commuting) otherwise.
pub fn instance(rng: &mut ChaCha8Rng, sys: &Arc<SubproductSystem>, h: usize, class: Class) -> Instance {
    let d = sys.d();
    let m = if h > 1 { rng.gen_range(1..h) } else { 1 };
    let raw: Vec<CMatrix> = if sys.kind() == SystemKind::Full {
        (0..d).map(|_| pattern(rng, h, m, class)).collect()
    } else {
        let a = pattern(rng, h, m, class);
        let powers = [identity(h), a.clone(), &a * &a, &a * &a * &a];
        let first = if class == Class::Nilpotent { 1 } else { 0 };
        (0..d)
            .map(|_| {
                let mut t = zeros(h, h);
                for p in &powers[first..] {
                    t += p * gaussian_like(rng);
                }
                t
            })
            .collect()
    };
    let u = random_unitary(rng, h);
    let rotated: Vec<CMatrix> = raw.iter().map(|t| &u * t * u.adjoint()).collect();
    let norm = subfock::linalg::op_norm(&subfock::linalg::hcat(&rotated, h));
    let target = match class {
        Class::Nilpotent => rng.gen_range(0.5..1.0),
        Class::Strict(rho) => rho,
    };
    let coeffs = if norm > 0.0 {
        rotated.iter().map(|t| t * cplx(target / norm, 0.0)).collect()
    } else {
        rotated
    };
    let rep = CovariantRep::new(sys.clone(), coeffs).unwrap();
    let invariant = Subspace::from_orthonormal(u.columns(0, m).into_owned()).unwrap();
    let row_norm = rep.row_norm();
    Instance { rep, invariant, row_norm }
}

/// Full or symmetric system, chosen by `symmetric`.
pub fn system(symmetric: bool, d: usize, n: usize) -> Arc<SubproductSystem> {
    Arc::new(if symmetric { symmetric_system(d, n).unwrap() } else { full_system(d, n).unwrap() })
}
