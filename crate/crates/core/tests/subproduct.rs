mod common;

use std::sync::Arc;

use proptest::prelude::*;

use common::{random_matrix, rng};
use rand::Rng;
use subfock::linalg::{identity, op_norm, subspace_distance, zeros, Subspace};
use subfock::subproduct::{
    degree2_system, full_system, symmetric_system, symmetrizer, validate_system, FockBasis, SubproductSystem,
};

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

fn systems() -> Vec<SubproductSystem> {
    let s = 1.0 / 2f64.sqrt();
    let mut anti = zeros(4, 1);
    anti[(1, 0)] = subfock::linalg::real(s);
    anti[(2, 0)] = subfock::linalg::real(-s);
    vec![
        full_system(1, 6).unwrap(),
        full_system(2, 5).unwrap(),
        full_system(3, 3).unwrap(),
        symmetric_system(2, 8).unwrap(),
        symmetric_system(3, 5).unwrap(),
        degree2_system(2, 5, &Subspace::span(&anti)).unwrap(),
    ]
}

#[test]
fn every_constructed_system_is_compatible() {
    for sys in systems() {
        let v = validate_system(&sys, 1e-9);
        assert!(v.passes, "dims {:?}: residual {:.3e}", v.dims, v.max_residual);
    }
}

#[test]
fn symmetric_projection_matches_the_symmetrizer() {
    // The permutation-sum symmetrizer is an independent route to p_n.
    for (d, n) in [(2, 4), (3, 3), (2, 6)] {
        let sys = symmetric_system(d, n).unwrap();
        for k in 0..=n {
            let diff = sys.projection(k) - symmetrizer(d, k);
            assert!(op_norm(&diff) < 1e-12, "d={d} n={k}");
            assert_eq!(sys.dim(k) as u64, binomial((k + d - 1) as u64, k as u64));
        }
    }
}

#[test]
fn row_of_shifts_is_a_coisometry_above_the_vacuum() {
    for sys in systems() {
        let fock = FockBasis::new(Arc::new(sys));
        let total = fock.total_dim();
        let mut sum = zeros(total, total);
        for s in fock.shift_matrices() {
            sum += &s * s.adjoint();
        }
        let mut want = identity(total);
        let dim0 = fock.offsets()[1];
        for k in 0..dim0 {
            want[(k, k)] = subfock::linalg::real(0.0);
        }
        // Degrees with dim X(n) = 0 contribute no rows, so the projection is
        // onto the surviving degrees ≥ 1.
        assert!(op_norm(&(sum - want)) < 1e-9);
    }
}

#[test]
fn degree2_with_symmetric_square_reproduces_symmetric_system() {
    for d in 1..=3 {
        let x2 = Subspace::span(&symmetrizer(d, 2));
        let n = if d == 3 { 4 } else { 6 };
        let a = degree2_system(d, n, &x2).unwrap();
        let b = symmetric_system(d, n).unwrap();
        for k in 0..=n {
            let sa = Subspace::span(a.isometry(k));
            let sb = Subspace::span(b.isometry(k));
            assert!(subspace_distance(&sa, &sb).unwrap() <= 1e-9);
        }
    }
}

#[test]
fn single_generator_shift_is_the_unilateral_shift() {
    let fock = FockBasis::new(Arc::new(full_system(1, 5).unwrap()));
    let s = &fock.shift_matrices()[0];
    let mut want = zeros(6, 6);
    for k in 0..5 {
        want[(k + 1, k)] = subfock::linalg::real(1.0);
    }
    assert_eq!(s, &want);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shift_n_is_a_product_of_single_shifts(seed in any::<u64>(), sym in any::<bool>(), n in 1usize..4) {
        // S_n(ζ) for ζ = p_n(e_w) equals S(e_{w_1}) ⋯ S(e_{w_n}).
        let d = 2;
        let sys = Arc::new(if sym { symmetric_system(d, 5).unwrap() } else { full_system(d, 4).unwrap() });
        let fock = FockBasis::new(sys.clone());
        let shifts = fock.shift_matrices();
        let mut r = rng(seed);
        let word: Vec<usize> = (0..n).map(|_| r.gen_range(0..d)).collect();
        let mut index = 0;
        for &i in &word {
            index = index * d + i;
        }
        let zeta = sys.isometry(n).row(index).adjoint();
        let mut product = identity(fock.total_dim());
        for &i in word.iter().rev() {
            product = &shifts[i] * product;
        }
        let got = fock.shift_n(n, &zeta).unwrap();
        prop_assert!(op_norm(&(got - product)) < 1e-12);
    }

    #[test]
    fn left_and_right_block_shifts_match_dense_products(seed in any::<u64>(), r in 1usize..3) {
        let fock = FockBasis::new(Arc::new(symmetric_system(2, 4).unwrap()));
        let total = fock.total_dim() * r;
        let mut g = rng(seed);
        let x = random_matrix(&mut g, total, 3);
        let y = random_matrix(&mut g, 3, total);
        for (i, s) in fock.shift_matrices().iter().enumerate() {
            let big = subfock::linalg::tensor_product(s, &identity(r));
            prop_assert!(op_norm(&(fock.shift_left(i, r, &x) - &big * &x)) < 1e-12);
            prop_assert!(op_norm(&(fock.shift_right(i, r, &y) - &y * &big)) < 1e-12);
        }
    }
}
