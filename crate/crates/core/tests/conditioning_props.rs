use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use traitgeo::conditioning::{
    condition_c0, condition_c1, condition_c2, condition_c3, condition_c4, condition_c5, gram,
};
use traitgeo::diagnostics::{max_offdiag_abs_cos, signal_retention};
use traitgeo::directions::random_direction_set;
use traitgeo::linalg::orthonormality_defect;
use traitgeo::{apply_condition, ConditioningSpec, DirectionSet, Error};

fn max_entry_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

fn vecs(set: &traitgeo::ConditionedSet) -> &DMatrix<f64> {
    set.directions.vectors()
}

/// Rows at 0°, 40° and 75° in the first plane plus a small third component.
fn skewed_three() -> DirectionSet {
    let rows: Vec<Vec<f64>> = [0.0_f64, 40.0, 75.0]
        .iter()
        .enumerate()
        .map(|(i, deg)| {
            let r = deg.to_radians();
            vec![r.cos(), r.sin(), 0.1 * i as f64, 0.0]
        })
        .collect();
    traitgeo::directions::normalize_rows(&DirectionSet::from_rows(&rows).unwrap()).unwrap()
}

#[test]
fn c5_orthonormal_on_random_sets() {
    for seed in 0..20 {
        let x = random_direction_set(5, 512, seed).unwrap();
        for out in [condition_c5(&x).unwrap(), condition_c1(&x, 0.0).unwrap()] {
            assert!(max_offdiag_abs_cos(&out.directions).unwrap() < 1e-8);
            assert!(orthonormality_defect(vecs(&out)) < 1e-8);
        }
    }
}

#[test]
fn limit_identities() {
    for seed in 100..130 {
        let x = random_direction_set(4, 6, seed).unwrap();
        let c0 = condition_c0(&x).unwrap();
        assert!(max_entry_diff(vecs(&condition_c1(&x, 1.0).unwrap()), vecs(&c0)) < 1e-8);
        assert!(
            max_entry_diff(vecs(&condition_c1(&x, 0.0).unwrap()), vecs(&condition_c5(&x).unwrap()))
                < 1e-8
        );
        for tau in [0.0, 0.2, 0.5, 1.0] {
            let c3 = condition_c3(&x, tau, Some(&[2, 0, 3, 1])).unwrap();
            let c4 = condition_c4(&x, 1.0, tau, Some(&[2, 0, 3, 1])).unwrap();
            assert!(max_entry_diff(vecs(&c3), vecs(&c4)) < 1e-12);
            let c4_zero = condition_c4(&x, 0.0, tau, Some(&[2, 0, 3, 1])).unwrap();
            assert!(max_entry_diff(vecs(&c4_zero), vecs(&c0)) < 1e-12);
        }
        assert!(max_entry_diff(vecs(&condition_c3(&x, 1.0, None).unwrap()), vecs(&c0)) < 1e-8);
        let order = [3, 1, 0, 2];
        assert!(
            max_entry_diff(
                vecs(&condition_c3(&x, 0.0, Some(&order)).unwrap()),
                vecs(&condition_c2(&x, Some(&order)).unwrap())
            ) < 1e-8
        );
    }
}

#[test]
fn c2_depends_on_order() {
    let x = skewed_three();
    let a = condition_c2(&x, Some(&[0, 1, 2])).unwrap();
    let b = condition_c2(&x, Some(&[2, 1, 0])).unwrap();
    assert!(max_entry_diff(vecs(&a), vecs(&b)) > 0.1);
}

#[test]
fn span_preserved() {
    for seed in 0..10 {
        let x = random_direction_set(4, 9, seed).unwrap();
        for out in [
            condition_c2(&x, None).unwrap(),
            condition_c3(&x, 0.0, None).unwrap(),
            condition_c5(&x).unwrap(),
        ] {
            // Output rows are orthonormal, so the projector is Qᵀ Q.
            let q = vecs(&out);
            let residual = x.vectors() - x.vectors() * q.transpose() * q;
            assert!(residual.abs().max() < 1e-8);
        }
    }
}

fn distance_functional(out: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    (out - x).norm_squared()
}

#[test]
fn lowdin_is_closest_frame() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..10 {
        let x = random_direction_set(3, 8, 40 + seed).unwrap();
        let c5 = distance_functional(vecs(&condition_c5(&x).unwrap()), x.vectors());
        let basis = vecs(&condition_c2(&x, None).unwrap()).clone();
        for _ in 0..200 {
            let g = DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let frame = g.qr().q() * &basis;
            assert!(c5 <= distance_functional(&frame, x.vectors()) + 1e-12);
        }
        for order in [[0, 1, 2], [2, 1, 0]] {
            let c2 = distance_functional(vecs(&condition_c2(&x, Some(&order)).unwrap()), x.vectors());
            assert!(c5 < c2);
        }
    }
}

#[test]
fn c1_overlap_shrinks_with_gamma() {
    // D = 32 keeps the Gram matrix well conditioned.
    for seed in 0..50 {
        let x = random_direction_set(5, 32, 200 + seed).unwrap();
        let mut prev = f64::INFINITY;
        for gamma in [1.0, 0.75, 0.5, 0.25, 0.0] {
            let m = max_offdiag_abs_cos(&condition_c1(&x, gamma).unwrap().directions).unwrap();
            assert!(m <= prev + 1e-12, "seed {seed} gamma {gamma}: {m} > {prev}");
            prev = m;
        }
    }
}

#[test]
fn c1_retention_grows_with_gamma() {
    for seed in 0..20 {
        let x = random_direction_set(5, 8, 300 + seed).unwrap();
        let mut prev = vec![f64::NEG_INFINITY; 5];
        for gamma in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let r = signal_retention(&x, &condition_c1(&x, gamma).unwrap()).unwrap();
            for (now, before) in r.iter().zip(&prev) {
                assert!(*now >= before - 1e-12);
            }
            prev = r;
        }
    }
}

#[test]
fn c3_and_c4_keep_residual_overlap() {
    let x = skewed_three();
    let c3 = condition_c3(&x, 0.5, None).unwrap();
    let c4 = condition_c4(&x, 0.5, 0.5, None).unwrap();
    assert!(max_offdiag_abs_cos(&c3.directions).unwrap() > 1e-3);
    assert!(max_offdiag_abs_cos(&c4.directions).unwrap() > 1e-3);
}

#[test]
fn c2_retention_nonnegative_but_can_vanish() {
    // Gram–Schmidt keeps <d_i, r_i> = |r_i|^2 >= 0; a nearly opposite pair
    // drives the second retention towards zero.
    let x = traitgeo::directions::normalize_rows(
        &DirectionSet::from_rows(&[vec![1.0, 0.0], vec![-1.0, 1e-3]]).unwrap(),
    )
    .unwrap();
    let r = signal_retention(&x, &condition_c2(&x, None).unwrap()).unwrap();
    assert!(r[1] >= 0.0 && r[1] < 0.01);
    for seed in 0..20 {
        let x = random_direction_set(5, 6, 500 + seed).unwrap();
        let r = signal_retention(&x, &condition_c2(&x, Some(&[4, 2, 0, 1, 3])).unwrap()).unwrap();
        assert!(r.iter().all(|&v| v >= 0.0));
    }
    let c5 = signal_retention(&x, &condition_c5(&x).unwrap()).unwrap();
    assert!(c5.iter().all(|&v| v > 0.0));
}

#[test]
fn rank_deficient_rejected() {
    let x = traitgeo::directions::normalize_rows(
        &DirectionSet::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 1.0, 0.0]])
            .unwrap(),
    )
    .unwrap();
    assert!(matches!(condition_c5(&x), Err(Error::RankDeficient(_))));
    assert!(matches!(condition_c2(&x, None), Err(Error::RankDeficient(_))));
    assert!(condition_c1(&x, 0.5).is_ok());
}

#[test]
fn unnormalized_input_rejected() {
    let x = DirectionSet::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert!(matches!(condition_c5(&x), Err(Error::NotNormalized)));
}

#[test]
fn gram_of_conditioned_c5_is_identity() {
    let x = random_direction_set(5, 16, 8).unwrap();
    let g = gram(&condition_c5(&x).unwrap().directions);
    assert!((g.values - DMatrix::identity(5, 5)).abs().max() < 1e-10);
}

fn permutation_strategy(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_schemes_are_permutation_equivariant(seed in 0u64..10_000, perm in permutation_strategy(5), gamma in 0.0f64..=1.0) {
        let x = random_direction_set(5, 12, seed).unwrap();
        let px = x.permuted(&perm).unwrap();
        for spec in [ConditioningSpec::c0(), ConditioningSpec::c1(gamma), ConditioningSpec::c5()] {
            let then_perm = apply_condition(&x, &spec).unwrap().directions.permuted(&perm).unwrap();
            let perm_then = apply_condition(&px, &spec).unwrap().directions;
            prop_assert!(max_entry_diff(then_perm.vectors(), perm_then.vectors()) < 1e-10);
        }
    }

    #[test]
    fn overlap_invariant_under_permutation_and_rotation(seed in 0u64..10_000, perm in permutation_strategy(4)) {
        let x = random_direction_set(4, 6, seed).unwrap();
        let base = max_offdiag_abs_cos(&x).unwrap();
        let permuted = max_offdiag_abs_cos(&x.permuted(&perm).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let rotated = x.with_vectors(x.vectors() * g.qr().q()).unwrap();
        prop_assert!((base - permuted).abs() < 1e-14);
        prop_assert!((base - max_offdiag_abs_cos(&rotated).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn c5_retention_positive(seed in 0u64..10_000, c in 2usize..6) {
        let x = random_direction_set(c, 8, seed).unwrap();
        let r = signal_retention(&x, &condition_c5(&x).unwrap()).unwrap();
        prop_assert!(r.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn every_scheme_returns_unit_rows(seed in 0u64..10_000, tau in 0.0f64..=1.0, beta in 0.0f64..=1.0) {
        let x = random_direction_set(4, 7, seed).unwrap();
        let mut order: Vec<usize> = (0..4).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        for spec in [
            ConditioningSpec::c0(),
            ConditioningSpec::c1(0.5),
            ConditioningSpec::c2(Some(order.clone())),
            ConditioningSpec::c3(tau, Some(order.clone())),
            ConditioningSpec::c4(beta, tau, Some(order.clone())),
            ConditioningSpec::c5(),
        ] {
            let out = apply_condition(&x, &spec).unwrap();
            prop_assert!(out.directions.is_normalized());
            prop_assert_eq!(out.directions.trait_names(), x.trait_names());
            prop_assert_eq!(&out.spec, &spec);
        }
    }
}
