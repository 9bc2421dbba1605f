//! Property tests for the invariants the estimators and losses promise.

use std::f64::consts::PI;

use gridless_doa::array_model::{exact_covariances, steering_matrix};
use gridless_doa::covariance_ops::{
    gram_psd, redundancy_average, EigenDecomposition, SubspaceBasis,
};
use gridless_doa::evaluation::{permutation_mse, sample_directions};
use gridless_doa::linalg::CMatrix;
use gridless_doa::losses::{
    affine_invariant_distance, evaluate, grassmann_distance, si_reconstruction_loss, LossConfig,
    LossKind, LossTarget,
};
use gridless_doa::random_matrices::{random_complex, random_pd, random_unitary};
use gridless_doa::{root_music, ArrayGeometry, HermitianMatrix, SourceScene};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permutation_mse_ignores_order(
        pairs in prop::collection::vec((0.0..PI, 0.0..PI), 1..9),
        shift in 0usize..8,
    ) {
        let (est, truth): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let base = permutation_mse(&est, &truth).unwrap();
        let mut rotated = est.clone();
        rotated.rotate_left(shift % est.len());
        let mut reversed = truth.clone();
        reversed.reverse();
        prop_assert!((permutation_mse(&rotated, &truth).unwrap() - base).abs() <= 1e-12);
        prop_assert!((permutation_mse(&est, &reversed).unwrap() - base).abs() <= 1e-12);
        prop_assert!((permutation_mse(&truth, &est).unwrap() - base).abs() <= 1e-12);
        prop_assert!(base >= 0.0);
        prop_assert_eq!(permutation_mse(&truth, &truth).unwrap(), 0.0);
    }

    #[test]
    fn si_cov_is_scale_invariant(seed in any::<u64>(), m in 2usize..8, c in -3.0f64..3.0, d in -3.0f64..3.0) {
        let mut r = rng(seed);
        let target = random_pd(&mut r, m, 0.1);
        let p = gram_psd(&random_complex(&mut r, m, m), 0.0).unwrap().into_inner();
        let cfg = LossConfig::default();
        let base = si_reconstruction_loss(&target, &p, &cfg).unwrap().value;
        let scaled = si_reconstruction_loss(
            &target.scaled(10f64.powf(d)).unwrap(),
            &p.scale(10f64.powf(c)),
            &cfg,
        ).unwrap().value;
        prop_assert!((scaled - base).abs() <= 1e-9, "{} vs {}", scaled, base);
    }

    #[test]
    fn grassmann_distance_ignores_basis(seed in any::<u64>(), m in 2usize..9, k_frac in 0.0f64..1.0) {
        let mut r = rng(seed);
        let k = 1 + ((m - 1) as f64 * k_frac) as usize % (m - 1);
        let a = SubspaceBasis::new(random_unitary(&mut r, m).columns(0, k).into_owned()).unwrap();
        let b = SubspaceBasis::new(random_unitary(&mut r, m).columns(0, k).into_owned()).unwrap();
        let d = grassmann_distance(&a, &b).unwrap();
        let d2 = grassmann_distance(
            &a.rotated(&random_unitary(&mut r, k)).unwrap(),
            &b.rotated(&random_unitary(&mut r, k)).unwrap(),
        ).unwrap();
        prop_assert!((d - d2).abs() <= 1e-9);
        prop_assert!((grassmann_distance(&b, &a).unwrap() - d).abs() <= 1e-9);
        prop_assert!(d <= (k as f64).sqrt() * PI / 2.0 + 1e-12);
    }

    #[test]
    fn subspace_loss_ignores_target_basis(seed in any::<u64>(), k in 1usize..6) {
        let m = 7;
        let mut r = rng(seed);
        let u = random_unitary(&mut r, m);
        let e = random_complex(&mut r, m, m);
        let cfg = LossConfig::default();
        let target = |q: &CMatrix| LossTarget::Subspace {
            signal: SubspaceBasis::new(u.columns(0, k) * q).unwrap(),
            noise: SubspaceBasis::new(u.columns(k, m - k).into_owned()).unwrap(),
        };
        let a = evaluate(LossKind::Subspace, &target(&CMatrix::identity(k, k)), &e, &cfg).unwrap();
        let b = evaluate(LossKind::Subspace, &target(&random_unitary(&mut r, k)), &e, &cfg).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-9);
        prop_assert!((&a.gradient - &b.gradient).norm() <= 1e-8 * (1.0 + a.gradient.norm()));
    }

    #[test]
    fn affine_distance_scaling_law(seed in any::<u64>(), m in 2usize..9, log_alpha in -7.0f64..7.0) {
        let mut r = rng(seed);
        let target = random_pd(&mut r, m, 0.1);
        let alpha = log_alpha.exp();
        let cfg = LossConfig { pd_shift: 0.0, ..LossConfig::default() };
        let v = affine_invariant_distance(&target, &target.entries().map(|z| z * alpha), &cfg).unwrap().value;
        prop_assert!((v - (m as f64).sqrt() * log_alpha.abs()).abs() <= 1e-10);
    }

    #[test]
    fn root_music_ignores_scale_and_loading(seed in any::<u64>(), k in 1usize..7, c in -4.0f64..4.0, load in 0.0f64..10.0) {
        let g = ArrayGeometry::mra4();
        let mut r = rng(seed);
        let truth = sample_directions(k, (PI / 6.0, 5.0 * PI / 6.0), PI / 45.0, &mut r).unwrap();
        let scene = SourceScene::equal_power(truth.clone(), 1.0, 0.2, 1).unwrap();
        let (_, rs) = exact_covariances(&scene, &g).unwrap();
        let da = redundancy_average(&rs, &g).unwrap();
        let base = root_music(&da, k, &g).unwrap();
        let mut changed = da.entries().scale(10f64.powf(c));
        for i in 0..7 {
            changed[(i, i)].re += load;
        }
        let other = root_music(&HermitianMatrix::new(changed).unwrap(), k, &g).unwrap();
        for (a, b) in base.directions.iter().zip(&other.directions) {
            prop_assert!((a - b).abs() <= 1e-6, "{:?} vs {:?}", base.directions, other.directions);
        }
        prop_assert!(base.directions.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn redundancy_average_recovers_full_covariance(seed in any::<u64>(), k in 1usize..7) {
        let g = ArrayGeometry::mra4();
        let mut r = rng(seed);
        let truth = sample_directions(k, (PI / 6.0, 5.0 * PI / 6.0), PI / 45.0, &mut r).unwrap();
        let scene = SourceScene::equal_power(truth.clone(), 1.0, 0.5, 1).unwrap();
        let (full, rs) = exact_covariances(&scene, &g).unwrap();
        let da = redundancy_average(&rs, &g).unwrap();
        // Without estimation noise the augmented matrix is the full-array
        // covariance plus the noise floor.
        let mut expected = full.entries().clone();
        for i in 0..7 {
            expected[(i, i)].re += 0.5;
        }
        prop_assert!((da.entries() - &expected).norm() <= 1e-10 * expected.norm());
        let a = steering_matrix(&truth, &g).unwrap();
        prop_assert_eq!(a.nrows(), 7);
        let eig = EigenDecomposition::of(&da);
        prop_assert!(eig.values().iter().all(|v| *v >= 0.5 - 1e-9));
    }
}
