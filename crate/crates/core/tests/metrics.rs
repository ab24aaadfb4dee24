use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use patchwarp::metrics::*;

fn features(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // correlated columns so the covariances are far from diagonal
    let mix = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0)) * mix
}

fn stats(mean: &[f64], diag: &[f64]) -> GaussianStats {
    GaussianStats {
        mean: DVector::from_column_slice(mean),
        cov: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        n: 100,
    }
}

fn random_rotation(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

#[test]
fn diagonal_closed_form_in_four_dimensions() {
    let a = [1.0, 4.0, 9.0, 0.25];
    let b = [4.0, 1.0, 16.0, 2.25];
    let got = frechet_distance(&stats(&[0.0; 4], &a), &stats(&[0.0; 4], &b)).unwrap();
    // (1-2)^2 + (2-1)^2 + (3-4)^2 + (0.5-1.5)^2
    assert!((got - 4.0).abs() < 1e-6, "{got}");
    let a: [f64; 4] = [0.3, 1.7, 2.2, 5.0];
    let b: [f64; 4] = [1.1, 0.4, 2.2, 0.9];
    let closed: f64 = a.iter().zip(b).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum();
    let got = frechet_distance(&stats(&[0.0; 4], &a), &stats(&[0.0; 4], &b)).unwrap();
    assert!((got - closed).abs() < 1e-6, "{got} vs {closed}");
}

#[test]
fn mean_shift_adds_squared_norm() {
    let s = gaussian_stats(&features(200, 5, 1)).unwrap();
    let v = DVector::from_column_slice(&[0.5, -1.0, 2.0, 0.0, 0.25]);
    let mut t = s.clone();
    t.mean += &v;
    let got = frechet_distance(&s, &t).unwrap();
    assert!((got - v.norm_squared()).abs() < 1e-9, "{got}");
}

#[test]
fn dimension_mismatch_is_an_error() {
    let a = stats(&[0.0; 3], &[1.0; 3]);
    let b = stats(&[0.0; 4], &[1.0; 4]);
    assert!(matches!(frechet_distance(&a, &b), Err(MetricsError::DimensionMismatch(3, 4))));
}

#[test]
fn feature_files_feed_the_distance() {
    let dir = tempfile::tempdir().unwrap();
    let a = features(50, 3, 5);
    let b = features(60, 3, 6);
    let pa = dir.path().join("a.csv");
    let pb = dir.path().join("b.bin");
    write_features_csv(&a, std::fs::File::create(&pa).unwrap()).unwrap();
    write_features_bin(&b, std::fs::File::create(&pb).unwrap()).unwrap();
    let direct = frechet_distance(&gaussian_stats(&a).unwrap(), &gaussian_stats(&b.map(|x| x as f32 as f64)).unwrap()).unwrap();
    let via = fid_from_files(&pa, &pb).unwrap();
    assert!((direct - via).abs() < 1e-9, "{direct} vs {via}");
    assert!(fid_from_files(&pa, &pa).unwrap().abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distance_is_symmetric(sa: u64, sb: u64, d in 1usize..8) {
        let a = gaussian_stats(&features(40, d, sa)).unwrap();
        let b = gaussian_stats(&features(40, d, sb)).unwrap();
        let ab = frechet_distance(&a, &b).unwrap();
        let ba = frechet_distance(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-8 * (1.0 + ab), "{} {}", ab, ba);
        prop_assert!(ab >= 0.0);
    }

    #[test]
    fn distance_to_self_is_zero(s: u64, d in 1usize..8) {
        let a = gaussian_stats(&features(30, d, s)).unwrap();
        prop_assert!(frechet_distance(&a, &a).unwrap().abs() < 1e-10 * (1.0 + a.cov.trace()));
    }

    #[test]
    fn rotation_leaves_distance_unchanged(sa: u64, sb: u64, sr: u64, d in 2usize..7) {
        let fa = features(50, d, sa);
        let fb = features(50, d, sb);
        let r = random_rotation(d, sr);
        let before = frechet_distance(&gaussian_stats(&fa).unwrap(), &gaussian_stats(&fb).unwrap()).unwrap();
        let after = frechet_distance(&gaussian_stats(&(&fa * &r)).unwrap(), &gaussian_stats(&(&fb * &r)).unwrap()).unwrap();
        prop_assert!((before - after).abs() < 1e-8 * (1.0 + before), "{} {}", before, after);
    }

    #[test]
    fn diagonal_case_matches_closed_form(a in prop::collection::vec(0.0..10.0f64, 4), b in prop::collection::vec(0.0..10.0f64, 4)) {
        let closed: f64 = a.iter().zip(&b).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum();
        let got = frechet_distance(&stats(&[0.0; 4], &a), &stats(&[0.0; 4], &b)).unwrap();
        prop_assert!((got - closed).abs() < 1e-6);
    }

    #[test]
    fn covariance_is_symmetric_psd(s: u64, n in 2usize..30, d in 1usize..6) {
        let st = gaussian_stats(&features(n, d, s)).unwrap();
        prop_assert!((&st.cov - st.cov.transpose()).abs().max() <= 1e-9);
        let min = st.cov.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= -1e-8);
    }
}
