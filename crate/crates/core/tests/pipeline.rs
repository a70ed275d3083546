mod common;

use common::{oracle_omega, oracle_pinv, rel_err};
use proptest::prelude::*;
use vlr_core::masking::{keygen, probgen, recover};
use vlr_core::matrix::{mat_mul, max_abs_diff, random_matrix, random_vector, rank};
use vlr_core::verifier::{verify, DEFAULT_TOLERANCE};
use vlr_core::worker::{compute, compute_with_behavior, CloudBehavior};
use vlr_core::{CostMeter, Error, Matrix, Vector};

#[test]
fn three_point_regression_through_the_protocol() {
    let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
    let y = Vector::new(vec![1.0, 2.0, 3.0]).unwrap();
    let sk = keygen(2, 4, 21).unwrap();
    let mut meter = CostMeter::new();
    let mp = probgen(&x, &sk, &mut meter).unwrap();
    let r_prime = compute(&mp, &mut meter).unwrap();
    assert!(verify(mp.x1(), mp.x2(), &r_prime, 1, DEFAULT_TOLERANCE, 1, &mut meter).unwrap().passed);
    let (_, omega) = recover(&sk, &r_prime, &y, &mut meter).unwrap();
    assert!((omega.get(0) - 1.0).abs() < 1e-12);
    assert!((omega.get(1) - 2.0).abs() < 1e-12);
}

#[test]
fn unmasking_identity_up_to_60_by_40() {
    let mut case = 0u64;
    for &(m, n) in &[(6, 3), (20, 10), (45, 30), (60, 40)] {
        for k in [4, 8] {
            case += 1;
            let x = random_matrix::<f64>(1000 + case, m, n, -1.0, 1.0).unwrap();
            let sk = keygen(n, k, 2000 + case).unwrap();
            let mut meter = CostMeter::new();
            let mp = probgen(&x, &sk, &mut meter).unwrap();
            let r_prime = compute(&mp, &mut meter).unwrap();
            let y = Vector::zeros(m).unwrap();
            let (r, _) = recover(&sk, &r_prime, &y, &mut meter).unwrap();
            let want = oracle_pinv(&x);
            let got = common::to_na(&r);
            let err = (got - want).amax();
            assert!(err <= 1e-6, "{m}x{n} k={k}: {err}");
        }
    }
}

#[test]
fn perturbing_r_prime_changes_omega() {
    for seed in 0..20 {
        let x = random_matrix::<f64>(seed, 15, 6, -1.0, 1.0).unwrap();
        let y = random_vector::<f64>(seed + 100, 15, -1.0, 1.0).unwrap();
        let sk = keygen(6, 8, seed).unwrap();
        let mut meter = CostMeter::new();
        let mp = probgen(&x, &sk, &mut meter).unwrap();
        let r_prime = compute(&mp, &mut meter).unwrap();
        let bumped = r_prime.with_entry((seed % 6) as usize, (seed % 15) as usize, r_prime.get((seed % 6) as usize, (seed % 15) as usize) + 1.0).unwrap();
        let (_, a) = recover(&sk, &r_prime, &y, &mut meter).unwrap();
        let (_, b) = recover(&sk, &bumped, &y, &mut meter).unwrap();
        assert_ne!(a, b);
    }
}

#[test]
fn rank_is_preserved_by_masking() {
    for seed in 0..10 {
        // rank-3 matrix of shape 8x5: product of 8x3 and 3x5
        let a = random_matrix::<f64>(seed, 8, 3, -1.0, 1.0).unwrap();
        let b = random_matrix::<f64>(seed + 50, 3, 5, -1.0, 1.0).unwrap();
        let x = mat_mul(&a, &b, &mut CostMeter::new()).unwrap();
        let sk = keygen(5, 6, seed).unwrap();
        let mp = probgen(&x, &sk, &mut CostMeter::new()).unwrap();
        assert_eq!(rank(&x, 1e-9), 3);
        assert_eq!(rank(mp.x1(), 1e-9), 3);
        assert_eq!(rank(mp.x2(), 1e-9), 3);

        let full = random_matrix::<f64>(seed + 7, 8, 5, -1.0, 1.0).unwrap();
        let mp = probgen(&full, &sk, &mut CostMeter::new()).unwrap();
        assert_eq!(rank(mp.x1(), 1e-9), 5);
    }
}

#[test]
fn masked_entries_rarely_match_originals() {
    let x = random_matrix::<f64>(77, 50, 50, 0.5, 1.5).unwrap();
    let sk = keygen(50, 8, 78).unwrap();
    let mp = probgen(&x, &sk, &mut CostMeter::new()).unwrap();
    let same = x.as_slice().iter().zip(mp.x1().as_slice()).filter(|(a, b)| a == b).count();
    let frac = same as f64 / 2500.0;
    assert!(frac <= 0.05, "fixed-point fraction {frac}");
}

#[test]
fn masking_is_deterministic() {
    let x = random_matrix::<f64>(5, 30, 12, -1.0, 1.0).unwrap();
    let run = || {
        let sk = keygen(12, 8, 99).unwrap();
        let mp = probgen(&x, &sk, &mut CostMeter::new()).unwrap();
        (mp.x1().to_text(), mp.x2().to_text())
    };
    assert_eq!(run(), run());
}

#[test]
fn honest_result_left_inverse_and_verifies() {
    for seed in 0..10 {
        let x = random_matrix::<f64>(seed, 40, 15, -1.0, 1.0).unwrap();
        let sk = keygen(15, 8, seed).unwrap();
        let mut meter = CostMeter::new();
        let mp = probgen(&x, &sk, &mut meter).unwrap();
        let r = compute(&mp, &mut meter).unwrap();
        let gram = mat_mul(mp.x2(), mp.x1(), &mut meter).unwrap();
        assert!(max_abs_diff(&mat_mul(&gram, &r, &mut meter).unwrap(), mp.x2()).unwrap() <= 1e-6);
        let rep = verify(mp.x1(), mp.x2(), &r, 1, DEFAULT_TOLERANCE, seed, &mut meter).unwrap();
        assert!(rep.passed && rep.max_residual <= 1e-8, "{rep:?}");
    }
}

#[test]
fn duplicate_columns_make_compute_singular() {
    let base = random_matrix::<f64>(3, 10, 3, -1.0, 1.0).unwrap();
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![base.get(i, 0), base.get(i, 1), base.get(i, 0), base.get(i, 2)]).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let sk = keygen(4, 4, 5).unwrap();
    let mp = probgen(&x, &sk, &mut CostMeter::new()).unwrap();
    assert!(matches!(compute(&mp, &mut CostMeter::new()), Err(Error::Singular { .. })));
    assert!(matches!(compute_with_behavior(&mp, CloudBehavior::Honest, &mut CostMeter::new()), Err(Error::Singular { .. })));
}

#[test]
fn f32_pipeline_recovers_coefficients() {
    let x = random_matrix::<f32>(1, 30, 4, -1.0, 1.0).unwrap();
    let y = vlr_core::matrix::random_vector::<f32>(2, 30, -1.0, 1.0).unwrap();
    let sk = keygen::<f32>(4, 4, 3).unwrap();
    let mut meter = CostMeter::new();
    let mp = probgen(&x, &sk, &mut meter).unwrap();
    let r = compute(&mp, &mut meter).unwrap();
    let (_, omega) = recover(&sk, &r, &y, &mut meter).unwrap();
    let x64 = Matrix::new(30, 4, x.as_slice().iter().map(|&v| v as f64).collect()).unwrap();
    let y64 = Vector::new(y.as_slice().iter().map(|&v| v as f64).collect()).unwrap();
    let want = oracle_omega(&x64, &y64);
    let got: Vec<f64> = omega.as_slice().iter().map(|&v| v as f64).collect();
    assert!(rel_err(&got, &want) < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn omega_matches_oracle(seed in any::<u64>(), n in 2usize..12, extra in 1usize..20, k in 4usize..10) {
        let m = n + extra;
        let x = random_matrix::<f64>(seed, m, n, -1.0, 1.0).unwrap();
        let y = random_vector::<f64>(seed ^ 0xabc, m, -1.0, 1.0).unwrap();
        let sk = keygen(n, k, seed.rotate_left(7)).unwrap();
        let mut meter = CostMeter::new();
        let mp = probgen(&x, &sk, &mut meter).unwrap();
        let r = compute(&mp, &mut meter).unwrap();
        let (_, omega) = recover(&sk, &r, &y, &mut meter).unwrap();
        prop_assert!(rel_err(omega.as_slice(), &oracle_omega(&x, &y)) <= 1e-6);
    }
}
