use proptest::prelude::*;
use psihash::transforms::{angle_between, l2_norm};
use psihash::{
    apply_diagonal, circulant_matvec, dense_matvec, fwht_normalized, toeplitz_matvec,
    CirculantSpec, RademacherDiagonal, ToeplitzSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2_norm(&diff) / l2_norm(b).max(f64::MIN_POSITIVE)
}

fn pow2_vec() -> impl Strategy<Value = Vec<f64>> {
    (0u32..=10).prop_flat_map(|e| prop::collection::vec(-1e3f64..1e3, 1usize << e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fwht_is_an_involution(x in pow2_vec()) {
        let back = fwht_normalized(&fwht_normalized(&x).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn fwht_and_diagonal_preserve_norm(x in pow2_vec(), seed in any::<u64>()) {
        prop_assume!(l2_norm(&x) > 0.0);
        let norm = l2_norm(&x);
        let h = fwht_normalized(&x).unwrap();
        prop_assert!((l2_norm(&h) - norm).abs() <= 1e-10 * norm);
        let d = RademacherDiagonal::sample(x.len(), &mut ChaCha8Rng::seed_from_u64(seed));
        let dx = apply_diagonal(&d, &x).unwrap();
        prop_assert!((l2_norm(&dx) - norm).abs() <= 1e-10 * norm);
    }

    #[test]
    fn rotation_front_end_preserves_angles(e in 1u32..=10, seed in any::<u64>()) {
        let n = 1usize << e;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = gaussian_vec(&mut rng, n);
        let v = gaussian_vec(&mut rng, n);
        let r = RademacherDiagonal::sample(n, &mut rng);
        let hru = fwht_normalized(&apply_diagonal(&r, &u).unwrap()).unwrap();
        let hrv = fwht_normalized(&apply_diagonal(&r, &v).unwrap()).unwrap();
        prop_assert!((angle_between(&hru, &hrv) - angle_between(&u, &v)).abs() <= 1e-8);
    }
}

#[test]
fn fwht_involution_up_to_2_pow_14() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for e in [11, 12, 13, 14] {
        let x = gaussian_vec(&mut rng, 1 << e);
        let back = fwht_normalized(&fwht_normalized(&x).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() <= 1e-10);
        }
    }
}

#[test]
fn fast_products_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [4usize, 8, 16, 64, 256] {
        for _ in 0..100 {
            let c = CirculantSpec::new(gaussian_vec(&mut rng, n));
            let x = gaussian_vec(&mut rng, n);
            let fast = circulant_matvec(&c, &x).unwrap();
            let dense = dense_matvec(&c.to_dense(), &x).unwrap();
            assert!(rel_err(&fast, &dense) <= 1e-9, "circulant n={n}");

            let k = rng.random_range(1..=n);
            let t = ToeplitzSpec::new(gaussian_vec(&mut rng, 2 * n - 1)).unwrap();
            let fast = toeplitz_matvec(&t, &x, k).unwrap();
            let dense = dense_matvec(&t.to_dense(k), &x).unwrap();
            assert_eq!(fast.len(), k);
            assert!(rel_err(&fast, &dense) <= 1e-9, "toeplitz n={n} k={k}");
        }
    }
}
