use proptest::prelude::*;
use psihash::{validate, GaussianPool, PsiRegularMatrix, SubsetStructure};
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=40).prop_flat_map(|n| (1..=n, Just(n)))
}

/// A valid general structure: each row is a random partition of a random
/// selection of `n * card` pool indices into `n` subsets of size `card`.
fn random_general(k: usize, n: usize, seed: u64) -> SubsetStructure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let card = rng.random_range(1..=k);
    let t = n * card.max(1);
    let t = t.max(n).min(k * n);
    let mut subsets = Vec::new();
    for _ in 0..k {
        let mut pool: Vec<usize> = (0..t).collect();
        pool.shuffle(&mut rng);
        for j in 0..n {
            subsets.push(pool[j * card..(j + 1) * card].to_vec());
        }
    }
    SubsetStructure::new(k, n, t, k, subsets).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standard_families_are_zero_regular((k, n) in dims()) {
        for s in [SubsetStructure::toeplitz(k, n).unwrap(), SubsetStructure::circulant(k, n).unwrap()] {
            let r = validate(&s);
            prop_assert!(r.passed(), "{:?}", r.first_failure());
            prop_assert_eq!(r.psi_class, 0);
        }
    }

    #[test]
    fn entries_are_pool_subset_sums((k, n) in dims(), seed in any::<u64>()) {
        for m in [
            PsiRegularMatrix::toeplitz(k, n, seed).unwrap(),
            PsiRegularMatrix::circulant(k, n, seed).unwrap(),
            PsiRegularMatrix::general(random_general(k, n, seed), seed).unwrap(),
        ] {
            let dense = m.materialize();
            let g = m.pool().values();
            for i in 0..k {
                for j in 0..n {
                    let direct: f64 = m.structure().subset(i, j).iter().map(|&l| g[l]).sum();
                    prop_assert_eq!(dense.get(i, j), direct);
                }
            }
        }
    }

    #[test]
    fn fast_matvec_matches_dense((k, n) in dims(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for m in [
            PsiRegularMatrix::toeplitz(k, n, seed).unwrap(),
            PsiRegularMatrix::circulant(k, n, seed).unwrap(),
            PsiRegularMatrix::general(random_general(k, n, seed), seed).unwrap(),
        ] {
            let fast = m.matvec(&x).unwrap();
            let dense = m.matvec_dense(&x).unwrap();
            for (a, b) in fast.iter().zip(&dense) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn structure_json_round_trip((k, n) in dims(), seed in any::<u64>()) {
        let s = random_general(k, n, seed);
        let back = SubsetStructure::from_json(&s.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, s);
    }
}

#[test]
fn entry_variance_equals_subset_size() {
    // Rows with |S| = 1, 2, 4, 4 over t = 32 = k n.
    let (k, n, t) = (4, 8, 32);
    let mut subsets = Vec::new();
    for card in [1usize, 2, 4, 4] {
        for j in 0..n {
            subsets.push((j * card..(j + 1) * card).collect::<Vec<_>>());
        }
    }
    let structure = SubsetStructure::new(k, n, t, 4, subsets).unwrap();
    assert!(validate(&structure).passed());
    let base = PsiRegularMatrix::general(structure, 0).unwrap();
    assert_eq!(base.row_sigma(), &[1, 2, 4, 4]);
    let seeds = 2000;
    for i in 0..k {
        let samples: Vec<f64> = (0..seeds).map(|s| base.resampled(s).entry(i, 0)).collect();
        let mean = samples.iter().sum::<f64>() / seeds as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64;
        let sigma = base.row_sigma()[i] as f64;
        assert!(
            (var / sigma - 1.0).abs() <= 0.10,
            "row {i}: var {var} vs {sigma}"
        );
    }
}

#[test]
fn pool_is_shared_between_entries() {
    let m = PsiRegularMatrix::with_pool(
        SubsetStructure::toeplitz(2, 3).unwrap(),
        GaussianPool::from_values(vec![1.0, 2.0, 3.0, 4.0], 0),
    )
    .unwrap();
    // Toeplitz: constant along diagonals
    assert_eq!(m.entry(0, 0), m.entry(1, 1));
    assert_eq!(m.entry(0, 1), m.entry(1, 2));
}
