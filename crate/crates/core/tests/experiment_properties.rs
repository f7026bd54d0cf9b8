use std::f64::consts::PI;

use proptest::prelude::*;
use psihash::experiments::{
    evaluate_concentration_bound, report_csv, report_json, run_experiment, BoundInputs, Check,
    ExperimentConfig, ExperimentKind, ExponentForm, SCHEMA_VERSION,
};
use psihash::{Family, Quantizer, Variant};

const ANGLES: [f64; 4] = [PI / 6.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];

fn config(
    kind: ExperimentKind,
    variant: Variant,
    family: Family,
    ks: Vec<usize>,
    n: usize,
) -> ExperimentConfig {
    ExperimentConfig {
        schema: SCHEMA_VERSION,
        kind,
        variant,
        family,
        ks,
        n,
        quantizer: Quantizer::Sign,
        angles: ANGLES.to_vec(),
        trials: 2000,
        epsilons: vec![0.02, 0.05, 0.1, 0.2],
        cs: vec![0.5, 1.0],
        base_seed: 1234,
        output: None,
        bound: None,
        checks: vec![],
    }
}

#[test]
fn estimator_is_unbiased_for_every_configuration() {
    for variant in [Variant::Extended, Variant::Short] {
        for family in [Family::Toeplitz, Family::Circulant] {
            let n = if variant == Variant::Extended {
                128
            } else {
                100
            };
            let mut cfg = config(ExperimentKind::Bias, variant, family, vec![64], n);
            cfg.checks = vec![Check::Bias { max_se: 4.0 }];
            let report = run_experiment(&cfg).unwrap();
            assert!(
                report.all_checks_passed(),
                "{variant} {family}: {:?}",
                report.checks
            );
        }
    }
}

#[test]
fn variance_decays_like_one_over_k() {
    let mut cfg = config(
        ExperimentKind::Bias,
        Variant::Short,
        Family::Toeplitz,
        vec![16, 64, 256],
        512,
    );
    cfg.angles = vec![PI / 2.0, PI / 4.0];
    cfg.checks = vec![Check::VarianceRatio { min: 2.5, max: 6.0 }];
    let report = run_experiment(&cfg).unwrap();
    assert!(report.all_checks_passed(), "{:?}", report.checks);
    for &theta in &cfg.angles {
        // Var = theta (pi - theta) / (pi^2 k) for independent rows.
        for k in [16usize, 64, 256] {
            let var = report.summary(theta, k).unwrap().var;
            let floor = theta * (PI - theta) / (PI * PI * k as f64);
            assert!(
                var / floor > 0.8 && var / floor < 1.3,
                "theta={theta} k={k}: {var} vs {floor}"
            );
        }
    }
}

#[test]
fn tails_shrink_with_epsilon_and_k() {
    let mut cfg = config(
        ExperimentKind::Concentration,
        Variant::Short,
        Family::Toeplitz,
        vec![16, 64, 256],
        300,
    );
    cfg.checks = vec![Check::TailMonotone];
    let report = run_experiment(&cfg).unwrap();
    assert!(report.all_checks_passed(), "{:?}", report.checks);
    let trials = cfg.trials as f64;
    let se = |f: f64| (f * (1.0 - f) / trials).sqrt();
    for &theta in &cfg.angles {
        for eps in &cfg.epsilons {
            let label = format!("eps={eps}");
            let tails: Vec<f64> = cfg
                .ks
                .iter()
                .map(|&k| report.tail(theta, k, &label).unwrap().tail_freq.unwrap())
                .collect();
            for w in tails.windows(2) {
                let slack = 2.0 * (se(w[0]).powi(2) + se(w[1]).powi(2)).sqrt();
                assert!(w[1] <= w[0] + slack, "theta={theta} {label}: {tails:?}");
            }
        }
    }
}

#[test]
fn reports_are_reproducible() {
    let mut cfg = config(
        ExperimentKind::Concentration,
        Variant::Extended,
        Family::Circulant,
        vec![32],
        64,
    );
    cfg.trials = 300;
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(report_csv(&a), report_csv(&b));
    assert_eq!(report_json(&a).unwrap(), report_json(&b).unwrap());
    cfg.base_seed += 1;
    assert_ne!(report_csv(&a), report_csv(&run_experiment(&cfg).unwrap()));
}

fn bound_inputs() -> impl Strategy<Value = (BoundInputs, f64)> {
    (
        4usize..=20,
        1usize..=256,
        1e-6f64..1e-2,
        0.05f64..1.0,
        1usize..=4,
        0usize..=2,
        0.1f64..3.0,
        any::<bool>(),
    )
        .prop_map(|(log_n, k, a, eps, chi, psi, theta, n_form)| {
            let n = 1usize << log_n;
            let k = k.min(n);
            let t = n + k - 1;
            let f = |x: usize| 3.0 * (x as f64).ln().sqrt();
            let b = BoundInputs {
                a,
                epsilon: eps,
                f_of_n: f(n),
                f_of_t: f(t),
                t,
                dataset_size: 2,
                k,
                n,
                psi,
                chi,
                exponent_form: if n_form {
                    ExponentForm::Dimension
                } else {
                    ExponentForm::PoolSize
                },
            };
            (b, theta)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bound_is_non_increasing_in_dataset_size((b, theta) in bound_inputs(), growth in 1u64..1000) {
        let mut prev = None;
        for m in [1u64, 2, 10, 100, 1000, 100_000] {
            let mut b = b.clone();
            b.dataset_size = m * growth;
            let e = evaluate_concentration_bound(&b, theta).unwrap();
            if let (Some(p), Some(v)) = (prev, e.value) {
                prop_assert!(v <= p);
            }
            prev = e.value;
        }
    }

    #[test]
    fn dependency_term_grows_with_k((b, theta) in bound_inputs()) {
        let mut prev = 0.0;
        for k in 1..=b.k {
            let mut b = b.clone();
            b.k = k;
            let e = evaluate_concentration_bound(&b, theta).unwrap();
            prop_assert!(e.dependency_failure >= prev);
            prev = e.dependency_failure;
        }
    }

    #[test]
    fn bound_value_is_a_probability_or_flagged((b, theta) in bound_inputs()) {
        let e = evaluate_concentration_bound(&b, theta).unwrap();
        match e.value {
            Some(v) if !e.vacuous => prop_assert!(v > 0.0 && v <= 1.0),
            Some(v) => prop_assert!(v <= 0.0),
            None => prop_assert!(e.vacuous && e.mu >= 1.0),
        }
    }
}

#[test]
fn cube_root_instantiation_first_failure_term() {
    for (n, k, big_n) in [
        (1usize << 10, 8usize, 100u64),
        (1 << 16, 32, 10_000),
        (1 << 20, 64, 1_000_000),
    ] {
        let b = BoundInputs::toeplitz_cube_root(n, k, n + k - 1, big_n);
        let e = evaluate_concentration_bound(&b, PI / 2.0).unwrap();
        let n_f = big_n as f64;
        let expected = 4.0 * (n_f * (n_f - 1.0) / 2.0) * (n as f64).powf(-4.5);
        assert!(((e.dataset_failure - expected) / expected).abs() <= 1e-12);
    }
}
