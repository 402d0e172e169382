mod common;

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use impromptu::gp::{Basis, GpConfig, GpHyperparams, GpWindowModel, HyperFit};

fn basis_strategy() -> impl Strategy<Value = Basis> {
    prop_oneof![
        Just(Basis::None),
        Just(Basis::Constant),
        Just(Basis::Linear),
        Just(Basis::Quadratic)
    ]
}

fn window(rng: &mut ChaCha8Rng, dim: usize, basis: Basis, noise: f64, fit: HyperFit) -> GpWindowModel {
    let config = GpConfig {
        hyper: GpHyperparams {
            length_scales: (0..dim).map(|_| rng.random_range(0.5..3.0)).collect(),
            prior_variance: rng.random_range(0.1..2.0),
            noise_variance: noise,
            basis,
        },
        fit,
        ..GpConfig::default()
    };
    let mut gp = GpWindowModel::new(config).unwrap();
    let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    for _ in 0..15 {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = x.iter().zip(&w).map(|(a, b)| (a * b).sin()).sum::<f64>() + 0.3;
        gp.observe(&x, y).unwrap();
    }
    gp
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variance_is_nonnegative_and_vanishes_at_data(seed: u64, dim in 1usize..4, basis in basis_strategy()) {
        let mut rng = common::rng(seed);
        let gp = window(&mut rng, dim, basis, 0.0, HyperFit::Fixed);
        for _ in 0..10 {
            let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            prop_assert!(gp.predict(&q).unwrap().variance >= 0.0);
        }
        let noise = gp.hyperparams().noise_variance;
        for s in gp.samples() {
            let v = gp.predict(&s.input).unwrap().variance;
            prop_assert!((0.0..=noise + 1e-9).contains(&v), "variance {v} at a stored input");
        }
    }

    #[test]
    fn factor_reconstructs_regularized_gram(seed: u64, dim in 1usize..5, basis in basis_strategy()) {
        let mut rng = common::rng(seed);
        let gp = window(&mut rng, dim, basis, 1e-6, HyperFit::Fixed);
        let l = gp.factor().unwrap();
        let k = gp.regularized_gram().unwrap();
        prop_assert!((l * l.transpose() - &k).norm() <= 1e-10 * k.norm());
    }

    #[test]
    fn mean_derivative_matches_finite_difference(seed: u64, dim in 1usize..5, basis in basis_strategy()) {
        let mut rng = common::rng(seed);
        let gp = window(&mut rng, dim, basis, 1e-6, HyperFit::Fixed);
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        for d in 0..dim {
            let analytic = gp.mean_derivative_wrt(&q, d).unwrap().unwrap();
            let h = 1e-5;
            let (mut qp, mut qm) = (q.clone(), q.clone());
            qp[d] += h;
            qm[d] -= h;
            let fd = (gp.predict(&qp).unwrap().mean - gp.predict(&qm).unwrap().mean) / (2.0 * h);
            prop_assert!((analytic - fd).abs() <= 1e-4 * fd.abs().max(1.0), "dim {d}: {analytic} vs {fd}");
        }
    }

    #[test]
    fn window_keeps_the_latest_observations(capacity in 1usize..20, extra in 1usize..30) {
        let mut gp = GpWindowModel::new(GpConfig {
            capacity,
            fit: HyperFit::Fixed,
            min_samples: Some(1),
            ..GpConfig::default()
        })
        .unwrap();
        let total = capacity + extra;
        for i in 1..=total {
            gp.observe(&[i as f64, (i * i) as f64], i as f64).unwrap();
        }
        let kept: Vec<f64> = gp.samples().map(|s| s.output).collect();
        let expected: Vec<f64> = (total - capacity + 1..=total).map(|i| i as f64).collect();
        prop_assert_eq!(kept, expected);
    }

    #[test]
    fn fitting_never_lowers_the_likelihood(seed: u64, dim in 1usize..4) {
        let mut rng = common::rng(seed);
        let fit = HyperFit::Online { stride: 1_000_000, max_evals: 60 };
        let mut gp = window(&mut rng, dim, Basis::Quadratic, 1e-4, fit);
        let initial = gp.hyperparams().clone();
        let before = gp.log_marginal_likelihood(&initial).unwrap();
        let fitted = gp.fit_hyperparams().unwrap();
        let after = gp.log_marginal_likelihood(&fitted).unwrap();
        prop_assert!(after >= before, "{after} < {before}");
    }
}
