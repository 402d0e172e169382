mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use impromptu::bench::{source_training_traces, train_source_inverse, ExperimentConfig};
use impromptu::dynamics::{simulate, FnPolicy, Plant, StateVector};
use impromptu::inverse::{build_inverse_dataset, MlpInverseModel, Normalization};

fn identity_norm(dim: usize) -> Normalization {
    Normalization {
        mean: vec![0.0; dim],
        std: vec![1.0; dim],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_round_trips(
        rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 1..40),
        probe in prop::collection::vec(-1e3f64..1e3, 3),
    ) {
        let norm = Normalization::fit(rows.iter().map(Vec::as_slice));
        let back = norm.denormalize(&norm.normalize(&probe));
        for (a, b) in back.iter().zip(&probe) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn backprop_matches_finite_differences(seed: u64, h1 in 1usize..8, h2 in 1usize..8) {
        let mut rng = common::rng(seed);
        let mut model = MlpInverseModel::new(&[3, h1, h2, 1], identity_norm(3), identity_norm(1), seed).unwrap();
        let inputs: Vec<Vec<f64>> = (0..8).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let targets: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, grad) = model.loss_and_gradient(&inputs, &targets);
        let params = model.params();
        let mut fd = vec![0.0; params.len()];
        for i in 0..params.len() {
            let h = 1e-6;
            let mut p = params.clone();
            p[i] += h;
            model.set_params(&p).unwrap();
            let plus = model.loss_and_gradient(&inputs, &targets).0;
            p[i] -= 2.0 * h;
            model.set_params(&p).unwrap();
            let minus = model.loss_and_gradient(&inputs, &targets).0;
            fd[i] = (plus - minus) / (2.0 * h);
        }
        let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
        prop_assert!(diff <= 1e-5 * scale, "relative gradient error {}", diff / scale);
    }

    #[test]
    fn saved_networks_reload_bit_exactly(seed: u64, hidden in 1usize..12) {
        let mut rng = common::rng(seed);
        let input_norm = Normalization {
            mean: (0..3).map(|_| rng.random_range(-5.0..5.0)).collect(),
            std: (0..3).map(|_| rng.random_range(0.1..5.0)).collect(),
        };
        let output_norm = Normalization { mean: vec![rng.random_range(-1.0..1.0)], std: vec![rng.random_range(0.1..2.0)] };
        let model = MlpInverseModel::new(&[3, hidden, 1], input_norm, output_norm, seed).unwrap();
        let mut bytes = Vec::new();
        model.save(&mut bytes).unwrap();
        let back = MlpInverseModel::load(bytes.as_slice()).unwrap();
        prop_assert_eq!(&back, &model);
        let q = [0.3, -1.2, 0.7];
        prop_assert_eq!(back.predict(&q).unwrap().to_bits(), model.predict(&q).unwrap().to_bits());
    }
}

fn rms_on_target(config: &ExperimentConfig, policy: impl FnMut(usize, &StateVector, f64, f64) -> f64) -> f64 {
    let (_, target) = config.systems().unwrap();
    let r = target.relative_degree();
    let reference = config.trajectory.sample(r).unwrap();
    let steps = config.trajectory.steps().unwrap();
    let trace = simulate(
        &target,
        &mut FnPolicy(policy),
        &reference,
        config.initial_state(2),
        steps,
    )
    .unwrap();
    let errors: Vec<f64> = (r..=steps)
        .map(|k| trace.outputs[k] - reference.samples[k])
        .collect();
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// The source inverse is affine in `[x, y_d]`, so least squares on the same
/// dataset is an independent model of it. Transferred to the target, the
/// network should track about as well.
#[test]
fn network_tracks_within_twice_the_affine_fit() {
    let mut config = ExperimentConfig::quick(16.0);
    config.inverse.training.max_epochs = 20;

    let dataset = build_inverse_dataset(
        &source_training_traces(&config).unwrap(),
        1,
        config.inverse.data.subsample,
    )
    .unwrap();
    let dim = dataset.input_dim().unwrap();
    let design = DMatrix::from_fn(dataset.len(), dim + 1, |i, j| {
        if j < dim {
            dataset.inputs[i][j]
        } else {
            1.0
        }
    });
    let labels = DVector::from_column_slice(&dataset.labels);
    let coef = design.svd(true, true).solve(&labels, 1e-12).unwrap();
    let affine = rms_on_target(&config, |_, x, _, preview| {
        x.iter()
            .chain([preview].iter())
            .zip(coef.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + coef[dim]
    });

    let (model, _) = train_source_inverse(&config).unwrap();
    let network = rms_on_target(&config, |_, x, _, preview| model.reference(x, preview).unwrap());
    assert!(
        affine > 0.1,
        "transfer should leave a visible error, got {affine}"
    );
    assert!(
        network <= 2.0 * affine,
        "network rms {network} vs affine rms {affine}"
    );
}
