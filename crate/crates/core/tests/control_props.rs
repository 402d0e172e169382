mod common;

use proptest::prelude::*;

use impromptu::control::{regressor, GainMode, OnlineModule, TransferController};
use impromptu::dynamics::{simulate, FnPolicy, LtiSystem, Plant, SampledReference, SimTrace, StateVector};
use impromptu::gp::{GpConfig, GpWindowModel, HyperFit};
use impromptu::inverse::AnalyticInverse;

const STEPS: usize = 300;

fn gp_module() -> OnlineModule {
    OnlineModule::Gp(
        GpWindowModel::new(GpConfig {
            fit: HyperFit::Fixed,
            ..GpConfig::default()
        })
        .unwrap(),
    )
}

fn pair(seed: u64, n: usize) -> (LtiSystem, LtiSystem, rand_chacha::ChaCha8Rng) {
    let mut rng = common::rng(seed);
    let source = common::random_invertible(&mut rng, n);
    let target = loop {
        let t = common::random_invertible(&mut rng, n);
        if t.zeros().unwrap().iter().all(|z| z.norm() < 0.95) && offline_loop_is_stable(&source, &t) {
            break t;
        }
    };
    (source, target, rng)
}

/// The target under the source inverse evolves as
/// `x+ = (A_t - B_t A_s / B_s) x + (B_t / B_s) y_d`.
fn offline_loop_is_stable(source: &LtiSystem, target: &LtiSystem) -> bool {
    let (a_s, b_s) = source.lifted_gains();
    let closed = target.a() - target.b() * (a_s / b_s);
    closed.complex_eigenvalues().iter().all(|z| z.norm() < 0.95)
}

/// Runs the loop, keeping the partial trace if the controller's guard trips.
fn run(
    target: &LtiSystem,
    ctrl: &mut TransferController,
    reference: &SampledReference,
    n: usize,
) -> SimTrace {
    match simulate(target, ctrl, reference, StateVector::zeros(n), STEPS) {
        Ok(trace) => trace,
        Err(e) => e.partial_trace().cloned().unwrap_or_else(|| panic!("{e}")),
    }
}

fn bits(trace: &SimTrace) -> Vec<u64> {
    trace
        .inputs
        .iter()
        .chain(&trace.outputs)
        .map(|v| v.to_bits())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn applied_input_is_offline_plus_correction(seed: u64, n in 1usize..4) {
        let (source, target, mut rng) = pair(seed, n);
        let reference = common::random_reference(&mut rng, STEPS + 2);
        let mut ctrl = TransferController::new(AnalyticInverse::linear(source), Some(gp_module()), GainMode::estimated(), 1).unwrap();
        let trace = run(&target, &mut ctrl, &reference, n);
        for (rec, u) in ctrl.records().iter().zip(&trace.inputs) {
            prop_assert_eq!(rec.u2.to_bits(), (rec.alpha * rec.e_p).to_bits());
            prop_assert_eq!(rec.u.to_bits(), (rec.u1 + rec.u2).to_bits());
            prop_assert_eq!(rec.u.to_bits(), u.to_bits());
        }
    }

    #[test]
    fn observations_pair_past_regressors_with_realized_error(seed: u64, n in 1usize..4) {
        let (source, target, mut rng) = pair(seed, n);
        let r = target.relative_degree();
        let reference = common::random_reference(&mut rng, STEPS + 2);
        let mut ctrl = TransferController::new(AnalyticInverse::linear(source), Some(gp_module()), GainMode::estimated(), r).unwrap();
        let trace = run(&target, &mut ctrl, &reference, n);
        prop_assert_eq!(ctrl.observations().len(), trace.steps().saturating_sub(r));
        for obs in ctrl.observations() {
            let p = obs.step;
            prop_assert_eq!(obs.origin + r, p);
            prop_assert_eq!(obs.label, reference.samples[p] - trace.outputs[p]);
            prop_assert_eq!(&obs.input, &regressor(&trace.states[obs.origin], trace.inputs[obs.origin], reference.samples[p]));
        }
    }

    #[test]
    fn offline_controller_equals_plain_inverse_policy(seed: u64, n in 1usize..4) {
        let (source, target, mut rng) = pair(seed, n);
        let reference = common::random_reference(&mut rng, STEPS + 2);
        let inverse = AnalyticInverse::linear(source);
        let mut ctrl = TransferController::offline(inverse.clone(), 1).unwrap();
        let a = simulate(&target, &mut ctrl, &reference, StateVector::zeros(n), STEPS).unwrap();
        let mut plain = FnPolicy(|_, x: &StateVector, _, preview| inverse.reference(x, preview).unwrap());
        let b = simulate(&target, &mut plain, &reference, StateVector::zeros(n), STEPS).unwrap();
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn zero_gain_nests_the_offline_strategy(seed: u64, n in 1usize..4) {
        let (source, target, mut rng) = pair(seed, n);
        let reference = common::random_reference(&mut rng, STEPS + 2);
        let inverse = AnalyticInverse::linear(source);
        let mut offline = TransferController::offline(inverse.clone(), 1).unwrap();
        let mut full = TransferController::new(inverse, Some(gp_module()), GainMode::Fixed { alpha: 0.0 }, 1).unwrap();
        let a = simulate(&target, &mut offline, &reference, StateVector::zeros(n), STEPS).unwrap();
        let b = simulate(&target, &mut full, &reference, StateVector::zeros(n), STEPS).unwrap();
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn exact_error_oracle_tracks_exactly(seed: u64, n in 1usize..4) {
        let (source, target, mut rng) = pair(seed, n);
        let r = target.relative_degree();
        let reference = common::random_reference(&mut rng, STEPS + 2);
        let mut ctrl = TransferController::new(
            AnalyticInverse::linear(source),
            Some(OnlineModule::Oracle(AnalyticInverse::linear(target.clone()))),
            GainMode::Fixed { alpha: 1.0 / target.lifted_b() },
            r,
        )
        .unwrap();
        let x0 = common::random_state(&mut rng, n, 1.0);
        let trace = simulate(&target, &mut ctrl, &reference, x0, STEPS).unwrap();
        for k in r..=STEPS {
            prop_assert!((trace.outputs[k] - reference.samples[k]).abs() <= 1e-10, "step {k}");
        }
    }
}
