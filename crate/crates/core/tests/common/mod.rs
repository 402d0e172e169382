#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use impromptu::dynamics::{LtiSystem, Plant, SampledReference};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random SISO system of order `n` with entries in [-1, 1]. Draws again
/// until the system has a well-defined relative degree.
pub fn random_system(rng: &mut ChaCha8Rng, n: usize) -> LtiSystem {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let c = RowDVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if let Ok(sys) = LtiSystem::new(a, b, c) {
            return sys;
        }
    }
}

/// Random Schur-stable system with spectral radius in [0.1, 0.95).
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize) -> LtiSystem {
    loop {
        let sys = random_system(rng, n);
        let rho = sys.spectral_radius().unwrap();
        if rho == 0.0 {
            return sys;
        }
        let scale = rng.random_range(0.1..0.95) / rho;
        if let Ok(scaled) = LtiSystem::new(sys.a() * scale, sys.b().clone(), sys.c().clone()) {
            return scaled;
        }
    }
}

/// Random stable system with relative degree one and `|CB|` bounded away
/// from zero, so an exact inverse exists and is well conditioned.
pub fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> LtiSystem {
    loop {
        let sys = random_stable(rng, n);
        if sys.relative_degree() == 1 && sys.lifted_b().abs() > 0.2 {
            return sys;
        }
    }
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

/// Smooth reference: a sum of two random sinusoids on a 10 ms grid.
pub fn random_reference(rng: &mut ChaCha8Rng, len: usize) -> SampledReference {
    let (a1, w1, a2, w2) = (
        rng.random_range(0.1..1.5),
        rng.random_range(0.2..3.0),
        rng.random_range(0.0..1.0),
        rng.random_range(0.2..3.0),
    );
    let dt = 0.01;
    SampledReference {
        samples: (0..len)
            .map(|k| {
                let t = k as f64 * dt;
                a1 * (w1 * t).sin() + a2 * (w2 * t).cos()
            })
            .collect(),
        dt,
    }
}
