//! Discrete-time SISO plants and closed-loop simulation.

mod lti;
mod nonlinear;
mod sim;

pub use lti::{relative_degree, LtiSystem, PoleZero, RELATIVE_DEGREE_EPS};
pub use nonlinear::{NonlinearSystem, ScalarMap, StateMap, LIFTED_MAP_TOLERANCE};
pub use sim::{simulate, FnPolicy, PassThrough, Plant, Policy, Reference, SampledReference, SimTrace};

pub type StateVector = nalgebra::DVector<f64>;

/// Sampling period of the two-system simulation study, in seconds.
pub const SIMULATION_DT: f64 = 1.5e-3;

/// The system the inverse module is learned on: poles {0.3, 0.5}, zero 0.2.
pub fn source_system() -> LtiSystem {
    LtiSystem::from_rows(&[&[0.0, 1.0], &[-0.15, 0.8]], &[0.0, 1.0], &[-0.2, 1.0])
        .expect("source system is well-formed")
}

/// The system the inverse module is transferred to: poles {0.4, 0.6},
/// zero 0.1.
pub fn target_system() -> LtiSystem {
    LtiSystem::from_rows(&[&[0.0, 1.0], &[-0.24, 1.0]], &[0.0, 1.0], &[-0.1, 1.0])
        .expect("target system is well-formed")
}
