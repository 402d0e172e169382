//! Online error prediction with a sliding-window Gaussian process.

mod kernel;
mod simplex;
mod window;

pub use kernel::{kernel, Basis, GpHyperparams};
pub use simplex::minimize_bounded;
pub use window::{
    GpConfig, GpWindowModel, HyperBounds, HyperFit, InputScaling, Prediction, Sample, INITIAL_JITTER,
    MAX_JITTER,
};
