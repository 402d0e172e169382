//! The transferred module: an inverse of the source system's dynamics.

mod analytic;
mod dataset;
mod mlp;

pub use analytic::{AnalyticInverse, SINGULAR_GAIN_EPS};
pub use dataset::{build_inverse_dataset, InverseDataset};
pub use mlp::{train_mlp, Activation, MlpInverseModel, Normalization, TrainingConfig, TrainingReport};

use crate::dynamics::StateVector;
use crate::error::Result;

/// Either kind of inverse module.
#[derive(Clone, Debug)]
pub enum Inverse {
    Analytic(AnalyticInverse),
    Mlp(MlpInverseModel),
}

impl Inverse {
    /// `u_1(k)` for state `x(k)` and preview `y_d(k+r)`.
    pub fn reference(&self, x: &StateVector, preview: f64) -> Result<f64> {
        match self {
            Inverse::Analytic(inv) => inv.reference(x, preview),
            Inverse::Mlp(model) => model.reference(x, preview),
        }
    }
}

impl From<AnalyticInverse> for Inverse {
    fn from(inv: AnalyticInverse) -> Self {
        Inverse::Analytic(inv)
    }
}

impl From<MlpInverseModel> for Inverse {
    fn from(model: MlpInverseModel) -> Self {
        Inverse::Mlp(model)
    }
}
