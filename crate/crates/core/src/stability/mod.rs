//! Similarity of two systems and the closed-loop boundedness condition.

mod budget;
mod iss;
mod similarity;

use serde::Serialize;

pub use budget::{
    boundedness_check, fit_prediction_budget, BoundednessCheck, PredictionBudget, ResidualSample,
    StabilityBudget, Verdict,
};
pub use iss::{iss_gains, IssGains};
pub use similarity::{nonlinear_similarity, similarity, SimilarityVector};

use crate::dynamics::{LtiSystem, Plant};
use crate::error::Result;

/// Poles and zeros as `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub relative_degree: usize,
    pub poles: Vec<[f64; 2]>,
    pub zeros: Vec<[f64; 2]>,
    pub minimum_phase: bool,
    pub spectral_radius: f64,
}

impl SpectrumReport {
    pub fn of(system: &LtiSystem) -> Result<Self> {
        let pz = system.zeros_poles()?;
        let pairs = |v: &[nalgebra::Complex<f64>]| v.iter().map(|c| [c.re, c.im]).collect();
        Ok(SpectrumReport {
            relative_degree: system.relative_degree(),
            poles: pairs(&pz.poles),
            zeros: pairs(&pz.zeros),
            minimum_phase: pz.minimum_phase,
            spectral_radius: system.spectral_radius()?,
        })
    }
}

/// Similarity, gains and the boundedness check for one pair at one gain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub version: u32,
    pub source: SpectrumReport,
    pub target: SpectrumReport,
    pub budget: StabilityBudget,
    pub beta4: f64,
    /// `None` when every gain satisfies the condition.
    pub alpha_max: Option<f64>,
    pub alpha: f64,
    pub check: BoundednessCheck,
}

impl StabilityReport {
    pub fn new(
        source: &LtiSystem,
        target: &LtiSystem,
        prediction: PredictionBudget,
        alpha: f64,
        tol: f64,
    ) -> Result<Self> {
        let budget = StabilityBudget::new(source, target, prediction, tol)?;
        let alpha_max = budget.alpha_max();
        Ok(StabilityReport {
            version: crate::bench::REPORT_VERSION,
            source: SpectrumReport::of(source)?,
            target: SpectrumReport::of(target)?,
            beta4: budget.beta4(),
            alpha_max: alpha_max.is_finite().then_some(alpha_max),
            check: budget.check(alpha),
            alpha,
            budget,
        })
    }
}
