use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::trajectory::{make_test_trajectory, TrajectorySpec};
use crate::control::{GainMode, DEFAULT_U_MAX};
use crate::dynamics::{LtiSystem, SIMULATION_DT};
use crate::error::{Error, Result};
use crate::gp::GpConfig;
use crate::inverse::TrainingConfig;

/// Matrices of a linear SISO system, `a` given row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl SystemSpec {
    pub fn build(&self) -> Result<LtiSystem> {
        let rows: Vec<&[f64]> = self.a.iter().map(Vec::as_slice).collect();
        LtiSystem::from_rows(&rows, &self.b, &self.c).map_err(|e| Error::Config(format!("system: {e}")))
    }

    pub fn from_system(sys: &LtiSystem) -> Self {
        let n = sys.a().nrows();
        SystemSpec {
            a: (0..n).map(|i| sys.a().row(i).iter().copied().collect()).collect(),
            b: sys.b().iter().copied().collect(),
            c: sys.c().iter().copied().collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InverseKind {
    /// Exact inverse built from the source model.
    Analytic,
    /// Network trained on recorded source traces.
    #[default]
    Mlp,
}

/// Source traces used to train the inverse network: the source is driven
/// open loop by `u(k) = A sin(w t)` for every amplitude/period pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingDataConfig {
    pub amplitudes: Vec<f64>,
    /// Periods in seconds.
    pub periods: Vec<f64>,
    /// Length of each trace in seconds.
    pub duration: f64,
    /// Keep every `subsample`-th pair.
    pub subsample: usize,
}

impl Default for TrainingDataConfig {
    fn default() -> Self {
        TrainingDataConfig {
            amplitudes: vec![0.5, 1.0, 1.5, 2.0, 2.5],
            periods: vec![20.0, 16.0, 12.0, 8.0, 4.0],
            duration: 40.0,
            subsample: 10,
        }
    }
}

impl TrainingDataConfig {
    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.periods.iter().map(|p| 2.0 * PI / p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct InverseConfig {
    pub kind: InverseKind,
    pub data: TrainingDataConfig,
    pub training: TrainingConfig,
    /// Load a saved network instead of training one.
    pub model_path: Option<PathBuf>,
}

/// Which samples enter the tracking RMS.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StartupExclusion {
    /// Skip `k < r`, where no control has reached the output yet.
    #[default]
    RelativeDegree,
    /// Also skip the steps before the online window could predict.
    WindowFill,
}

/// Everything needed to reproduce one comparison run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub source: SystemSpec,
    pub target: SystemSpec,
    pub trajectory: TrajectorySpec,
    /// Initial state; empty means the origin.
    pub x0: Vec<f64>,
    pub inverse: InverseConfig,
    pub gp: GpConfig,
    pub gain: GainMode,
    pub u_max: f64,
    pub startup_exclusion: StartupExclusion,
    /// Tolerance for the ISS gain series.
    pub iss_tolerance: f64,
}

impl Default for ExperimentConfig {
    /// The two-system study: a source and a target with matching relative
    /// degree, the 48 s test trajectory, a source-trained network and an
    /// online GP with a 15-sample window.
    fn default() -> Self {
        ExperimentConfig {
            name: "two-system-study".into(),
            seed: 7,
            source: SystemSpec {
                a: vec![vec![0.0, 1.0], vec![-0.15, 0.8]],
                b: vec![0.0, 1.0],
                c: vec![-0.2, 1.0],
            },
            target: SystemSpec {
                a: vec![vec![0.0, 1.0], vec![-0.24, 1.0]],
                b: vec![0.0, 1.0],
                c: vec![-0.1, 1.0],
            },
            trajectory: make_test_trajectory(),
            x0: Vec::new(),
            inverse: InverseConfig::default(),
            gp: GpConfig::default(),
            gain: GainMode::default(),
            u_max: DEFAULT_U_MAX,
            startup_exclusion: StartupExclusion::default(),
            iss_tolerance: 1e-12,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let source = self.source.build()?;
        let target = self.target.build()?;
        if !self.x0.is_empty() && self.x0.len() != target.a().nrows() {
            return Err(Error::Config(format!(
                "x0 has {} entries but the target has {} states",
                self.x0.len(),
                target.a().nrows()
            )));
        }
        if source.a().nrows() != target.a().nrows() {
            return Err(Error::Config(
                "source and target must have the same state dimension".into(),
            ));
        }
        self.trajectory.validate()?;
        self.gain.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.u_max > 0.0) {
            return Err(Error::Config("u_max must be positive".into()));
        }
        if !(self.iss_tolerance > 0.0) {
            return Err(Error::Config("iss_tolerance must be positive".into()));
        }
        let data = &self.inverse.data;
        if data.subsample == 0 || !(data.duration > 0.0) {
            return Err(Error::Config(
                "training data needs a positive duration and subsample".into(),
            ));
        }
        if data.periods.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Config("training periods must be positive".into()));
        }
        Ok(())
    }

    pub fn systems(&self) -> Result<(LtiSystem, LtiSystem)> {
        Ok((self.source.build()?, self.target.build()?))
    }

    pub fn initial_state(&self, n: usize) -> crate::dynamics::StateVector {
        if self.x0.is_empty() {
            crate::dynamics::StateVector::zeros(n)
        } else {
            crate::dynamics::StateVector::from_column_slice(&self.x0)
        }
    }

    /// The study configuration with a shortened horizon, for quick checks.
    pub fn quick(duration: f64) -> Self {
        let mut config = ExperimentConfig::default();
        config.trajectory.duration = Some(duration);
        config.trajectory.dt = SIMULATION_DT;
        config
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let config = ExperimentConfig::default();
        let text = config.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let config = ExperimentConfig::from_toml_str("seed = 3\n[inverse]\nkind = \"analytic\"\n").unwrap();
        assert_eq!(config.seed, 3);
        assert_eq!(config.inverse.kind, InverseKind::Analytic);
        assert_eq!(config.gp.capacity, 15);
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("seed = \"x\""),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml_str("u_max = -1.0"),
            Err(Error::Config(_))
        ));
        let bad_system = "[target]\na = [[1.0]]\nb = [1.0, 2.0]\nc = [1.0]\n";
        assert!(matches!(
            ExperimentConfig::from_toml_str(bad_system),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn system_spec_round_trip() {
        let (source, _) = ExperimentConfig::default().systems().unwrap();
        assert_eq!(SystemSpec::from_system(&source).build().unwrap(), source);
    }
}
