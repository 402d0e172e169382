use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, InverseKind, StartupExclusion};
use crate::control::{GainMode, OnlineModule, StepRecord, TransferController};
use crate::dynamics::{
    simulate, LtiSystem, PassThrough, Plant, Reference, SampledReference, SimTrace, StateVector,
};
use crate::error::{Error, Result};
use crate::gp::GpWindowModel;
use crate::inverse::{
    build_inverse_dataset, train_mlp, AnalyticInverse, Inverse, MlpInverseModel, TrainingReport,
};
use crate::stability::{
    fit_prediction_budget, BoundednessCheck, PredictionBudget, ResidualSample, StabilityBudget,
};

/// Version stamped into every JSON report.
pub const REPORT_VERSION: u32 = 1;

/// The three controllers compared on the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// `u(k) = y_d(k+r)`.
    Baseline,
    /// Source inverse alone.
    Offline,
    /// Source inverse plus the online error predictor.
    Full,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Baseline, Strategy::Offline, Strategy::Full];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::Offline => "offline",
            Strategy::Full => "full",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Strategy::Baseline),
            "offline" => Ok(Strategy::Offline),
            "full" => Ok(Strategy::Full),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

/// One row of the step log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub k: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub y_d: f64,
    pub u1: f64,
    pub e_p: f64,
    pub alpha: f64,
    pub u2: f64,
    pub u: f64,
    /// `y_d(k+r)`.
    pub y_d_preview: f64,
    /// The online predictor produced `e_p` (it was not cold).
    pub active: bool,
    /// Exact error `u1` alone would leave at `k+r` on the target.
    pub e_p_oracle: f64,
}

/// Combines a trace with the controller's per-step records. Without
/// records the input is logged as `u1` with no correction.
pub fn step_rows(
    target: &LtiSystem,
    trace: &SimTrace,
    records: Option<&[StepRecord]>,
    reference: &dyn Reference,
) -> Vec<StepRow> {
    let r = target.relative_degree();
    (0..trace.inputs.len())
        .map(|k| {
            let x = &trace.states[k];
            let preview = reference.desired(k + r);
            let (u1, e_p, alpha, u2, active) = match records {
                Some(recs) => {
                    let rec = &recs[k];
                    (rec.u1, rec.e_p, rec.alpha, rec.u2, !rec.cold)
                }
                None => (trace.inputs[k], 0.0, 0.0, 0.0, false),
            };
            StepRow {
                k,
                x: x.iter().copied().collect(),
                y: trace.outputs[k],
                y_d: reference.desired(k),
                u1,
                e_p,
                alpha,
                u2,
                u: trace.inputs[k],
                y_d_preview: preview,
                active,
                e_p_oracle: preview - target.lifted_output(x, u1),
            }
        })
        .collect()
}

fn header(n: usize) -> Vec<String> {
    let mut h = vec!["k".to_string()];
    h.extend((0..n).map(|i| format!("x{i}")));
    for name in [
        "y",
        "y_d",
        "u1",
        "e_p",
        "alpha",
        "u2",
        "u",
        "y_d_preview",
        "active",
        "e_p_oracle",
    ] {
        h.push(name.into());
    }
    h
}

/// Writes the step log as CSV. Floats use the shortest round-trip form, so
/// reading the file back reproduces every value exactly.
pub fn write_step_log_csv<W: Write>(writer: W, rows: &[StepRow]) -> Result<()> {
    let n = rows.first().map_or(0, |r| r.x.len());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(n))?;
    for row in rows {
        let mut rec = vec![row.k.to_string()];
        rec.extend(row.x.iter().map(|v| format!("{v:?}")));
        for v in [
            row.y,
            row.y_d,
            row.u1,
            row.e_p,
            row.alpha,
            row.u2,
            row.u,
            row.y_d_preview,
        ] {
            rec.push(format!("{v:?}"));
        }
        rec.push(u8::from(row.active).to_string());
        rec.push(format!("{:?}", row.e_p_oracle));
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io("<step log>", e))?;
    Ok(())
}

pub fn read_step_log_csv<R: std::io::Read>(reader: R) -> Result<Vec<StepRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let n = headers.iter().filter(|h| h.starts_with('x')).count();
    if headers.iter().collect::<Vec<_>>() != header(n).iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Format(format!("unexpected step log header {headers:?}")));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let f = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("{:?}: {e}", &record[i])))
        };
        let k = record[0]
            .parse::<usize>()
            .map_err(|e| Error::Format(format!("{:?}: {e}", &record[0])))?;
        let x = (1..=n).map(f).collect::<Result<Vec<_>>>()?;
        let b = n + 1;
        rows.push(StepRow {
            k,
            x,
            y: f(b)?,
            y_d: f(b + 1)?,
            u1: f(b + 2)?,
            e_p: f(b + 3)?,
            alpha: f(b + 4)?,
            u2: f(b + 5)?,
            u: f(b + 6)?,
            y_d_preview: f(b + 7)?,
            active: &record[b + 8] == "1",
            e_p_oracle: f(b + 9)?,
        });
    }
    Ok(rows)
}

pub fn write_step_log_json<W: Write>(writer: W, rows: &[StepRow]) -> Result<()> {
    serde_json::to_writer(writer, rows)?;
    Ok(())
}

/// Tracking and prediction RMS of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Over steps `k >= r`.
    pub rms_tracking: f64,
    /// Over steps from the first active prediction on (equal to
    /// `rms_tracking` for runs without an online module).
    pub rms_tracking_after_fill: f64,
    /// `e_p` against the exact error, over steps where the predictor was
    /// active. `None` when it never was.
    pub rms_prediction: Option<f64>,
    pub prediction_samples: usize,
}

impl Metrics {
    pub fn headline(&self, exclusion: StartupExclusion) -> f64 {
        match exclusion {
            StartupExclusion::RelativeDegree => self.rms_tracking,
            StartupExclusion::WindowFill => self.rms_tracking_after_fill,
        }
    }
}

fn rms(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (n > 0).then(|| (sum / n as f64).sqrt())
}

/// Tracking RMS of `y_d(k) - y(k)` over `k >= r` and prediction RMS over
/// the active rows.
pub fn metrics(rows: &[StepRow], r: usize) -> Result<Metrics> {
    let rms_tracking = rms(rows.iter().filter(|row| row.k >= r).map(|row| row.y_d - row.y))
        .ok_or(Error::Empty("step log"))?;
    let fill = rows.iter().find(|row| row.active).map_or(r, |row| row.k.max(r));
    let rms_tracking_after_fill =
        rms(rows.iter().filter(|row| row.k >= fill).map(|row| row.y_d - row.y)).unwrap_or(rms_tracking);
    let prediction_samples = rows.iter().filter(|row| row.active).count();
    let rms_prediction = rms(rows
        .iter()
        .filter(|row| row.active)
        .map(|row| row.e_p - row.e_p_oracle));
    Ok(Metrics {
        rms_tracking,
        rms_tracking_after_fill,
        rms_prediction,
        prediction_samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged { step: usize, reason: String },
}

impl RunStatus {
    pub fn is_bounded(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

/// Result of one closed-loop run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    pub status: RunStatus,
    pub steps: usize,
    pub metrics: Option<Metrics>,
    /// SHA-256 of the step log values.
    pub log_digest: String,
    #[serde(skip)]
    pub rows: Vec<StepRow>,
}

fn log_digest(rows: &[StepRow]) -> String {
    let mut h = Sha256::new();
    for row in rows {
        h.update((row.k as u64).to_le_bytes());
        for v in row.x.iter().chain([
            &row.y,
            &row.y_d,
            &row.u1,
            &row.e_p,
            &row.alpha,
            &row.u2,
            &row.u,
            &row.y_d_preview,
            &row.e_p_oracle,
        ]) {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update([u8::from(row.active)]);
    }
    hex::encode(h.finalize())
}

/// Simulates `policy` on the target and logs the run. Divergence is
/// recorded in the outcome; any other failure is returned as an error.
pub fn run_policy<P: crate::dynamics::Policy>(
    target: &LtiSystem,
    strategy: Strategy,
    policy: &mut P,
    records: impl FnOnce(&P) -> Option<Vec<StepRecord>>,
    reference: &SampledReference,
    x0: StateVector,
    steps: usize,
) -> Result<StrategyOutcome> {
    let (trace, status) = match simulate(target, policy, reference, x0, steps) {
        Ok(trace) => (trace, RunStatus::Completed),
        Err(e) if e.is_divergence() => {
            let step = e.divergence_step().unwrap_or(0);
            log::warn!("{} run diverged at step {step}: {e}", strategy.name());
            let trace = e.partial_trace().cloned().unwrap_or(SimTrace {
                states: Vec::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                dt: reference.dt,
            });
            (
                trace,
                RunStatus::Diverged {
                    step,
                    reason: e.to_string(),
                },
            )
        }
        Err(e) => return Err(e),
    };
    let records = records(policy);
    let rows = step_rows(target, &trace, records.as_deref(), reference);
    let metrics = if status.is_bounded() {
        Some(metrics(&rows, target.relative_degree())?)
    } else {
        None
    };
    Ok(StrategyOutcome {
        strategy,
        status,
        steps: rows.len(),
        metrics,
        log_digest: log_digest(&rows),
        rows,
    })
}

/// Open-loop source traces for training the inverse network.
pub fn source_training_traces(config: &ExperimentConfig) -> Result<Vec<SimTrace>> {
    let source = config.source.build()?;
    let dt = config.trajectory.dt;
    let data = &config.inverse.data;
    let steps = (data.duration / dt).round() as usize;
    let r = source.relative_degree();
    let mut traces = Vec::new();
    for &amp in &data.amplitudes {
        for w in data.frequencies() {
            let reference = SampledReference {
                samples: (0..=steps + r).map(|k| amp * (w * k as f64 * dt).sin()).collect(),
                dt,
            };
            traces.push(simulate(
                &source,
                &mut PassThrough,
                &reference,
                StateVector::zeros(source.state_dim()),
                steps,
            )?);
        }
    }
    Ok(traces)
}

/// Trains the inverse network described by `config` on source traces.
pub fn train_source_inverse(config: &ExperimentConfig) -> Result<(MlpInverseModel, TrainingReport)> {
    let source = config.source.build()?;
    let traces = source_training_traces(config)?;
    let dataset = build_inverse_dataset(&traces, source.relative_degree(), config.inverse.data.subsample)?;
    train_mlp(&dataset, &config.inverse.training, config.seed)
}

/// The offline module requested by `config`: analytic, loaded from disk,
/// or trained.
pub fn prepare_inverse(config: &ExperimentConfig) -> Result<(Inverse, Option<TrainingReport>)> {
    let source = config.source.build()?;
    match (config.inverse.kind, &config.inverse.model_path) {
        (InverseKind::Analytic, _) => Ok((AnalyticInverse::linear(source).into(), None)),
        (InverseKind::Mlp, Some(path)) => {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            let model = MlpInverseModel::load(file)?;
            if model.input_dim() != source.state_dim() + 1 {
                return Err(Error::Config(format!(
                    "saved network takes {} inputs, the source needs {}",
                    model.input_dim(),
                    source.state_dim() + 1
                )));
            }
            Ok((model.into(), None))
        }
        (InverseKind::Mlp, None) => {
            let (model, report) = train_source_inverse(config)?;
            Ok((model.into(), Some(report)))
        }
    }
}

/// Runs one strategy on the target. `gain` overrides the configured gain
/// of the full strategy.
pub fn run_strategy(
    config: &ExperimentConfig,
    inverse: &Inverse,
    strategy: Strategy,
    gain: Option<GainMode>,
    reference: &SampledReference,
) -> Result<StrategyOutcome> {
    let target = config.target.build()?;
    let r = target.relative_degree();
    let steps = config.trajectory.load()?.steps()?;
    let x0 = config.initial_state(target.state_dim());
    match strategy {
        Strategy::Baseline => run_policy(
            &target,
            strategy,
            &mut PassThrough,
            |_| None,
            reference,
            x0,
            steps,
        ),
        Strategy::Offline | Strategy::Full => {
            let online = match strategy {
                Strategy::Full => Some(OnlineModule::Gp(GpWindowModel::new(config.gp.clone())?)),
                _ => None,
            };
            let gain = gain.unwrap_or_else(|| config.gain.clone());
            let mut ctrl =
                TransferController::new(inverse.clone(), online, gain, r)?.with_u_max(config.u_max)?;
            run_policy(
                &target,
                strategy,
                &mut ctrl,
                |c| Some(c.records().to_vec()),
                reference,
                x0,
                steps,
            )
        }
    }
}

/// Everything a comparison run produced, minus the step logs.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub version: u32,
    pub name: String,
    pub seed: u64,
    pub config_digest: String,
    /// SHA-256 of the report with `digest` and `wall_time_s` blanked.
    pub digest: String,
    pub strategies: Vec<StrategyOutcome>,
    pub training: Option<TrainingReport>,
    pub wall_time_s: f64,
    pub config: ExperimentConfig,
}

impl RunReport {
    pub fn outcome(&self, strategy: Strategy) -> Option<&StrategyOutcome> {
        self.strategies.iter().find(|o| o.strategy == strategy)
    }

    fn compute_digest(&self) -> Result<String> {
        let mut blank = self.clone();
        blank.digest = String::new();
        blank.wall_time_s = 0.0;
        digest_json(&blank)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn digest_json<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Runs the strategies in `which` side by side on the configured
/// trajectory.
pub fn run_strategies(
    config: &ExperimentConfig,
    inverse: &Inverse,
    training: Option<TrainingReport>,
    which: &[Strategy],
) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let target = config.target.build()?;
    let reference = config.trajectory.sample(target.relative_degree())?;
    let strategies = which
        .par_iter()
        .map(|&s| run_strategy(config, inverse, s, None, &reference))
        .collect::<Result<Vec<_>>>()?;
    let mut report = RunReport {
        version: REPORT_VERSION,
        name: config.name.clone(),
        seed: config.seed,
        config_digest: digest_json(config)?,
        digest: String::new(),
        strategies,
        training,
        wall_time_s: 0.0,
        config: config.clone(),
    };
    report.digest = report.compute_digest()?;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Prepares the offline module and runs all three strategies.
pub fn run_comparison(config: &ExperimentConfig) -> Result<RunReport> {
    let (inverse, training) = prepare_inverse(config)?;
    run_strategies(config, &inverse, training, &Strategy::ALL)
}

/// `(|e_p - e_p*|, |y_d(k+r)|, |x(k)|)` for every active row.
pub fn residual_log(rows: &[StepRow]) -> Vec<ResidualSample> {
    rows.iter()
        .filter(|row| row.active)
        .map(|row| ResidualSample {
            lambda: (row.e_p - row.e_p_oracle).abs(),
            preview_norm: row.y_d_preview.abs(),
            state_norm: row.x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub status: RunStatus,
    pub rms_tracking: Option<f64>,
    pub check: BoundednessCheck,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub version: u32,
    pub name: String,
    pub seed: u64,
    pub budget: StabilityBudget,
    pub beta4: f64,
    /// `None` when any gain is allowed.
    pub alpha_max: Option<f64>,
    pub points: Vec<SweepPoint>,
    /// Smallest swept gain whose run hit the divergence guard.
    pub first_divergent_alpha: Option<f64>,
}

/// Fits the prediction-error envelope from a full run with the configured
/// gain.
pub fn fitted_budget(
    config: &ExperimentConfig,
    inverse: &Inverse,
) -> Result<(StabilityBudget, StrategyOutcome)> {
    let (source, target) = config.systems()?;
    let reference = config.trajectory.sample(target.relative_degree())?;
    let run = run_strategy(config, inverse, Strategy::Full, None, &reference)?;
    let residuals = residual_log(&run.rows);
    let prediction = if residuals.is_empty() {
        PredictionBudget::default()
    } else {
        fit_prediction_budget(&residuals)?
    };
    let budget = StabilityBudget::new(&source, &target, prediction, config.iss_tolerance)?;
    Ok((budget, run))
}

/// Runs the full strategy once per fixed gain and checks each against the
/// boundedness condition.
pub fn alpha_sweep(config: &ExperimentConfig, inverse: &Inverse, alphas: &[f64]) -> Result<SweepReport> {
    if alphas.iter().any(|a| !a.is_finite()) {
        return Err(Error::Config("swept gains must be finite".into()));
    }
    let (budget, _) = fitted_budget(config, inverse)?;
    let target = config.target.build()?;
    let reference = config.trajectory.sample(target.relative_degree())?;
    let points = alphas
        .par_iter()
        .map(|&alpha| {
            let run = run_strategy(
                config,
                inverse,
                Strategy::Full,
                Some(GainMode::Fixed { alpha }),
                &reference,
            )?;
            if !run.status.is_bounded() {
                log::info!("alpha = {alpha} hit the divergence guard");
            }
            Ok(SweepPoint {
                alpha,
                rms_tracking: run.metrics.map(|m| m.rms_tracking),
                status: run.status,
                check: budget.check(alpha),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let first_divergent_alpha = points
        .iter()
        .filter(|p| !p.status.is_bounded())
        .map(|p| p.alpha.abs())
        .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a))));
    let alpha_max = budget.alpha_max();
    Ok(SweepReport {
        version: REPORT_VERSION,
        name: config.name.clone(),
        seed: config.seed,
        beta4: budget.beta4(),
        alpha_max: alpha_max.is_finite().then_some(alpha_max),
        budget,
        points,
        first_divergent_alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::InverseKind;

    fn quick_analytic(duration: f64) -> ExperimentConfig {
        let mut config = ExperimentConfig::quick(duration);
        config.inverse.kind = InverseKind::Analytic;
        config.gp.fit = crate::gp::HyperFit::Online {
            stride: 10,
            max_evals: 100,
        };
        config
    }

    #[test]
    fn metrics_examples() {
        let row = |k: usize, err: f64| StepRow {
            k,
            x: vec![0.0],
            y: 0.0,
            y_d: err,
            u1: 0.0,
            e_p: 0.0,
            alpha: 0.0,
            u2: 0.0,
            u: 0.0,
            y_d_preview: 0.0,
            active: false,
            e_p_oracle: 0.0,
        };
        let rows: Vec<_> = (0..10)
            .map(|k| row(k, if k == 0 { 100.0 } else { 2.0 }))
            .collect();
        let m = metrics(&rows, 1).unwrap();
        assert_eq!(m.rms_tracking, 2.0);
        assert_eq!(m.rms_prediction, None);
        let perfect: Vec<_> = (0..10).map(|k| row(k, 0.0)).collect();
        assert_eq!(metrics(&perfect, 1).unwrap().rms_tracking, 0.0);
        assert!(matches!(metrics(&[], 1), Err(Error::Empty(_))));
    }

    #[test]
    fn step_log_csv_round_trip() {
        let config = quick_analytic(0.5);
        let (inverse, _) = prepare_inverse(&config).unwrap();
        let reference = config.trajectory.sample(1).unwrap();
        let run = run_strategy(&config, &inverse, Strategy::Full, None, &reference).unwrap();
        let mut buf = Vec::new();
        write_step_log_csv(&mut buf, &run.rows).unwrap();
        let back = read_step_log_csv(buf.as_slice()).unwrap();
        assert_eq!(back, run.rows);
        let m = metrics(&back, 1).unwrap();
        assert_eq!(Some(m), run.metrics);
    }

    #[test]
    fn comparison_is_reproducible() {
        let config = quick_analytic(1.0);
        let a = run_comparison(&config).unwrap();
        let b = run_comparison(&config).unwrap();
        assert_eq!(a.digest, b.digest);
        assert_eq!(a.strategies.len(), 3);
        assert!(a.strategies.iter().all(|s| s.status.is_bounded()));
    }

    #[test]
    fn zero_gain_matches_offline() {
        let config = quick_analytic(1.0);
        let (inverse, _) = prepare_inverse(&config).unwrap();
        let reference = config.trajectory.sample(1).unwrap();
        let offline = run_strategy(&config, &inverse, Strategy::Offline, None, &reference).unwrap();
        let zero = run_strategy(
            &config,
            &inverse,
            Strategy::Full,
            Some(GainMode::Fixed { alpha: 0.0 }),
            &reference,
        )
        .unwrap();
        for (a, b) in offline.rows.iter().zip(&zero.rows) {
            assert_eq!((a.x.clone(), a.y, a.u), (b.x.clone(), b.y, b.u));
        }
    }

    #[test]
    fn huge_gain_trips_the_guard() {
        let mut config = quick_analytic(1.0);
        config.u_max = 1e3;
        let (inverse, _) = prepare_inverse(&config).unwrap();
        let reference = config.trajectory.sample(1).unwrap();
        let run = run_strategy(
            &config,
            &inverse,
            Strategy::Full,
            Some(GainMode::Fixed { alpha: 50.0 }),
            &reference,
        )
        .unwrap();
        assert!(matches!(run.status, RunStatus::Diverged { .. }));
        assert!(run.metrics.is_none());
    }
}
