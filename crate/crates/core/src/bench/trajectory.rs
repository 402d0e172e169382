use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Reference, SampledReference, SIMULATION_DT};
use crate::error::{Error, Result};

/// One term `amplitude * sin(frequency * t + phase)`, frequency in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineComponent {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Where the desired output comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    /// `offset + sum of sine components`.
    Sinusoids {
        components: Vec<SineComponent>,
        #[serde(default)]
        offset: f64,
    },
    /// A trajectory CSV file, read and resampled when the trajectory is
    /// resolved.
    Csv {
        path: PathBuf,
        #[serde(default)]
        column: Option<String>,
    },
    /// Already loaded `(t, y_d)` samples with strictly increasing times.
    Samples { times: Vec<f64>, values: Vec<f64> },
}

/// A desired-output trajectory on the simulation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub signal: Signal,
    pub dt: f64,
    /// Simulated horizon in seconds. Sampled signals default to their own
    /// span.
    #[serde(default)]
    pub duration: Option<f64>,
}

/// `sin(2 pi t / 8) + cos(2 pi t / 16) - 1` sampled every 1.5 ms for 48 s.
pub fn make_test_trajectory() -> TrajectorySpec {
    TrajectorySpec {
        signal: Signal::Sinusoids {
            components: vec![
                SineComponent {
                    amplitude: 1.0,
                    frequency: 2.0 * PI / 8.0,
                    phase: 0.0,
                },
                SineComponent {
                    amplitude: 1.0,
                    frequency: 2.0 * PI / 16.0,
                    phase: PI / 2.0,
                },
            ],
            offset: -1.0,
        },
        dt: SIMULATION_DT,
        duration: Some(48.0),
    }
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!(
                "trajectory dt must be positive, got {}",
                self.dt
            )));
        }
        if let Some(d) = self.duration {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::Config(format!(
                    "trajectory duration must be nonnegative, got {d}"
                )));
            }
        }
        match &self.signal {
            Signal::Sinusoids { components, offset } => {
                let finite = components
                    .iter()
                    .all(|c| c.amplitude.is_finite() && c.frequency.is_finite() && c.phase.is_finite());
                if !finite || !offset.is_finite() {
                    return Err(Error::Config("sinusoid parameters must be finite".into()));
                }
                if self.duration.is_none() {
                    return Err(Error::Config("sinusoidal trajectories need a duration".into()));
                }
            }
            Signal::Samples { times, values } => check_samples(times, values)?,
            Signal::Csv { .. } => {}
        }
        Ok(())
    }

    /// Reads a CSV signal into memory. Other signals are returned unchanged.
    pub fn load(&self) -> Result<TrajectorySpec> {
        match &self.signal {
            Signal::Csv { path, column } => {
                let loaded = ingest_csv_trajectory(path, column.as_deref(), self.dt)?;
                Ok(TrajectorySpec {
                    duration: self.duration.or(loaded.duration),
                    ..loaded
                })
            }
            _ => Ok(self.clone()),
        }
    }

    /// Number of control steps over the horizon.
    pub fn steps(&self) -> Result<usize> {
        let duration = match (&self.signal, self.duration) {
            (_, Some(d)) => d,
            (Signal::Samples { times, .. }, None) => times[times.len() - 1] - times[0],
            (Signal::Csv { .. }, None) => {
                return Err(Error::Config(
                    "load the CSV trajectory before asking for its length".into(),
                ))
            }
            (Signal::Sinusoids { .. }, None) => {
                return Err(Error::Config("sinusoidal trajectories need a duration".into()))
            }
        };
        Ok((duration / self.dt).round() as usize)
    }

    /// `y_d` at time `t` (seconds from the start of the trajectory).
    pub fn value_at(&self, t: f64) -> Result<f64> {
        match &self.signal {
            Signal::Sinusoids { components, offset } => Ok(offset
                + components
                    .iter()
                    .map(|c| c.amplitude * (c.frequency * t + c.phase).sin())
                    .sum::<f64>()),
            Signal::Samples { times, values } => Ok(interpolate(times, values, times[0] + t)),
            Signal::Csv { .. } => Err(Error::Config("load the CSV trajectory before sampling it".into())),
        }
    }

    /// Samples `y_d(k)` for `k = 0..=steps + preview`, so every step of a
    /// run of [`TrajectorySpec::steps`] steps has its `r`-step preview.
    pub fn sample(&self, preview: usize) -> Result<SampledReference> {
        self.validate()?;
        let spec = self.load()?;
        let steps = spec.steps()?;
        let samples = (0..=steps + preview)
            .map(|k| spec.value_at(k as f64 * spec.dt))
            .collect::<Result<Vec<_>>>()?;
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory samples"));
        }
        Ok(SampledReference { samples, dt: spec.dt })
    }

    /// A priori bound on `|y_d|`: the sum of amplitudes plus the offset for
    /// sinusoids, the largest sample otherwise.
    pub fn bound(&self) -> Result<f64> {
        match &self.signal {
            Signal::Sinusoids { components, offset } => {
                Ok(offset.abs() + components.iter().map(|c| c.amplitude.abs()).sum::<f64>())
            }
            Signal::Samples { values, .. } => Ok(values.iter().fold(0.0, |m, v| m.max(v.abs()))),
            Signal::Csv { .. } => self.load()?.bound(),
        }
    }
}

fn check_samples(times: &[f64], values: &[f64]) -> Result<()> {
    if times.len() != values.len() {
        return Err(Error::Format("times and values differ in length".into()));
    }
    if times.len() < 2 {
        return Err(Error::Format(
            "a sampled trajectory needs at least two rows".into(),
        ));
    }
    if times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::Format("trajectory contains non-finite values".into()));
    }
    if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Format(format!(
            "time is not strictly increasing at row {}",
            i + 2
        )));
    }
    Ok(())
}

/// Linear interpolation, clamped to the end values outside the data.
fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= times[0] {
        return values[0];
    }
    let last = times.len() - 1;
    if t >= times[last] {
        return values[last];
    }
    let i = times.partition_point(|&s| s <= t);
    let (t0, t1) = (times[i - 1], times[i]);
    let w = (t - t0) / (t1 - t0);
    values[i - 1] + w * (values[i] - values[i - 1])
}

/// Reads a trajectory CSV with a `t` column and one or more output columns
/// (`t,yd` or `t,x,y,z`). `column` picks the output; without it the file
/// must have a `yd` column or exactly one output column.
pub fn ingest_csv_trajectory(
    path: impl AsRef<Path>,
    column: Option<&str>,
    dt: f64,
) -> Result<TrajectorySpec> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (times, values) = read_trajectory_csv(file, column)?;
    let duration = times[times.len() - 1] - times[0];
    let spec = TrajectorySpec {
        signal: Signal::Samples { times, values },
        dt,
        duration: Some(duration),
    };
    spec.validate()?;
    Ok(spec)
}

/// Parses trajectory CSV text from any reader.
pub fn read_trajectory_csv<R: std::io::Read>(
    reader: R,
    column: Option<&str>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let t_col = find("t").ok_or_else(|| Error::Format("trajectory CSV has no `t` column".into()))?;
    let outputs: Vec<&str> = headers.iter().filter(|h| *h != "t").collect();
    let y_col = match column {
        Some(name) => {
            find(name).ok_or_else(|| Error::Format(format!("trajectory CSV has no `{name}` column")))?
        }
        None => match (find("yd"), outputs.as_slice()) {
            (Some(i), _) => i,
            (None, [only]) => find(only).expect("header is present"),
            (None, _) => {
                return Err(Error::Format(format!(
                    "pick one of the output columns {outputs:?}"
                )))
            }
        },
    };
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |i: usize| -> Result<f64> {
            let raw = record
                .get(i)
                .ok_or_else(|| Error::Format(format!("row {} is missing a column", row + 2)))?;
            raw.parse::<f64>()
                .map_err(|e| Error::Format(format!("row {}: {raw:?}: {e}", row + 2)))
        };
        times.push(field(t_col)?);
        values.push(field(y_col)?);
    }
    if times.is_empty() {
        return Err(Error::Format("trajectory CSV has no data rows".into()));
    }
    check_samples(&times, &values)?;
    Ok((times, values))
}

/// Writes `t,yd` rows for a sampled reference.
pub fn write_trajectory_csv<W: std::io::Write>(writer: W, reference: &SampledReference) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "yd"])?;
    for (k, v) in reference.samples.iter().enumerate() {
        w.write_record([format!("{:?}", k as f64 * reference.dt()), format!("{v:?}")])?;
    }
    w.flush().map_err(|e| Error::io("<trajectory>", e))?;
    Ok(())
}
