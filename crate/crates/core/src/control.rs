//! Two-module transfer controller.
//!
//! The applied input is `u(k) = u1(k) + u2(k)`. The offline term `u1` comes
//! from an inverse of the source system evaluated on the target's state and
//! the preview `y_d(k+r)`. The online term `u2 = alpha * e_p` corrects it with
//! a prediction of the tracking error that `u1` alone would leave at `k+r`.
//!
//! The online model learns from the target as it runs: once `y(k)` is
//! measured, the record kept from step `k-r` becomes the training pair
//! `[x(k-r), u(k-r), y_d(k)] -> y_d(k) - y(k)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Policy, StateVector};
use crate::error::{Error, Result};
use crate::gp::GpWindowModel;
use crate::inverse::{AnalyticInverse, Inverse};

/// Default bound on `|u|` before a run is aborted.
pub const DEFAULT_U_MAX: f64 = 1e6;
/// Derivatives smaller than this leave the estimated gain unchanged.
pub const ALPHA_DENOM_EPS: f64 = 1e-9;

/// How `alpha` is chosen at each step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GainMode {
    Fixed {
        alpha: f64,
    },
    /// `alpha = -1 / (d mean / d u1)` from the online model, clamped to
    /// `sign * [floor, cap]`. With `smoothing = Some(l)` the estimate is
    /// filtered as `l * previous + (1 - l) * new` before clamping.
    Estimated {
        #[serde(default = "default_floor")]
        floor: f64,
        #[serde(default = "default_cap")]
        cap: f64,
        #[serde(default = "default_sign")]
        sign: f64,
        #[serde(default)]
        smoothing: Option<f64>,
    },
}

fn default_floor() -> f64 {
    0.05
}

fn default_cap() -> f64 {
    20.0
}

fn default_sign() -> f64 {
    1.0
}

impl Default for GainMode {
    fn default() -> Self {
        GainMode::Estimated {
            floor: default_floor(),
            cap: default_cap(),
            sign: default_sign(),
            smoothing: None,
        }
    }
}

impl GainMode {
    pub fn estimated() -> Self {
        GainMode::default()
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GainMode::Fixed { alpha } if !alpha.is_finite() => Err(Error::NonFinite("fixed alpha")),
            GainMode::Fixed { .. } => Ok(()),
            GainMode::Estimated {
                floor,
                cap,
                sign,
                smoothing,
            } => {
                if !(floor > 0.0 && floor <= cap && cap.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "gain bounds need 0 < floor <= cap, got [{floor}, {cap}]"
                    )));
                }
                if sign != 1.0 && sign != -1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "gain sign must be +1 or -1, got {sign}"
                    )));
                }
                if let Some(l) = smoothing {
                    if !(0.0..1.0).contains(&l) {
                        return Err(Error::InvalidArgument(format!(
                            "smoothing must be in [0, 1), got {l}"
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// The error predictor behind `u2`.
#[derive(Clone, Debug)]
pub enum OnlineModule {
    /// Sliding-window GP trained on the running target.
    Gp(GpWindowModel),
    /// Exact error of a known target, `e_p = y_d(k+r) - F_t(x) - G_t(x) u1`.
    /// Used to check the control algebra without learning error.
    Oracle(AnalyticInverse),
}

/// What the controller did at one step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub k: usize,
    /// `y_d(k+r)` as seen by the controller.
    pub preview: f64,
    pub u1: f64,
    pub e_p: f64,
    pub alpha: f64,
    pub u2: f64,
    pub u: f64,
    /// No prediction was made: there is no online module, or it had too
    /// little data.
    pub cold: bool,
}

/// A training pair handed to the online model at step `step`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub step: usize,
    /// Step whose state and input form the regressor, `step - r`.
    pub origin: usize,
    pub input: Vec<f64>,
    pub label: f64,
}

#[derive(Clone, Debug)]
struct Pending {
    k: usize,
    x: StateVector,
    u: f64,
    preview: f64,
}

/// Offline inverse plus optional online error correction.
#[derive(Clone, Debug)]
pub struct TransferController {
    inverse: Inverse,
    online: Option<OnlineModule>,
    gain: GainMode,
    r: usize,
    u_max: f64,
    pending: VecDeque<Pending>,
    last_alpha: Option<f64>,
    records: Vec<StepRecord>,
    observations: Vec<Observation>,
}

impl TransferController {
    pub fn new(
        inverse: impl Into<Inverse>,
        online: Option<OnlineModule>,
        gain: GainMode,
        r: usize,
    ) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidArgument("relative degree must be positive".into()));
        }
        gain.validate()?;
        Ok(TransferController {
            inverse: inverse.into(),
            online,
            gain,
            r,
            u_max: DEFAULT_U_MAX,
            pending: VecDeque::with_capacity(r + 1),
            last_alpha: None,
            records: Vec::new(),
            observations: Vec::new(),
        })
    }

    /// Offline-only controller: `u = u1`.
    pub fn offline(inverse: impl Into<Inverse>, r: usize) -> Result<Self> {
        TransferController::new(inverse, None, GainMode::Fixed { alpha: 0.0 }, r)
    }

    pub fn with_u_max(mut self, u_max: f64) -> Result<Self> {
        if !(u_max > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "u_max must be positive, got {u_max}"
            )));
        }
        self.u_max = u_max;
        Ok(self)
    }

    pub fn relative_degree(&self) -> usize {
        self.r
    }

    pub fn gain_mode(&self) -> &GainMode {
        &self.gain
    }

    pub fn online(&self) -> Option<&OnlineModule> {
        self.online.as_ref()
    }

    pub fn is_offline_only(&self) -> bool {
        self.online.is_none()
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Number of records still waiting for their output. Never exceeds `r`.
    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn into_records(self) -> Vec<StepRecord> {
        self.records
    }

    /// One control step: `x = x(k)`, `preview = y_d(k+r)`, `y_now = y(k)`.
    pub fn control_step(&mut self, k: usize, x: &StateVector, preview: f64, y_now: f64) -> Result<f64> {
        self.retire(k, y_now)?;

        let u1 = self.inverse.reference(x, preview)?;
        let record = match self.online {
            None => StepRecord {
                k,
                preview,
                u1,
                e_p: 0.0,
                alpha: 0.0,
                u2: 0.0,
                u: u1,
                cold: true,
            },
            Some(_) => {
                let query = regressor(x, u1, preview);
                let (e_p, cold) = self.predict_error(&query)?;
                let alpha = self.select_gain(&query)?;
                let u2 = alpha * e_p;
                StepRecord {
                    k,
                    preview,
                    u1,
                    e_p,
                    alpha,
                    u2,
                    u: u1 + u2,
                    cold,
                }
            }
        };
        let u = record.u;
        if !(u.abs() <= self.u_max) {
            return Err(Error::ControlDiverged {
                step: k,
                u,
                limit: self.u_max,
                partial: None,
            });
        }
        self.records.push(record);
        if self.online.is_some() {
            self.pending.push_back(Pending {
                k,
                x: x.clone(),
                u,
                preview,
            });
        }
        Ok(u)
    }

    /// Feeds the record from step `k - r`, whose preview was `y_d(k)`, to
    /// the online model now that `y(k)` is known.
    fn retire(&mut self, k: usize, y_now: f64) -> Result<()> {
        if self.pending.len() < self.r {
            return Ok(());
        }
        let p = self.pending.pop_front().expect("pending is non-empty");
        if p.k + self.r != k {
            return Err(Error::InvalidArgument(format!(
                "controller expected step {}, got {k}",
                p.k + self.r
            )));
        }
        let input = regressor(&p.x, p.u, p.preview);
        let label = p.preview - y_now;
        if let Some(OnlineModule::Gp(gp)) = &mut self.online {
            gp.observe(&input, label)?;
        }
        self.observations.push(Observation {
            step: k,
            origin: p.k,
            input,
            label,
        });
        Ok(())
    }

    /// Predicted error `e_p(k+r)` for the query, and whether the predictor
    /// was still cold (in which case the prediction is 0).
    pub fn predict_error(&self, query: &[f64]) -> Result<(f64, bool)> {
        match &self.online {
            None => Ok((0.0, true)),
            Some(OnlineModule::Gp(gp)) => {
                let p = gp.predict(query)?;
                Ok((p.mean, p.cold))
            }
            Some(OnlineModule::Oracle(target)) => {
                let (x, u1, preview) = split_regressor(query);
                let (f, g) = target.io_gains(&x);
                Ok((preview - f - g * u1, false))
            }
        }
    }

    /// Gain for the current query. Estimated mode falls back to the last
    /// valid gain (or `sign * floor` before there is one) when the model is
    /// cold or its derivative is too flat.
    pub fn select_gain(&mut self, query: &[f64]) -> Result<f64> {
        let GainMode::Estimated {
            floor,
            cap,
            sign,
            smoothing,
        } = self.gain
        else {
            let GainMode::Fixed { alpha } = self.gain else {
                unreachable!()
            };
            return Ok(alpha);
        };
        let u_dim = query.len() - 2;
        let denom = match &self.online {
            None => None,
            Some(OnlineModule::Gp(gp)) => gp.mean_derivative_wrt(query, u_dim)?,
            Some(OnlineModule::Oracle(target)) => {
                let (x, _, _) = split_regressor(query);
                Some(-target.io_gains(&x).1)
            }
        };
        let fallback = self.last_alpha.unwrap_or(sign * floor);
        let Some(denom) = denom.filter(|d| d.abs() >= ALPHA_DENOM_EPS && d.is_finite()) else {
            if self.last_alpha.is_some() {
                log::debug!("gain estimate unavailable; keeping alpha = {fallback}");
            }
            return Ok(fallback);
        };
        let raw = -1.0 / denom;
        let filtered = match (smoothing, self.last_alpha) {
            (Some(l), Some(prev)) => l * prev + (1.0 - l) * raw,
            _ => raw,
        };
        let alpha = sign * (sign * filtered).clamp(floor, cap);
        self.last_alpha = Some(alpha);
        Ok(alpha)
    }
}

impl Policy for TransferController {
    fn control(&mut self, k: usize, x: &StateVector, y: f64, preview: f64) -> Result<f64> {
        self.control_step(k, x, preview, y)
    }
}

/// Online model regressor `[x, u, y_d(k+r)]`.
pub fn regressor(x: &StateVector, u: f64, preview: f64) -> Vec<f64> {
    let mut v: Vec<f64> = x.iter().copied().collect();
    v.push(u);
    v.push(preview);
    v
}

fn split_regressor(q: &[f64]) -> (StateVector, f64, f64) {
    let n = q.len() - 2;
    (StateVector::from_column_slice(&q[..n]), q[n], q[n + 1])
}
