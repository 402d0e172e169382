use std::path::PathBuf;

use crate::dynamics::SimTrace;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A simulation produced a non-finite state. The trace up to the failing
    /// step is attached.
    #[error("simulation diverged at step {step}")]
    SimulationDiverged {
        step: usize,
        partial: Option<Box<SimTrace>>,
    },

    /// No `r <= n` with `|C A^(r-1) B| > eps` exists.
    #[error("relative degree is ill-defined: C A^(j-1) B vanishes for all j <= {n}")]
    IllDefinedRelativeDegree { n: usize },

    #[error("affine input-output map disagrees with f, g, h by {residual:e} at a sampled point")]
    InconsistentLiftedMap { residual: f64 },

    #[error("inverse is singular at this state (|G(x)| = {gain:e})")]
    SingularInverse { gain: f64 },

    #[error("eigenvalue computation failed: {0}")]
    Analysis(String),

    #[error("system is not input-to-state stable (spectral radius {spectral_radius})")]
    NotIss { spectral_radius: f64 },

    #[error("similarity is undefined: source input gain {gain:e} is singular")]
    UndefinedSimilarity { gain: f64 },

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    /// The control input exceeded the divergence guard. When raised inside
    /// [`simulate`](crate::dynamics::simulate) the trace so far is attached.
    #[error("control input {u:e} at step {step} exceeds guard {limit:e}")]
    ControlDiverged {
        step: usize,
        u: f64,
        limit: f64,
        partial: Option<Box<SimTrace>>,
    },

    #[error("format: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that indicate an unstable closed loop rather than a
    /// misconfiguration.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::SimulationDiverged { .. } | Error::ControlDiverged { .. }
        )
    }

    /// Step at which a divergence was detected.
    pub fn divergence_step(&self) -> Option<usize> {
        match self {
            Error::SimulationDiverged { step, .. } | Error::ControlDiverged { step, .. } => Some(*step),
            _ => None,
        }
    }

    /// Trace recorded before a divergence, if one was attached.
    pub fn partial_trace(&self) -> Option<&SimTrace> {
        match self {
            Error::SimulationDiverged { partial, .. } | Error::ControlDiverged { partial, .. } => {
                partial.as_deref()
            }
            _ => None,
        }
    }

    pub(crate) fn with_partial(self, trace: SimTrace) -> Self {
        match self {
            Error::SimulationDiverged { step, .. } => Error::SimulationDiverged {
                step,
                partial: Some(Box::new(trace)),
            },
            Error::ControlDiverged { step, u, limit, .. } => Error::ControlDiverged {
                step,
                u,
                limit,
                partial: Some(Box::new(trace)),
            },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
