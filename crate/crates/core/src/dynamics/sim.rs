use super::StateVector;
use crate::error::{Error, Result};

/// A plant that can be stepped one sample at a time.
pub trait Plant {
    fn state_dim(&self) -> usize;

    /// Number of steps before an input first affects the output.
    fn relative_degree(&self) -> usize;

    /// Next state without any finiteness check.
    fn step(&self, x: &StateVector, u: f64) -> StateVector;

    fn output(&self, x: &StateVector) -> f64;

    /// [`Plant::step`] with input validation. `k` is only used to label
    /// the error.
    fn try_step(&self, k: usize, x: &StateVector, u: f64) -> Result<StateVector> {
        if x.len() != self.state_dim() {
            return Err(Error::Dimension {
                expected: self.state_dim(),
                got: x.len(),
                context: "state vector",
            });
        }
        if !u.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SimulationDiverged {
                step: k,
                partial: None,
            });
        }
        let next = self.step(x, u);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::SimulationDiverged {
                step: k,
                partial: None,
            });
        }
        Ok(next)
    }
}

/// Source of desired outputs `y_d(k)`. Must be defined for every index the
/// simulation asks for, including the `r`-step preview.
pub trait Reference {
    fn desired(&self, k: usize) -> f64;
    fn dt(&self) -> f64;
}

/// Desired output sampled on a fixed grid. Indices past the end clamp to the
/// last sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledReference {
    pub samples: Vec<f64>,
    pub dt: f64,
}

impl Reference for SampledReference {
    fn desired(&self, k: usize) -> f64 {
        match self.samples.get(k) {
            Some(&v) => v,
            None => self.samples.last().copied().unwrap_or(0.0),
        }
    }

    fn dt(&self) -> f64 {
        self.dt
    }
}

/// A feedback policy `(k, x(k), y(k), y_d(k+r)) -> u(k)`.
pub trait Policy {
    fn control(&mut self, k: usize, x: &StateVector, y: f64, preview: f64) -> Result<f64>;
}

/// Adapts a closure into a [`Policy`].
pub struct FnPolicy<F>(pub F);

impl<F> Policy for FnPolicy<F>
where
    F: FnMut(usize, &StateVector, f64, f64) -> f64,
{
    fn control(&mut self, k: usize, x: &StateVector, y: f64, preview: f64) -> Result<f64> {
        Ok((self.0)(k, x, y, preview))
    }
}

/// `u(k) = y_d(k+r)`: the reference is passed straight to the closed-loop
/// baseline.
#[derive(Clone, Copy, Debug, Default)]
pub struct PassThrough;

impl Policy for PassThrough {
    fn control(&mut self, _k: usize, _x: &StateVector, _y: f64, preview: f64) -> Result<f64> {
        Ok(preview)
    }
}

/// Closed-loop record. `states` and `outputs` have one more entry than
/// `inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    pub states: Vec<StateVector>,
    pub inputs: Vec<f64>,
    pub outputs: Vec<f64>,
    pub dt: f64,
}

impl SimTrace {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }
}

/// Runs `steps` control steps from `x0`.
///
/// At step `k` the policy sees `x(k)`, `y(k)` and the preview `y_d(k+r)`.
/// A non-finite input or state aborts the run with
/// [`Error::SimulationDiverged`], and a policy that trips its own guard
/// aborts it with [`Error::ControlDiverged`]. Both carry the trace so far.
pub fn simulate<P, C, R>(
    plant: &P,
    policy: &mut C,
    reference: &R,
    x0: StateVector,
    steps: usize,
) -> Result<SimTrace>
where
    P: Plant + ?Sized,
    C: Policy + ?Sized,
    R: Reference + ?Sized,
{
    if x0.len() != plant.state_dim() {
        return Err(Error::Dimension {
            expected: plant.state_dim(),
            got: x0.len(),
            context: "initial state",
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    let r = plant.relative_degree();
    let mut trace = SimTrace {
        states: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps),
        outputs: Vec::with_capacity(steps + 1),
        dt: reference.dt(),
    };
    let mut x = x0;
    for k in 0..steps {
        let y = plant.output(&x);
        trace.outputs.push(y);
        let stepped = policy
            .control(k, &x, y, reference.desired(k + r))
            .and_then(|u| plant.try_step(k, &x, u).map(|next| (u, next)));
        let (u, next) = match stepped {
            Ok(v) => v,
            Err(e) if e.is_divergence() => {
                trace.states.push(x);
                return Err(e.with_partial(trace));
            }
            Err(e) => return Err(e),
        };
        trace.inputs.push(u);
        trace.states.push(std::mem::replace(&mut x, next));
    }
    trace.outputs.push(plant.output(&x));
    trace.states.push(x);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{source_system, target_system, LtiSystem};

    fn v(x: &[f64]) -> StateVector {
        StateVector::from_column_slice(x)
    }

    #[test]
    fn step_examples() {
        let s = source_system();
        assert_eq!(s.step(&v(&[0.0, 0.0]), 1.0), v(&[0.0, 1.0]));
        assert_eq!(s.step(&v(&[0.0, 0.0]), 0.0), v(&[0.0, 0.0]));
        let t = target_system();
        let next = t.step(&v(&[1.0, 1.0]), 0.0);
        assert_eq!(next[0], 1.0);
        assert!((next[1] - 0.76).abs() < 1e-15);
    }

    #[test]
    fn try_step_flags_non_finite() {
        let s = source_system();
        let err = s.try_step(7, &v(&[0.0, 0.0]), f64::INFINITY).unwrap_err();
        assert!(matches!(err, Error::SimulationDiverged { step: 7, .. }));
    }

    #[test]
    fn zero_everything_gives_zero_trace() {
        let s = source_system();
        let reference = SampledReference {
            samples: vec![0.0; 20],
            dt: 1.0,
        };
        let mut zero = FnPolicy(|_, _: &StateVector, _, _| 0.0);
        let trace = simulate(&s, &mut zero, &reference, v(&[0.0, 0.0]), 10).unwrap();
        assert_eq!(trace.states.len(), 11);
        assert_eq!(trace.outputs.len(), 11);
        assert_eq!(trace.inputs.len(), 10);
        assert!(trace.outputs.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn divergence_attaches_partial_trace() {
        let unstable = LtiSystem::from_rows(&[&[1e200]], &[1.0], &[1.0]).unwrap();
        let reference = SampledReference {
            samples: vec![1.0; 10],
            dt: 1.0,
        };
        let err = simulate(&unstable, &mut PassThrough, &reference, v(&[1.0]), 8).unwrap_err();
        match err {
            Error::SimulationDiverged { step, partial } => {
                let partial = partial.unwrap();
                assert_eq!(partial.inputs.len(), step);
                assert_eq!(partial.states.len(), step + 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn exact_inverse_tracks_source() {
        let s = source_system();
        let (la, lb) = (s.lifted_a().clone(), s.lifted_b());
        let reference = SampledReference {
            samples: (0..300).map(|k| (0.05 * k as f64).sin()).collect(),
            dt: 0.01,
        };
        let mut inverse = FnPolicy(move |_, x: &StateVector, _, yd: f64| (yd - la.dot(&x.transpose())) / lb);
        let trace = simulate(&s, &mut inverse, &reference, v(&[0.0, 0.0]), 250).unwrap();
        for k in 1..=250 {
            assert!((trace.outputs[k] - reference.desired(k)).abs() < 1e-10);
        }
    }
}
