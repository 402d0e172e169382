use crate::dynamics::SimTrace;
use crate::error::{Error, Result};

/// Supervised pairs `[x(k), y(k+r)] -> u(k)` taken from recorded traces.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InverseDataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub r: usize,
    /// Traces dropped because they had fewer than `r + 1` states.
    pub skipped_traces: usize,
}

impl InverseDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.inputs.first().map(Vec::len)
    }
}

/// Pairs the state and input at step `k` with the measured output at `k + r`
/// of the same trace. Every `stride`-th step is kept (`stride = 1` keeps all
/// `states - r` pairs per trace).
pub fn build_inverse_dataset(traces: &[SimTrace], r: usize, stride: usize) -> Result<InverseDataset> {
    if r == 0 {
        return Err(Error::InvalidArgument("relative degree must be positive".into()));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    let mut out = InverseDataset {
        r,
        ..Default::default()
    };
    for trace in traces {
        if trace.states.len() < r + 1 {
            out.skipped_traces += 1;
            continue;
        }
        let pairs = (trace.states.len() - r).min(trace.inputs.len());
        for k in (0..pairs).step_by(stride) {
            let mut input: Vec<f64> = trace.states[k].iter().copied().collect();
            input.push(trace.outputs[k + r]);
            out.inputs.push(input);
            out.labels.push(trace.inputs[k]);
        }
    }
    if out.skipped_traces > 0 {
        log::warn!(
            "skipped {} traces shorter than r + 1 = {}",
            out.skipped_traces,
            r + 1
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, source_system, FnPolicy, PassThrough, SampledReference, StateVector};

    fn trace(steps: usize, signal: impl Fn(usize) -> f64) -> SimTrace {
        let reference = SampledReference {
            samples: (0..steps + 2).map(&signal).collect(),
            dt: 0.1,
        };
        simulate(
            &source_system(),
            &mut PassThrough,
            &reference,
            StateVector::zeros(2),
            steps,
        )
        .unwrap()
    }

    #[test]
    fn eleven_states_give_ten_pairs() {
        let t = trace(10, |k| (k as f64 * 0.3).sin());
        assert_eq!(t.states.len(), 11);
        let ds = build_inverse_dataset(std::slice::from_ref(&t), 1, 1).unwrap();
        assert_eq!(ds.len(), 10);
        for (k, (input, label)) in ds.inputs.iter().zip(&ds.labels).enumerate() {
            assert_eq!(input[..2], t.states[k].as_slice()[..]);
            assert_eq!(input[2], t.outputs[k + 1]);
            assert_eq!(*label, t.inputs[k]);
        }
    }

    #[test]
    fn pairs_never_cross_traces() {
        let a = trace(5, |_| 1.0);
        let b = trace(7, |_| -1.0);
        let ds = build_inverse_dataset(&[a, b], 2, 1).unwrap();
        assert_eq!(ds.len(), (6 - 2) + (8 - 2));
        assert!(ds.labels[..4].iter().all(|&u| u == 1.0));
        assert!(ds.labels[4..].iter().all(|&u| u == -1.0));
    }

    #[test]
    fn zero_trace_has_zero_labels() {
        let t = trace(20, |_| 0.0);
        let ds = build_inverse_dataset(&[t], 1, 1).unwrap();
        assert!(ds.labels.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn short_traces_are_skipped() {
        let mut zero = FnPolicy(|_, _: &StateVector, _, _| 0.0);
        let reference = SampledReference {
            samples: vec![0.0; 4],
            dt: 0.1,
        };
        let t = simulate(&source_system(), &mut zero, &reference, StateVector::zeros(2), 0).unwrap();
        let ds = build_inverse_dataset(&[t], 1, 1).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.skipped_traces, 1);
    }

    #[test]
    fn stride_subsamples() {
        let t = trace(10, |k| k as f64);
        let ds = build_inverse_dataset(&[t], 1, 3).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.labels, vec![1.0, 4.0, 7.0, 10.0]);
    }
}
