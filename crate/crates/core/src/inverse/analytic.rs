use crate::dynamics::{LtiSystem, NonlinearSystem, Plant, StateVector};
use crate::error::{Error, Result};

/// Gains below this magnitude make the inverse (and the similarity ratios)
/// undefined.
pub const SINGULAR_GAIN_EPS: f64 = 1e-12;

/// Exact inverse of a known system: `u = (y_d(k+r) - F(x)) / G(x)`.
#[derive(Clone, Debug)]
pub enum AnalyticInverse {
    Linear(LtiSystem),
    Nonlinear(NonlinearSystem),
}

impl AnalyticInverse {
    pub fn linear(sys: LtiSystem) -> Self {
        AnalyticInverse::Linear(sys)
    }

    /// Fails if the system has no lifted map attached.
    pub fn nonlinear(sys: NonlinearSystem) -> Result<Self> {
        if !sys.has_lifted_map() {
            return Err(Error::InvalidArgument(
                "nonlinear inverse needs F(x) and G(x); attach them with with_lifted_map".into(),
            ));
        }
        Ok(AnalyticInverse::Nonlinear(sys))
    }

    pub fn state_dim(&self) -> usize {
        match self {
            AnalyticInverse::Linear(s) => s.state_dim(),
            AnalyticInverse::Nonlinear(s) => s.state_dim(),
        }
    }

    pub fn relative_degree(&self) -> usize {
        match self {
            AnalyticInverse::Linear(s) => s.relative_degree(),
            AnalyticInverse::Nonlinear(s) => s.relative_degree(),
        }
    }

    /// `(F(x), G(x))` of the inverted system.
    pub fn io_gains(&self, x: &StateVector) -> (f64, f64) {
        match self {
            AnalyticInverse::Linear(s) => (s.lifted_a().dot(&x.transpose()), s.lifted_b()),
            AnalyticInverse::Nonlinear(s) => s.io_gains(x).expect("checked at construction"),
        }
    }

    pub fn reference(&self, x: &StateVector, preview: f64) -> Result<f64> {
        if x.len() != self.state_dim() {
            return Err(Error::Dimension {
                expected: self.state_dim(),
                got: x.len(),
                context: "inverse state",
            });
        }
        let (f, g) = self.io_gains(x);
        if !(g.abs() >= SINGULAR_GAIN_EPS) {
            return Err(Error::SingularInverse { gain: g });
        }
        Ok((preview - f) / g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::source_system;

    #[test]
    fn source_inverse_examples() {
        let inv = AnalyticInverse::linear(source_system());
        let zero = StateVector::zeros(2);
        assert_eq!(inv.reference(&zero, 1.0).unwrap(), 1.0);
        let x = StateVector::from_vec(vec![0.7, -1.3]);
        let on_track = source_system().lifted_a().dot(&x.transpose());
        assert_eq!(inv.reference(&x, on_track).unwrap(), 0.0);
    }

    #[test]
    fn singular_gain_is_reported() {
        let sys = NonlinearSystem::new(
            1,
            1,
            |x| x.clone() * 0.5,
            |x| StateVector::from_element(1, x[0]),
            |x| x[0],
        )
        .unwrap()
        .with_lifted_map(|x| 0.5 * x[0], |x| x[0])
        .unwrap();
        let inv = AnalyticInverse::nonlinear(sys).unwrap();
        let err = inv.reference(&StateVector::zeros(1), 1.0).unwrap_err();
        assert!(matches!(err, Error::SingularInverse { .. }));
        assert_eq!(
            inv.reference(&StateVector::from_element(1, 2.0), 3.0).unwrap(),
            1.0
        );
    }

    #[test]
    fn nonlinear_without_lifted_map_is_rejected() {
        let sys = NonlinearSystem::new(1, 1, |x| x.clone(), |x| x.clone(), |x| x[0]).unwrap();
        assert!(AnalyticInverse::nonlinear(sys).is_err());
    }
}
