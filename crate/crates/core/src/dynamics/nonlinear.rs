use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{LtiSystem, Plant, StateVector};
use crate::error::{Error, Result};

pub type StateMap = Arc<dyn Fn(&StateVector) -> StateVector + Send + Sync>;
pub type ScalarMap = Arc<dyn Fn(&StateVector) -> f64 + Send + Sync>;

/// Agreement required between the supplied affine map and `h o f^(r-1)`,
/// relative to the output magnitude.
pub const LIFTED_MAP_TOLERANCE: f64 = 1e-9;

const VALIDATION_SAMPLES: usize = 64;

/// Input-affine system `x(k+1) = f(x) + g(x) u`, `y = h(x)`.
///
/// The r-step-ahead map `y(k+r) = F(x) + G(x) u` is not derived symbolically.
/// Callers who need it (inverse, similarity) attach `F` and `G` with
/// [`NonlinearSystem::with_lifted_map`], which checks them numerically against
/// `f`, `g`, `h`.
#[derive(Clone)]
pub struct NonlinearSystem {
    n: usize,
    r: usize,
    f: StateMap,
    g: StateMap,
    h: ScalarMap,
    lifted: Option<(ScalarMap, ScalarMap)>,
}

impl fmt::Debug for NonlinearSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearSystem")
            .field("n", &self.n)
            .field("r", &self.r)
            .field("lifted", &self.lifted.is_some())
            .finish()
    }
}

impl NonlinearSystem {
    pub fn new<F, G, H>(n: usize, r: usize, f: F, g: G, h: H) -> Result<Self>
    where
        F: Fn(&StateVector) -> StateVector + Send + Sync + 'static,
        G: Fn(&StateVector) -> StateVector + Send + Sync + 'static,
        H: Fn(&StateVector) -> f64 + Send + Sync + 'static,
    {
        if n == 0 || r == 0 {
            return Err(Error::InvalidArgument(
                "state dimension and relative degree must be positive".into(),
            ));
        }
        Ok(NonlinearSystem {
            n,
            r,
            f: Arc::new(f),
            g: Arc::new(g),
            h: Arc::new(h),
            lifted: None,
        })
    }

    /// Attaches `F(x)` and `G(x)` and validates them on seeded random
    /// `(x, u)` drawn from a standard normal.
    pub fn with_lifted_map<F, G>(mut self, big_f: F, big_g: G) -> Result<Self>
    where
        F: Fn(&StateVector) -> f64 + Send + Sync + 'static,
        G: Fn(&StateVector) -> f64 + Send + Sync + 'static,
    {
        self.lifted = Some((Arc::new(big_f), Arc::new(big_g)));
        let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_11f7);
        for _ in 0..VALIDATION_SAMPLES {
            let x = StateVector::from_fn(self.n, |_, _| StandardNormal.sample(&mut rng));
            let u: f64 = StandardNormal.sample(&mut rng);
            let reference = self.output_after_r_steps(&x, u);
            if !reference.is_finite() {
                continue;
            }
            let affine = self.lifted_output(&x, u).expect("lifted map was just set");
            let residual = (affine - reference).abs();
            if residual > LIFTED_MAP_TOLERANCE * (1.0 + reference.abs()) {
                return Err(Error::InconsistentLiftedMap { residual });
            }
        }
        Ok(self)
    }

    pub fn has_lifted_map(&self) -> bool {
        self.lifted.is_some()
    }

    /// `(F(x), G(x))`, if attached.
    pub fn io_gains(&self, x: &StateVector) -> Option<(f64, f64)> {
        self.lifted.as_ref().map(|(f, g)| (f(x), g(x)))
    }

    /// `F(x) + G(x) u`, if the lifted map is attached.
    pub fn lifted_output(&self, x: &StateVector, u: f64) -> Option<f64> {
        self.io_gains(x).map(|(f, g)| f + g * u)
    }

    /// `h(f^(r-1)(f(x) + g(x) u))`, evaluated from the state equations.
    pub fn output_after_r_steps(&self, x: &StateVector, u: f64) -> f64 {
        let mut state = self.step(x, u);
        for _ in 1..self.r {
            state = (self.f)(&state);
        }
        (self.h)(&state)
    }
}

impl Plant for NonlinearSystem {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn relative_degree(&self) -> usize {
        self.r
    }

    fn step(&self, x: &StateVector, u: f64) -> StateVector {
        (self.f)(x) + (self.g)(x) * u
    }

    fn output(&self, x: &StateVector) -> f64 {
        (self.h)(x)
    }
}

impl From<&LtiSystem> for NonlinearSystem {
    fn from(sys: &LtiSystem) -> Self {
        let a = sys.a().clone();
        let b = sys.b().clone();
        let c = sys.c().clone();
        let (lifted_a, lifted_b) = (sys.lifted_a().clone(), sys.lifted_b());
        let f: StateMap = Arc::new(move |x: &StateVector| &a * x);
        let g: StateMap = Arc::new(move |_: &StateVector| b.clone());
        let h: ScalarMap = Arc::new(move |x: &StateVector| c.dot(&x.transpose()));
        let big_f: ScalarMap = Arc::new(move |x: &StateVector| lifted_a.dot(&x.transpose()));
        let big_g: ScalarMap = Arc::new(move |_: &StateVector| lifted_b);
        NonlinearSystem {
            n: sys.state_dim(),
            r: sys.relative_degree(),
            f,
            g,
            h,
            lifted: Some((big_f, big_g)),
        }
    }
}
