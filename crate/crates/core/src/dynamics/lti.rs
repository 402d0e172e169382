use nalgebra::{Complex, DMatrix, DVector, RowDVector};

use super::{Plant, StateVector};
use crate::error::{Error, Result};

/// Threshold below which `C A^(j-1) B` is treated as a structural zero.
pub const RELATIVE_DEGREE_EPS: f64 = 1e-9;

/// Discrete-time single-input single-output system
///
/// ```text
/// x(k+1) = A x(k) + B u(k)
///   y(k) = C x(k)
/// ```
///
/// The relative degree `r` and the lifted gains `CA^r`, `CA^(r-1)B` of the
/// r-step-ahead map `y(k+r) = CA^r x(k) + CA^(r-1)B u(k)` are computed once
/// at construction. The struct is immutable afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: RowDVector<f64>,
    r: usize,
    lifted_a: RowDVector<f64>,
    lifted_b: f64,
}

/// Poles and transmission zeros of an [`LtiSystem`].
#[derive(Clone, Debug)]
pub struct PoleZero {
    pub poles: Vec<Complex<f64>>,
    pub zeros: Vec<Complex<f64>>,
    pub minimum_phase: bool,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: RowDVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("state dimension must be positive".into()));
        }
        if a.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: a.ncols(),
                context: "A must be square",
            });
        }
        if b.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: b.len(),
                context: "B rows",
            });
        }
        if c.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: c.len(),
                context: "C columns",
            });
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("system matrices"));
        }

        let r = relative_degree(&a, &b, &c)?;
        let mut c_pow = c.clone();
        for _ in 0..r - 1 {
            c_pow = &c_pow * &a;
        }
        // c_pow = C A^(r-1)
        let lifted_b = (&c_pow * &b)[0];
        let lifted_a = &c_pow * &a;
        Ok(LtiSystem {
            a,
            b,
            c,
            r,
            lifted_a,
            lifted_b,
        })
    }

    /// Builds a system from row-major slices.
    pub fn from_rows(a: &[&[f64]], b: &[f64], c: &[f64]) -> Result<Self> {
        let n = a.len();
        let mut flat = Vec::with_capacity(n * n);
        for row in a {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: row.len(),
                    context: "A row length",
                });
            }
            flat.extend_from_slice(row);
        }
        LtiSystem::new(
            DMatrix::from_row_slice(n, n, &flat),
            DVector::from_column_slice(b),
            RowDVector::from_row_slice(c),
        )
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &RowDVector<f64> {
        &self.c
    }

    /// State-to-output gain `CA^r` of the lifted map.
    pub fn lifted_a(&self) -> &RowDVector<f64> {
        &self.lifted_a
    }

    /// Input-to-output gain `CA^(r-1)B` of the lifted map.
    pub fn lifted_b(&self) -> f64 {
        self.lifted_b
    }

    pub fn lifted_gains(&self) -> (&RowDVector<f64>, f64) {
        (&self.lifted_a, self.lifted_b)
    }

    /// `y(k+r)` predicted from `x(k)` and `u(k)`.
    pub fn lifted_output(&self, x: &StateVector, u: f64) -> f64 {
        self.lifted_a.dot(&x.transpose()) + self.lifted_b * u
    }

    pub fn poles(&self) -> Result<Vec<Complex<f64>>> {
        eigenvalues(&self.a)
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(self.poles()?.iter().map(|p| p.norm()).fold(0.0, f64::max))
    }

    /// All eigenvalues of `A` strictly inside the unit circle.
    pub fn is_schur_stable(&self) -> bool {
        self.spectral_radius().map(|rho| rho < 1.0).unwrap_or(false)
    }

    /// Transmission zeros: the finite generalized eigenvalues of the pencil
    ///
    /// ```text
    /// [A  B]       [I 0]
    /// [C  0]  - z  [0 0]
    /// ```
    ///
    /// The pencil is reduced to a standard eigenproblem by a shift-invert
    /// transform `T = (M - s N)^-1 N`, whose eigenvalues `mu` map back to
    /// `z = s + 1/mu`. A SISO system of relative degree `r` has exactly
    /// `n - r` finite zeros; the `r` infinite ones appear as `mu = 0`.
    pub fn zeros(&self) -> Result<Vec<Complex<f64>>> {
        let n = self.state_dim();
        let finite = n - self.r;
        if finite == 0 {
            return Ok(Vec::new());
        }
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&self.a);
        m.view_mut((0, n), (n, 1)).copy_from(&self.b);
        m.view_mut((n, 0), (1, n)).copy_from(&self.c);
        let mut e = DMatrix::zeros(n + 1, n + 1);
        e.view_mut((0, 0), (n, n)).fill_with_identity();

        // A shift that happens to coincide with a zero makes M - sN singular;
        // try a few unrelated values.
        #[allow(clippy::approx_constant)]
        for shift in [
            1.618_033_988_75,
            -2.718_281_828_46,
            3.141_592_653_59,
            0.577_215_664_9,
        ] {
            let shifted = &m - &e * shift;
            let lu = shifted.lu();
            let Some(t) = lu.solve(&e) else { continue };
            if t.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let mut mu = eigenvalues(&t)?;
            mu.sort_by(|p, q| q.norm().total_cmp(&p.norm()));
            let mut zeros: Vec<Complex<f64>> = mu
                .into_iter()
                .take(finite)
                .map(|mu| Complex::new(shift, 0.0) + mu.inv())
                .collect();
            sort_complex(&mut zeros);
            return Ok(zeros);
        }
        Err(Error::Analysis(
            "system pencil is singular for every trial shift".into(),
        ))
    }

    pub fn zeros_poles(&self) -> Result<PoleZero> {
        let mut poles = self.poles()?;
        sort_complex(&mut poles);
        let zeros = self.zeros()?;
        let minimum_phase = zeros.iter().all(|z| z.norm() < 1.0);
        Ok(PoleZero {
            poles,
            zeros,
            minimum_phase,
        })
    }
}

impl Plant for LtiSystem {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn relative_degree(&self) -> usize {
        self.r
    }

    fn step(&self, x: &StateVector, u: f64) -> StateVector {
        &self.a * x + &self.b * u
    }

    fn output(&self, x: &StateVector) -> f64 {
        self.c.dot(&x.transpose())
    }
}

/// Smallest `r >= 1` with `|C A^(r-1) B| > RELATIVE_DEGREE_EPS`.
pub fn relative_degree(a: &DMatrix<f64>, b: &DVector<f64>, c: &RowDVector<f64>) -> Result<usize> {
    let n = a.nrows();
    let mut c_pow = c.clone();
    for r in 1..=n {
        let markov = (&c_pow * b)[0];
        if markov.abs() > RELATIVE_DEGREE_EPS {
            return Ok(r);
        }
        c_pow = &c_pow * a;
    }
    Err(Error::IllDefinedRelativeDegree { n })
}

fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let schur = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Analysis("Schur decomposition did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

fn sort_complex(v: &mut [Complex<f64>]) {
    v.sort_by(|p, q| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)));
}
