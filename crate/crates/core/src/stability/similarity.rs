use nalgebra::RowDVector;
use serde::Serialize;

use crate::dynamics::{LtiSystem, NonlinearSystem, Plant, StateVector};
use crate::error::{Error, Result};
use crate::inverse::SINGULAR_GAIN_EPS;

/// How far the target's lifted map is from a rescaled copy of the source's.
///
/// With `S1 = 1 - B_t/B_s` and `S2 = A_t - (B_t/B_s) A_s`, the target output
/// under the source inverse is `y_t(k+r) = (1 - S1) y_d(k+r) + S2 x(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityVector {
    pub s1: f64,
    pub s2: RowDVector<f64>,
    pub norm_s2: f64,
}

impl SimilarityVector {
    /// Both parts are zero within `tol`.
    pub fn is_zero(&self, tol: f64) -> bool {
        self.s1.abs() <= tol && self.s2.iter().all(|v| v.abs() <= tol)
    }
}

impl Serialize for SimilarityVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("SimilarityVector", 3)?;
        st.serialize_field("s1", &self.s1)?;
        st.serialize_field("s2", &self.s2.iter().copied().collect::<Vec<_>>())?;
        st.serialize_field("norm_s2", &self.norm_s2)?;
        st.end()
    }
}

fn check_pair(source_r: usize, target_r: usize, source_n: usize, target_n: usize) -> Result<()> {
    if source_r != target_r {
        return Err(Error::AssumptionViolation(format!(
            "source and target must share the relative degree, got {source_r} and {target_r}"
        )));
    }
    if source_n != target_n {
        return Err(Error::AssumptionViolation(format!(
            "source and target must share the state dimension, got {source_n} and {target_n}"
        )));
    }
    Ok(())
}

/// Similarity of two linear systems, from their lifted gains.
pub fn similarity(source: &LtiSystem, target: &LtiSystem) -> Result<SimilarityVector> {
    check_pair(
        source.relative_degree(),
        target.relative_degree(),
        source.state_dim(),
        target.state_dim(),
    )?;
    let (a_s, b_s) = source.lifted_gains();
    let (a_t, b_t) = target.lifted_gains();
    if !(b_s.abs() >= SINGULAR_GAIN_EPS) {
        return Err(Error::UndefinedSimilarity { gain: b_s });
    }
    let ratio = b_t / b_s;
    let s2 = a_t - a_s * ratio;
    Ok(SimilarityVector {
        s1: 1.0 - ratio,
        norm_s2: s2.norm(),
        s2,
    })
}

/// State-dependent similarity `(theta1, theta2)` of two input-affine systems
/// at `x`, such that `y_t(k+r) = theta1 * y_s(k+r) + theta2` for the same
/// `x(k)` and `u(k)`.
pub fn nonlinear_similarity(
    source: &NonlinearSystem,
    target: &NonlinearSystem,
    x: &StateVector,
) -> Result<(f64, f64)> {
    check_pair(
        source.relative_degree(),
        target.relative_degree(),
        source.state_dim(),
        target.state_dim(),
    )?;
    let missing =
        || Error::InvalidArgument("nonlinear similarity needs F(x) and G(x) on both systems".into());
    let (f_s, g_s) = source.io_gains(x).ok_or_else(missing)?;
    let (f_t, g_t) = target.io_gains(x).ok_or_else(missing)?;
    if !(g_s.abs() >= SINGULAR_GAIN_EPS) {
        return Err(Error::UndefinedSimilarity { gain: g_s });
    }
    let theta1 = g_t / g_s;
    Ok((theta1, f_t - theta1 * f_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{source_system, target_system};

    #[test]
    fn study_pair() {
        let s = similarity(&source_system(), &target_system()).unwrap();
        assert!(s.s1.abs() <= 1e-12);
        assert!((s.s2[0] + 0.09).abs() <= 1e-12);
        assert!((s.s2[1] - 0.3).abs() <= 1e-12);
        assert!((s.norm_s2 - 0.0981f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn doubled_input_gain() {
        let src = source_system();
        let doubled = LtiSystem::new(src.a().clone(), src.b() * 2.0, src.c().clone()).unwrap();
        let s = similarity(&src, &doubled).unwrap();
        assert_eq!(s.s1, -1.0);
    }

    #[test]
    fn self_similarity_is_zero() {
        let s = similarity(&target_system(), &target_system()).unwrap();
        assert!(s.is_zero(0.0));
    }

    #[test]
    fn mismatched_relative_degree() {
        let r2 = LtiSystem::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]], &[0.0, 1.0], &[1.0, 0.0]).unwrap();
        let err = similarity(&source_system(), &r2).unwrap_err();
        assert!(matches!(err, Error::AssumptionViolation(_)));
    }

    #[test]
    fn linear_embedding() {
        let src = source_system();
        let tgt = target_system();
        let ns = NonlinearSystem::from(&src);
        let nt = NonlinearSystem::from(&tgt);
        let x = StateVector::from_vec(vec![0.4, -1.1]);
        let (t1, t2) = nonlinear_similarity(&ns, &nt, &x).unwrap();
        let ratio = tgt.lifted_b() / src.lifted_b();
        assert!((t1 - ratio).abs() < 1e-15);
        let expected = (tgt.lifted_a() - src.lifted_a() * ratio).dot(&x.transpose());
        assert!((t2 - expected).abs() < 1e-12);

        let (i1, i2) = nonlinear_similarity(&ns, &ns, &x).unwrap();
        assert_eq!((i1, i2), (1.0, 0.0));
    }
}
