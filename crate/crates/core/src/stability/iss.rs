use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::{LtiSystem, Plant};
use crate::error::{Error, Result};

const MAX_TERMS: usize = 1_000_000;

/// Input-to-state gains of a stable linear system:
/// `|x(k)| <= l1 * sup |u| + l2 * |x(0)|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IssGains {
    /// Upper bound on `sum_j |A^j B|`.
    pub l1: f64,
    /// `max_k |A^k|` (induced 2-norm).
    pub l2: f64,
    /// Number of series terms summed explicitly.
    pub terms: usize,
    /// Bound on the part of the series that was not summed.
    pub tail: f64,
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    m.singular_values().max()
}

/// ISS gains of `system`, summed until the guaranteed remainder of the
/// series drops to `tol`.
///
/// The remainder after `J` terms is bounded through the first `m` with
/// `|A^m| < 1`: every later term is at most `|A^m|^q` times one of the
/// `m` terms that follow `J`, so the tail is at most
/// `sum_{i<m} |A^(J+i) B| / (1 - |A^m|)`. The reported `l1` includes this
/// bound and is therefore never below the true sum.
pub fn iss_gains(system: &LtiSystem, tol: f64) -> Result<IssGains> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let rho = system.spectral_radius()?;
    if !(rho < 1.0) {
        return Err(Error::NotIss { spectral_radius: rho });
    }
    let n = system.state_dim();
    let a = system.a();
    let b = system.b();

    // Contraction length m and |A^m|.
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut m = 0usize;
    let contraction = loop {
        power = a * &power;
        m += 1;
        let norm = spectral_norm(&power);
        if norm < 1.0 {
            break norm;
        }
        if m > MAX_TERMS {
            return Err(Error::Analysis("no contracting power of A found".into()));
        }
    };

    // Terms |A^j B| and |A^j| for j = 0, 1, ... kept in a ring of length m.
    let mut input_terms: Vec<f64> = Vec::new();
    let mut l2: f64 = 1.0;
    let mut ab = b.clone();
    let mut power = DMatrix::<f64>::identity(n, n);
    for _ in 0..m {
        input_terms.push(ab.norm());
        ab = a * ab;
        power = a * &power;
        l2 = l2.max(spectral_norm(&power));
    }
    let mut head = 0.0;
    let mut window: f64 = input_terms.iter().sum();
    let mut j = 0usize;
    loop {
        let tail = window / (1.0 - contraction);
        if tail <= tol || j >= MAX_TERMS {
            if j >= MAX_TERMS {
                log::warn!("ISS series stopped after {j} terms with tail bound {tail:e}");
            }
            return Ok(IssGains {
                l1: head + tail,
                l2,
                terms: j,
                tail,
            });
        }
        // Shift the window by one term: drop |A^j B|, add |A^(j+m) B|.
        let next = ab.norm();
        ab = a * ab;
        power = a * &power;
        l2 = l2.max(spectral_norm(&power));
        let first = input_terms[j % m];
        input_terms[j % m] = next;
        head += first;
        window = window - first + next;
        if window < 0.0 {
            window = input_terms.iter().sum();
        }
        j += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::target_system;

    #[test]
    fn zero_dynamics() {
        let sys = LtiSystem::from_rows(&[&[0.0, 0.0], &[0.0, 0.0]], &[3.0, 4.0], &[1.0, 0.0]).unwrap();
        let g = iss_gains(&sys, 1e-12).unwrap();
        assert!((g.l1 - 5.0).abs() < 1e-12);
        assert_eq!(g.l2, 1.0);
    }

    #[test]
    fn scalar_geometric_series() {
        let sys = LtiSystem::from_rows(&[&[0.5]], &[1.0], &[1.0]).unwrap();
        let g = iss_gains(&sys, 1e-13).unwrap();
        assert!(g.l1 >= 2.0 && g.l1 - 2.0 < 1e-12, "{}", g.l1);
        assert_eq!(g.l2, 1.0);
    }

    #[test]
    fn unstable_is_rejected() {
        let sys = LtiSystem::from_rows(&[&[1.2]], &[1.0], &[1.0]).unwrap();
        assert!(matches!(iss_gains(&sys, 1e-12), Err(Error::NotIss { .. })));
    }

    #[test]
    fn target_gain_is_finite_and_tight() {
        let loose = iss_gains(&target_system(), 1e-3).unwrap();
        let tight = iss_gains(&target_system(), 1e-12).unwrap();
        assert!(tight.l1.is_finite());
        assert!(tight.l1 <= loose.l1);
        assert!(tight.tail <= 1e-12);
    }
}
