use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Explicit basis family added to the GP mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Zero-mean GP.
    None,
    /// `{1}`
    Constant,
    /// `{1, xi_i}`
    Linear,
    /// `{1, xi_i, xi_i^2}`, no cross terms.
    #[default]
    Quadratic,
}

impl Basis {
    /// Number of basis functions for a `dim`-dimensional input.
    pub fn len(self, dim: usize) -> usize {
        match self {
            Basis::None => 0,
            Basis::Constant => 1,
            Basis::Linear => 1 + dim,
            Basis::Quadratic => 1 + 2 * dim,
        }
    }

    pub fn eval_into(self, xi: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len(xi.len()));
        let d = xi.len();
        if self == Basis::None {
            return;
        }
        out[0] = 1.0;
        if matches!(self, Basis::Linear | Basis::Quadratic) {
            out[1..=d].copy_from_slice(xi);
        }
        if self == Basis::Quadratic {
            for (o, &x) in out[1 + d..].iter_mut().zip(xi) {
                *o = x * x;
            }
        }
    }

    /// Derivative of every basis function with respect to `xi[dim]`.
    pub fn derivative_into(self, xi: &[f64], dim: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let d = xi.len();
        if matches!(self, Basis::Linear | Basis::Quadratic) {
            out[1 + dim] = 1.0;
        }
        if self == Basis::Quadratic {
            out[1 + d + dim] = 2.0 * xi[dim];
        }
    }
}

/// Hyperparameters of the squared-exponential kernel
/// `K(a, b) = s1 * exp(-1/2 * sum_i (a_i - b_i)^2 / l_i^2)` plus the noise
/// variance and basis family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    /// One entry per input dimension, or a single shared entry.
    pub length_scales: Vec<f64>,
    pub prior_variance: f64,
    pub noise_variance: f64,
    pub basis: Basis,
}

impl Default for GpHyperparams {
    fn default() -> Self {
        GpHyperparams {
            length_scales: vec![1.0],
            prior_variance: 1.0,
            noise_variance: 1e-8,
            basis: Basis::Quadratic,
        }
    }
}

impl GpHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.length_scales.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one length scale is required".into(),
            ));
        }
        if self.length_scales.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidArgument(
                "length scales must be finite and positive".into(),
            ));
        }
        if !(self.prior_variance.is_finite() && self.prior_variance > 0.0) {
            return Err(Error::InvalidArgument("prior variance must be positive".into()));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise variance must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Length scale used for input dimension `i`.
    #[inline]
    pub fn length_scale(&self, i: usize) -> f64 {
        if self.length_scales.len() == 1 {
            self.length_scales[0]
        } else {
            self.length_scales[i]
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.length_scales.len() != 1 && self.length_scales.len() != dim {
            return Err(Error::Dimension {
                expected: self.length_scales.len(),
                got: dim,
                context: "kernel input vs. length scales",
            });
        }
        Ok(())
    }
}

/// Squared-exponential kernel value.
pub fn kernel(a: &[f64], b: &[f64], hyper: &GpHyperparams) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
            context: "kernel inputs",
        });
    }
    hyper.check_dim(a.len())?;
    Ok(kernel_unchecked(a, b, hyper))
}

#[inline]
pub(crate) fn kernel_unchecked(a: &[f64], b: &[f64], hyper: &GpHyperparams) -> f64 {
    let mut sq = 0.0;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let l = hyper.length_scale(i);
        let d = (x - y) / l;
        sq += d * d;
    }
    hyper.prior_variance * (-0.5 * sq).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> GpHyperparams {
        GpHyperparams {
            length_scales: vec![1.0],
            prior_variance: 1.0,
            noise_variance: 0.0,
            basis: Basis::None,
        }
    }

    #[test]
    fn kernel_examples() {
        let h = unit();
        assert_eq!(kernel(&[0.3, -1.0], &[0.3, -1.0], &h).unwrap(), 1.0);
        // |a - b|^2 = 2
        let v = kernel(&[0.0, 0.0], &[1.0, 1.0], &h).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.3679).abs() < 1e-4);
        let a = [0.2, 0.5, -0.1];
        let b = [1.0, -0.4, 0.3];
        assert_eq!(kernel(&a, &b, &h).unwrap(), kernel(&b, &a, &h).unwrap());
    }

    #[test]
    fn kernel_dimension_mismatch() {
        assert!(kernel(&[0.0], &[0.0, 1.0], &unit()).is_err());
        let mut h = unit();
        h.length_scales = vec![1.0, 2.0];
        assert!(kernel(&[0.0; 3], &[0.0; 3], &h).is_err());
    }

    #[test]
    fn basis_layout() {
        let mut out = vec![0.0; 7];
        Basis::Quadratic.eval_into(&[2.0, -3.0, 0.5], &mut out);
        assert_eq!(out, vec![1.0, 2.0, -3.0, 0.5, 4.0, 9.0, 0.25]);
        Basis::Quadratic.derivative_into(&[2.0, -3.0, 0.5], 1, &mut out);
        assert_eq!(out, vec![0.0, 0.0, 1.0, 0.0, 0.0, -6.0, 0.0]);
        assert_eq!(Basis::None.len(4), 0);
        assert_eq!(Basis::Quadratic.len(4), 9);
    }
}
