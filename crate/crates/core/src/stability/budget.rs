use serde::Serialize;

use super::iss::{iss_gains, IssGains};
use super::similarity::{similarity, SimilarityVector};
use crate::dynamics::LtiSystem;
use crate::error::{Error, Result};

/// One logged prediction: `lambda = |e_p - e_p*|` with the norms of the
/// preview `y_d(k+r)` and the state `x(k)` it was made at.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualSample {
    pub lambda: f64,
    pub preview_norm: f64,
    pub state_norm: f64,
}

/// Coefficients of the prediction-error envelope
/// `lambda <= beta1 |y_d(k+r)| + beta2 |x(k)| + beta3`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PredictionBudget {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

impl PredictionBudget {
    pub fn bound(&self, s: &ResidualSample) -> f64 {
        self.beta1 * s.preview_norm + self.beta2 * s.state_norm + self.beta3
    }
}

/// Smallest nonnegative envelope that covers every sample, where smallest
/// means the lowest average bound over the log.
///
/// The linear program has three unknowns and one constraint per sample. It
/// is solved through its dual, which has one variable per sample but only
/// three constraints, with a revised simplex method whose basis is 3x3. The
/// optimal dual prices are the betas. A final pass lifts `beta3` by any
/// rounding-level violation, so the envelope holds on every sample exactly.
pub fn fit_prediction_budget(log: &[ResidualSample]) -> Result<PredictionBudget> {
    if log.is_empty() {
        return Err(Error::Empty("residual log"));
    }
    for s in log {
        if !(s.lambda.is_finite() && s.preview_norm.is_finite() && s.state_norm.is_finite()) {
            return Err(Error::NonFinite("residual log"));
        }
        if s.preview_norm < 0.0 || s.state_norm < 0.0 {
            return Err(Error::InvalidArgument(
                "norms in the residual log must be nonnegative".into(),
            ));
        }
    }
    let lambda: Vec<f64> = log.iter().map(|s| s.lambda.abs()).collect();
    let columns: Vec<[f64; 3]> = log.iter().map(|s| [s.preview_norm, s.state_norm, 1.0]).collect();
    let mut rhs = [0.0; 3];
    for c in &columns {
        for i in 0..3 {
            rhs[i] += c[i];
        }
    }
    let prices = dual_simplex_prices(&lambda, &columns, rhs);
    let mut budget = PredictionBudget {
        beta1: prices[0].max(0.0),
        beta2: prices[1].max(0.0),
        beta3: prices[2].max(0.0),
    };
    let violation = log
        .iter()
        .zip(&lambda)
        .map(|(s, l)| l - budget.bound(s))
        .fold(0.0, f64::max);
    budget.beta3 += violation;
    Ok(budget)
}

/// Maximizes `sum_i lambda_i w_i` subject to `sum_i w_i c_i <= rhs`,
/// `w >= 0`, and returns the optimal dual prices of the three constraints.
fn dual_simplex_prices(lambda: &[f64], columns: &[[f64; 3]], rhs: [f64; 3]) -> [f64; 3] {
    let n = lambda.len();
    // Variables 0..n are the samples, n..n+3 the slacks.
    let column = |j: usize| -> [f64; 3] {
        if j < n {
            columns[j]
        } else {
            let mut e = [0.0; 3];
            e[j - n] = 1.0;
            e
        }
    };
    let cost = |j: usize| if j < n { lambda[j] } else { 0.0 };
    let scale = lambda
        .iter()
        .fold(0.0f64, |m, v| m.max(*v))
        .max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;

    let mut basis = [n, n + 1, n + 2];
    let mut inv = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut x_b = rhs;
    let mut degenerate_run = 0usize;

    for _ in 0..(50 * (n + 3)).max(1000) {
        // prices = c_B^T B^-1
        let mut prices = [0.0; 3];
        for (r, &bj) in basis.iter().enumerate() {
            let cb = cost(bj);
            for i in 0..3 {
                prices[i] += cb * inv[r][i];
            }
        }
        let reduced = |j: usize| {
            let c = column(j);
            cost(j) - (prices[0] * c[0] + prices[1] * c[1] + prices[2] * c[2])
        };
        // Dantzig pricing, switching to Bland's rule after a run of
        // degenerate pivots to rule out cycling.
        let entering = if degenerate_run < 50 {
            (0..n + 3)
                .filter(|j| !basis.contains(j))
                .map(|j| (j, reduced(j)))
                .filter(|&(_, d)| d > tol)
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(j, _)| j)
        } else {
            (0..n + 3).find(|&j| !basis.contains(&j) && reduced(j) > tol)
        };
        let Some(q) = entering else {
            return prices;
        };
        let c = column(q);
        let mut d = [0.0; 3];
        for r in 0..3 {
            d[r] = inv[r][0] * c[0] + inv[r][1] * c[1] + inv[r][2] * c[2];
        }
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..3 {
            if d[r] > 1e-14 {
                let ratio = x_b[r] / d[r];
                let better = match leave {
                    None => true,
                    Some((lr, best)) => ratio < best || (ratio == best && basis[r] < basis[lr]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((p, step)) = leave else {
            // Unbounded dual cannot happen: every column has a positive
            // third entry and rhs is finite.
            return prices;
        };
        degenerate_run = if step <= 0.0 { degenerate_run + 1 } else { 0 };
        for r in 0..3 {
            if r != p {
                x_b[r] -= step * d[r];
                if x_b[r] < 0.0 {
                    x_b[r] = 0.0;
                }
            }
        }
        x_b[p] = step;
        let pivot = d[p];
        let row_p = inv[p].map(|v| v / pivot);
        for r in 0..3 {
            if r != p {
                for i in 0..3 {
                    inv[r][i] -= d[r] * row_p[i];
                }
            }
        }
        inv[p] = row_p;
        basis[p] = q;
    }
    log::warn!("budget simplex hit its iteration limit");
    let mut prices = [0.0; 3];
    for (r, &bj) in basis.iter().enumerate() {
        for i in 0..3 {
            prices[i] += cost(bj) * inv[r][i];
        }
    }
    prices
}

/// Quantities of the closed-loop boundedness condition
/// `|alpha| (|S2| + beta2) < beta4 / L1` with `beta4 = 1 - L1 |A_s / B_s|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityBudget {
    pub similarity: SimilarityVector,
    pub gains: IssGains,
    pub prediction: PredictionBudget,
    /// `|A_s / B_s|`.
    pub source_ratio_norm: f64,
}

impl StabilityBudget {
    /// Gains of the target, similarity of the pair, and a fitted envelope.
    pub fn new(
        source: &LtiSystem,
        target: &LtiSystem,
        prediction: PredictionBudget,
        tol: f64,
    ) -> Result<Self> {
        let similarity = similarity(source, target)?;
        let gains = iss_gains(target, tol)?;
        Ok(StabilityBudget::from_parts(source, similarity, gains, prediction))
    }

    pub fn from_parts(
        source: &LtiSystem,
        similarity: SimilarityVector,
        gains: IssGains,
        prediction: PredictionBudget,
    ) -> Self {
        let (a_s, b_s) = source.lifted_gains();
        StabilityBudget {
            similarity,
            gains,
            prediction,
            source_ratio_norm: (a_s / b_s).norm(),
        }
    }

    pub fn l1(&self) -> f64 {
        self.gains.l1
    }

    pub fn l2(&self) -> f64 {
        self.gains.l2
    }

    pub fn beta4(&self) -> f64 {
        1.0 - self.gains.l1 * self.source_ratio_norm
    }

    /// Largest `|alpha|` allowed by the condition: zero when `beta4 <= 0`
    /// and infinite when `|S2| + beta2 = 0`.
    pub fn alpha_max(&self) -> f64 {
        let beta4 = self.beta4();
        if beta4 <= 0.0 {
            return 0.0;
        }
        let denom = self.gains.l1 * (self.similarity.norm_s2 + self.prediction.beta2);
        if denom > 0.0 {
            beta4 / denom
        } else {
            f64::INFINITY
        }
    }

    /// Evaluates the condition at `alpha`.
    pub fn check(&self, alpha: f64) -> BoundednessCheck {
        let beta4 = self.beta4();
        let margin = beta4 / self.gains.l1 - alpha.abs() * (self.similarity.norm_s2 + self.prediction.beta2);
        let verdict = if beta4 <= 0.0 {
            Verdict::Vacuous
        } else if margin > 0.0 {
            Verdict::Satisfied
        } else {
            Verdict::Violated
        };
        BoundednessCheck { verdict, margin }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    /// `beta4 <= 0`: the condition cannot hold for any alpha, so it says
    /// nothing about the loop.
    Vacuous,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundednessCheck {
    pub verdict: Verdict,
    /// `beta4 / L1 - |alpha| (|S2| + beta2)`; positive when satisfied.
    pub margin: f64,
}

/// Checks the boundedness condition for the pair at gain `alpha`.
pub fn boundedness_check(
    source: &LtiSystem,
    target: &LtiSystem,
    budget: &StabilityBudget,
    alpha: f64,
) -> Result<BoundednessCheck> {
    let s = similarity(source, target)?;
    if (s.norm_s2 - budget.similarity.norm_s2).abs() > 1e-12 * (1.0 + s.norm_s2) {
        return Err(Error::InvalidArgument(
            "budget was computed for a different system pair".into(),
        ));
    }
    Ok(budget.check(alpha))
}
