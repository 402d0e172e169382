use std::collections::VecDeque;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kernel::{kernel_unchecked, GpHyperparams};
use super::simplex::minimize_bounded;
use crate::error::{Error, Result};

/// Diagonal jitter applied before the first factorization attempt.
pub const INITIAL_JITTER: f64 = 1e-10;
/// Largest jitter tried before giving up.
pub const MAX_JITTER: f64 = 1e-6;

/// How window inputs are mapped before the kernel and basis see them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputScaling {
    /// Raw inputs.
    None,
    /// Per-dimension centering and scaling by the window mean and standard
    /// deviation. The basis spans the same function space either way; this
    /// only conditions the least-squares problem for the basis coefficients.
    #[default]
    Window,
}

/// Hyperparameter re-fit schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum HyperFit {
    /// Keep the configured hyperparameters.
    Fixed,
    /// Maximize the marginal likelihood every `stride` observations.
    Online { stride: usize, max_evals: usize },
}

impl Default for HyperFit {
    fn default() -> Self {
        HyperFit::Online {
            stride: 1,
            max_evals: 100,
        }
    }
}

/// Box constraints for the hyperparameter search, in natural units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub length_scale: (f64, f64),
    pub prior_variance: (f64, f64),
    pub noise_variance: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        HyperBounds {
            length_scale: (1e-2, 1e3),
            prior_variance: (1e-6, 1e4),
            noise_variance: (1e-10, 1e1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    /// Window capacity `N`.
    pub capacity: usize,
    pub hyper: GpHyperparams,
    pub fit: HyperFit,
    pub bounds: HyperBounds,
    pub scaling: InputScaling,
    /// Lower bound on the per-dimension scale used by
    /// [`InputScaling::Window`]. Without it, a dimension that barely moves
    /// inside the window (an input at a turning point) is stretched so far
    /// that a query slightly off the window lands deep in the quadratic
    /// basis terms.
    pub min_input_scale: f64,
    /// Samples required before the model predicts. Defaults to one more
    /// than the number of basis functions.
    pub min_samples: Option<usize>,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            capacity: 15,
            hyper: GpHyperparams::default(),
            fit: HyperFit::default(),
            bounds: HyperBounds::default(),
            scaling: InputScaling::Window,
            min_input_scale: 1e-2,
            min_samples: None,
        }
    }
}

/// One stored observation.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub output: f64,
}

/// Predictive distribution of the latent function at a query point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
    /// Set when the window is too small to predict; `mean` is then 0 and
    /// `variance` infinite.
    pub cold: bool,
}

impl Prediction {
    const COLD: Prediction = Prediction {
        mean: 0.0,
        variance: f64::INFINITY,
        cold: true,
    };
}

#[derive(Clone, Debug)]
struct Normalizer {
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl Normalizer {
    fn identity(dim: usize) -> Self {
        Normalizer {
            center: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    fn from_window<'a>(inputs: impl Iterator<Item = &'a [f64]> + Clone, dim: usize, min_scale: f64) -> Self {
        let m = inputs.clone().count() as f64;
        let mut center = vec![0.0; dim];
        for x in inputs.clone() {
            for (c, v) in center.iter_mut().zip(x) {
                *c += v / m;
            }
        }
        let mut scale = vec![0.0; dim];
        for x in inputs {
            for ((s, v), c) in scale.iter_mut().zip(x).zip(&center) {
                *s += (v - c) * (v - c) / m;
            }
        }
        for (s, c) in scale.iter_mut().zip(&center) {
            *s = s.sqrt().max(min_scale);
            if !(*s > 1e-12 * (1.0 + c.abs())) {
                *s = 1.0;
            }
        }
        Normalizer { center, scale }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center)
            .zip(&self.scale)
            .map(|((v, c), s)| (v - c) / s)
            .collect()
    }
}

/// Conditioned GP on a fixed set of (normalized) inputs.
#[derive(Clone, Debug)]
struct Posterior {
    inputs: Vec<Vec<f64>>,
    chol_l: DMatrix<f64>,
    jitter: f64,
    whitened_basis: DMatrix<f64>,
    /// `Sigma^-1 V^T` of the whitened basis SVD, truncated to its rank.
    basis_precision_factor: DMatrix<f64>,
    beta: DVector<f64>,
    alpha: DVector<f64>,
    log_marginal_likelihood: f64,
}

fn condition(inputs: Vec<Vec<f64>>, outputs: &[f64], hyper: &GpHyperparams) -> Result<Posterior> {
    let m = inputs.len();
    let dim = inputs.first().map_or(0, Vec::len);
    let p = hyper.basis.len(dim);

    let mut gram = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = kernel_unchecked(&inputs[i], &inputs[j], hyper);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }

    let mut jitter = INITIAL_JITTER;
    let chol = loop {
        let mut k = gram.clone();
        for i in 0..m {
            k[(i, i)] += hyper.noise_variance + jitter;
        }
        if let Some(c) = k.cholesky() {
            break c;
        }
        jitter *= 2.0;
        if jitter > MAX_JITTER {
            return Err(Error::Analysis(format!(
                "kernel matrix not positive definite with jitter up to {MAX_JITTER:e}"
            )));
        }
    };
    let chol_l = chol.l();

    let y = DVector::from_column_slice(outputs);
    let z = chol_l
        .solve_lower_triangular(&y)
        .ok_or_else(|| Error::Analysis("triangular solve failed".into()))?;

    let mut basis_rows = DMatrix::zeros(m, p);
    let mut row = vec![0.0; p];
    for (i, x) in inputs.iter().enumerate() {
        hyper.basis.eval_into(x, &mut row);
        for (j, v) in row.iter().enumerate() {
            basis_rows[(i, j)] = *v;
        }
    }

    let (whitened_basis, basis_precision_factor, beta, residual) = if p == 0 {
        (DMatrix::zeros(m, 0), DMatrix::zeros(0, 0), DVector::zeros(0), z)
    } else {
        let w = chol_l
            .solve_lower_triangular(&basis_rows)
            .ok_or_else(|| Error::Analysis("triangular solve failed".into()))?;
        let (factor, beta) = solve_basis(&w, &z)?;
        let residual = &z - &w * &beta;
        (w, factor, beta, residual)
    };

    let alpha = chol_l
        .tr_solve_lower_triangular(&residual)
        .ok_or_else(|| Error::Analysis("triangular solve failed".into()))?;
    let log_det_half: f64 = chol_l.diagonal().iter().map(|v| v.ln()).sum();
    let log_marginal_likelihood =
        -0.5 * residual.norm_squared() - log_det_half - 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln();

    Ok(Posterior {
        inputs,
        chol_l,
        jitter,
        whitened_basis,
        basis_precision_factor,
        beta,
        alpha,
        log_marginal_likelihood,
    })
}

/// Least-squares fit of `z ~ w * beta`. Returns `beta` and a factor `F` with
/// `F^T F` the pseudo-inverse of `w^T w`.
///
/// Householder QR is used when `w` has full column rank: it stays accurate
/// when the basis columns are nearly collinear, which is the usual case for
/// a short window of smooth signals. Rank-deficient windows fall back to a
/// truncated SVD.
fn solve_basis(w: &DMatrix<f64>, z: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (m, p) = w.shape();
    if m >= p {
        let qr = w.clone().qr();
        let r = qr.r();
        let diag = r.diagonal().map(f64::abs);
        let r_max = diag.max();
        if r_max > 0.0 && diag.min() > r_max * f64::EPSILON * m as f64 {
            let qtz = qr.q().tr_mul(z);
            let beta = r
                .solve_upper_triangular(&qtz)
                .ok_or_else(|| Error::Analysis("triangular solve failed".into()))?;
            let factor = r
                .transpose()
                .solve_lower_triangular(&DMatrix::identity(p, p))
                .ok_or_else(|| Error::Analysis("triangular solve failed".into()))?;
            return Ok((factor, beta));
        }
    }
    let svd = w.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Analysis("SVD of basis matrix failed".into())),
    };
    let s = &svd.singular_values;
    let s_max = s.iter().copied().fold(0.0, f64::max);
    let tol = s_max * f64::EPSILON * m.max(p) as f64;
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > tol).collect();
    let mut factor = DMatrix::zeros(keep.len(), p);
    let mut beta = DVector::zeros(p);
    for (row_idx, &i) in keep.iter().enumerate() {
        let coef = u.column(i).dot(z) / s[i];
        for j in 0..p {
            beta[j] += v_t[(i, j)] * coef;
            factor[(row_idx, j)] = v_t[(i, j)] / s[i];
        }
    }
    Ok((factor, beta))
}

/// Sliding-window GP regressor with a squared-exponential kernel and an
/// explicit polynomial mean basis.
///
/// The window holds the latest `capacity` observations; older ones are
/// evicted first. The factorization is refreshed after every observation,
/// and the hyperparameters are re-fit on the configured schedule.
#[derive(Clone, Debug)]
pub struct GpWindowModel {
    config: GpConfig,
    hyper: GpHyperparams,
    window: VecDeque<Sample>,
    dim: Option<usize>,
    observed: u64,
    rejected: u64,
    normalizer: Option<Normalizer>,
    posterior: Option<Posterior>,
}

impl GpWindowModel {
    pub fn new(config: GpConfig) -> Result<Self> {
        if config.capacity == 0 {
            return Err(Error::InvalidArgument("window capacity must be positive".into()));
        }
        config.hyper.validate()?;
        if !(config.min_input_scale >= 0.0 && config.min_input_scale.is_finite()) {
            return Err(Error::InvalidArgument(
                "minimum input scale must be finite and nonnegative".into(),
            ));
        }
        if let HyperFit::Online { stride, .. } = config.fit {
            if stride == 0 {
                return Err(Error::InvalidArgument("re-fit stride must be positive".into()));
            }
        }
        Ok(GpWindowModel {
            hyper: config.hyper.clone(),
            config,
            window: VecDeque::new(),
            dim: None,
            observed: 0,
            rejected: 0,
            normalizer: None,
            posterior: None,
        })
    }

    pub fn config(&self) -> &GpConfig {
        &self.config
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hyper
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.window.iter()
    }

    /// Total observations accepted so far, including evicted ones.
    pub fn observed(&self) -> u64 {
        self.observed
    }

    /// Observations refused because they were not finite.
    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn min_samples(&self) -> usize {
        let dim = self.dim.unwrap_or(0);
        self.config
            .min_samples
            .unwrap_or_else(|| self.hyper.basis.len(dim) + 1)
            .max(1)
    }

    /// True once the window holds enough samples to predict.
    pub fn is_warm(&self) -> bool {
        self.posterior.is_some()
    }

    /// Adds an observation, evicting the oldest if the window is full, and
    /// refreshes the model.
    pub fn observe(&mut self, input: &[f64], output: f64) -> Result<()> {
        if input.iter().any(|v| !v.is_finite()) || !output.is_finite() {
            self.rejected += 1;
            log::warn!("rejected non-finite GP sample ({input:?}, {output})");
            return Err(Error::NonFinite("GP observation"));
        }
        match self.dim {
            None => {
                if input.is_empty() {
                    return Err(Error::InvalidArgument("GP input must be non-empty".into()));
                }
                if self.hyper.length_scales.len() != 1 && self.hyper.length_scales.len() != input.len() {
                    return Err(Error::Dimension {
                        expected: self.hyper.length_scales.len(),
                        got: input.len(),
                        context: "GP input vs. length scales",
                    });
                }
                self.dim = Some(input.len());
            }
            Some(d) if d != input.len() => {
                return Err(Error::Dimension {
                    expected: d,
                    got: input.len(),
                    context: "GP input",
                })
            }
            _ => {}
        }
        if self.window.len() == self.config.capacity {
            self.window.pop_front();
        }
        self.window.push_back(Sample {
            input: input.to_vec(),
            output,
        });
        self.observed += 1;

        if let HyperFit::Online { stride, .. } = self.config.fit {
            if self.window.len() >= self.min_samples() && self.observed % stride as u64 == 0 {
                self.fit_hyperparams()?;
            }
        }
        self.refresh()
    }

    fn normalized_window(&self) -> (Normalizer, Vec<Vec<f64>>, Vec<f64>) {
        let dim = self.dim.unwrap_or(0);
        let normalizer = match self.config.scaling {
            InputScaling::None => Normalizer::identity(dim),
            InputScaling::Window => Normalizer::from_window(
                self.window.iter().map(|s| s.input.as_slice()),
                dim,
                self.config.min_input_scale,
            ),
        };
        let inputs = self.window.iter().map(|s| normalizer.apply(&s.input)).collect();
        let outputs = self.window.iter().map(|s| s.output).collect();
        (normalizer, inputs, outputs)
    }

    fn refresh(&mut self) -> Result<()> {
        if self.window.len() < self.min_samples() {
            self.posterior = None;
            self.normalizer = None;
            return Ok(());
        }
        let (normalizer, inputs, outputs) = self.normalized_window();
        self.posterior = Some(condition(inputs, &outputs, &self.hyper)?);
        self.normalizer = Some(normalizer);
        Ok(())
    }

    /// Profiled log marginal likelihood of the current window under `hyper`.
    /// The basis coefficients are set to their generalized least-squares
    /// estimate.
    pub fn log_marginal_likelihood(&self, hyper: &GpHyperparams) -> Result<f64> {
        if self.window.is_empty() {
            return Err(Error::Empty("GP window"));
        }
        let (_, inputs, outputs) = self.normalized_window();
        Ok(condition(inputs, &outputs, hyper)?.log_marginal_likelihood)
    }

    /// Maximizes the marginal likelihood over log length scale(s), log prior
    /// variance and log noise variance inside the configured bounds. On
    /// failure the previous hyperparameters are kept.
    pub fn fit_hyperparams(&mut self) -> Result<GpHyperparams> {
        if self.window.is_empty() {
            return Err(Error::Empty("GP window"));
        }
        let max_evals = match self.config.fit {
            HyperFit::Fixed => return Ok(self.hyper.clone()),
            HyperFit::Online { max_evals, .. } => max_evals,
        };
        let (_, inputs, outputs) = self.normalized_window();
        let bounds = self.config.bounds;
        let n_len = self.hyper.length_scales.len();
        let template = self.hyper.clone();
        let unpack = |theta: &[f64]| GpHyperparams {
            length_scales: theta[..n_len].iter().map(|v| v.exp()).collect(),
            prior_variance: theta[n_len].exp(),
            noise_variance: theta[n_len + 1].exp(),
            basis: template.basis,
        };

        let mut lower = vec![bounds.length_scale.0.ln(); n_len];
        let mut upper = vec![bounds.length_scale.1.ln(); n_len];
        lower.extend([
            bounds.prior_variance.0.ln(),
            bounds.noise_variance.0.max(1e-300).ln(),
        ]);
        upper.extend([bounds.prior_variance.1.ln(), bounds.noise_variance.1.ln()]);
        let mut start: Vec<f64> = self.hyper.length_scales.iter().map(|l| l.ln()).collect();
        start.push(self.hyper.prior_variance.ln());
        start.push(
            self.hyper
                .noise_variance
                .max(bounds.noise_variance.0)
                .max(1e-300)
                .ln(),
        );

        let objective = |theta: &[f64]| match condition(inputs.clone(), &outputs, &unpack(theta)) {
            Ok(post) if post.log_marginal_likelihood.is_finite() => -post.log_marginal_likelihood,
            _ => f64::INFINITY,
        };
        let (best, value) = minimize_bounded(objective, &start, &lower, &upper, 1.0, max_evals);
        if value.is_finite() {
            self.hyper = unpack(&best);
        } else {
            log::warn!("hyperparameter search failed; keeping {:?}", self.hyper);
        }
        Ok(self.hyper.clone())
    }

    /// Replaces the hyperparameters and refreshes the factorization.
    pub fn set_hyperparams(&mut self, hyper: GpHyperparams) -> Result<()> {
        hyper.validate()?;
        self.hyper = hyper;
        self.refresh()
    }

    fn check_query(&self, query: &[f64]) -> Result<()> {
        if let Some(d) = self.dim {
            if d != query.len() {
                return Err(Error::Dimension {
                    expected: d,
                    got: query.len(),
                    context: "GP query",
                });
            }
        }
        if query.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("GP query"));
        }
        Ok(())
    }

    /// Predictive mean and latent variance at `query`. Returns the cold-start
    /// prediction while the window holds fewer than
    /// [`GpWindowModel::min_samples`] samples.
    pub fn predict(&self, query: &[f64]) -> Result<Prediction> {
        self.check_query(query)?;
        let (Some(post), Some(norm)) = (&self.posterior, &self.normalizer) else {
            return Ok(Prediction::COLD);
        };
        let q = norm.apply(query);
        let m = post.inputs.len();
        let k_star = DVector::from_iterator(
            m,
            post.inputs.iter().map(|x| kernel_unchecked(&q, x, &self.hyper)),
        );
        let p = self.hyper.basis.len(q.len());
        let mut h = vec![0.0; p];
        self.hyper.basis.eval_into(&q, &mut h);
        let h = DVector::from_vec(h);

        let mean = h.dot(&post.beta) + k_star.dot(&post.alpha);

        let v = post
            .chol_l
            .solve_lower_triangular(&k_star)
            .ok_or_else(|| Error::Analysis("triangular solve failed".into()))?;
        let mut variance = self.hyper.prior_variance - v.norm_squared();
        if p > 0 {
            let r = &h - post.whitened_basis.transpose() * &v;
            variance += (&post.basis_precision_factor * r).norm_squared();
        }
        Ok(Prediction {
            mean,
            variance: variance.max(0.0),
            cold: false,
        })
    }

    /// Derivative of the predictive mean with respect to `query[dim]`, in the
    /// caller's (unnormalized) units. `None` while cold.
    pub fn mean_derivative_wrt(&self, query: &[f64], dim: usize) -> Result<Option<f64>> {
        self.check_query(query)?;
        if dim >= query.len() {
            return Err(Error::Dimension {
                expected: query.len(),
                got: dim,
                context: "derivative index",
            });
        }
        let (Some(post), Some(norm)) = (&self.posterior, &self.normalizer) else {
            return Ok(None);
        };
        let q = norm.apply(query);
        let l = self.hyper.length_scale(dim);
        let mut d = 0.0;
        for (x, a) in post.inputs.iter().zip(post.alpha.iter()) {
            let k = kernel_unchecked(&q, x, &self.hyper);
            d += -k * (q[dim] - x[dim]) / (l * l) * a;
        }
        let p = self.hyper.basis.len(q.len());
        if p > 0 {
            let mut dh = vec![0.0; p];
            self.hyper.basis.derivative_into(&q, dim, &mut dh);
            d += dh.iter().zip(post.beta.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(Some(d / norm.scale[dim]))
    }

    /// Lower Cholesky factor of the current kernel matrix, if warm.
    pub fn factor(&self) -> Option<&DMatrix<f64>> {
        self.posterior.as_ref().map(|p| &p.chol_l)
    }

    /// Jitter that made the current factorization succeed.
    pub fn jitter(&self) -> Option<f64> {
        self.posterior.as_ref().map(|p| p.jitter)
    }

    /// `K + (noise + jitter) I` for the current window, rebuilt from scratch.
    pub fn regularized_gram(&self) -> Option<DMatrix<f64>> {
        let post = self.posterior.as_ref()?;
        let m = post.inputs.len();
        Some(DMatrix::from_fn(m, m, |i, j| {
            let k = kernel_unchecked(&post.inputs[i], &post.inputs[j], &self.hyper);
            if i == j {
                k + self.hyper.noise_variance + post.jitter
            } else {
                k
            }
        }))
    }

    /// Writes the window as CSV: a header `xi0,...,xi{d-1},output`, then one
    /// row per sample, oldest first.
    pub fn dump_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let dim = self.dim.unwrap_or(0);
        let mut header: Vec<String> = (0..dim).map(|i| format!("xi{i}")).collect();
        header.push("output".into());
        w.write_record(&header)?;
        for s in &self.window {
            let mut row: Vec<String> = s.input.iter().map(|v| format!("{v:?}")).collect();
            row.push(format!("{:?}", s.output));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<window csv>", e))?;
        Ok(())
    }

    /// Builds a model from `config` and replays the samples of a window CSV
    /// written by [`GpWindowModel::dump_csv`]. Hyperparameters are not re-fit
    /// during the replay.
    pub fn restore_csv<R: Read>(config: GpConfig, reader: R) -> Result<Self> {
        let mut model = GpWindowModel::new(config)?;
        let mut rdr = csv::Reader::from_reader(reader);
        let mut samples = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let values = record
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Format(format!("window CSV: {e}")))?;
            let Some((&output, input)) = values.split_last() else {
                return Err(Error::Format("window CSV row is empty".into()));
            };
            samples.push((input.to_vec(), output));
        }
        let fit = model.config.fit;
        model.config.fit = HyperFit::Fixed;
        for (input, output) in samples {
            model.observe(&input, output)?;
        }
        model.config.fit = fit;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::kernel::Basis;

    fn fixed(basis: Basis, noise: f64) -> GpConfig {
        GpConfig {
            capacity: 15,
            hyper: GpHyperparams {
                length_scales: vec![1.0],
                prior_variance: 1.0,
                noise_variance: noise,
                basis,
            },
            fit: HyperFit::Fixed,
            bounds: HyperBounds::default(),
            scaling: InputScaling::None,
            min_samples: None,
            min_input_scale: 0.0,
        }
    }

    #[test]
    fn sixteenth_observation_evicts_the_first() {
        let mut gp = GpWindowModel::new(fixed(Basis::None, 1e-6)).unwrap();
        for i in 0..16 {
            gp.observe(&[i as f64], i as f64).unwrap();
        }
        assert_eq!(gp.len(), 15);
        assert_eq!(gp.samples().next().unwrap().output, 1.0);
        assert_eq!(gp.samples().last().unwrap().output, 15.0);
    }

    #[test]
    fn duplicate_inputs_with_noise_factorize() {
        let mut gp = GpWindowModel::new(fixed(Basis::Constant, 1e-3)).unwrap();
        for _ in 0..5 {
            gp.observe(&[0.5, 0.5], 1.0).unwrap();
        }
        assert!(gp.factor().is_some());
        assert!(gp.predict(&[0.5, 0.5]).unwrap().mean.is_finite());
    }

    #[test]
    fn duplicate_inputs_without_noise_use_jitter() {
        let mut gp = GpWindowModel::new(fixed(Basis::None, 0.0)).unwrap();
        gp.observe(&[0.5], 1.0).unwrap();
        gp.observe(&[0.5], 1.0).unwrap();
        assert!(gp.jitter().unwrap() >= INITIAL_JITTER);
    }

    #[test]
    fn cold_start_until_enough_samples() {
        let mut gp = GpWindowModel::new(fixed(Basis::Linear, 1e-8)).unwrap();
        let pred = gp.predict(&[0.0, 0.0]).unwrap();
        assert!(pred.cold && pred.mean == 0.0 && pred.variance.is_infinite());
        // linear basis in 2-D has 3 functions, so 4 samples are needed
        for i in 0..3 {
            gp.observe(&[i as f64, 1.0], 0.0).unwrap();
            assert!(gp.predict(&[0.0, 0.0]).unwrap().cold);
        }
        gp.observe(&[0.0, 3.0], 0.0).unwrap();
        assert!(!gp.predict(&[0.0, 0.0]).unwrap().cold);
        assert_eq!(gp.mean_derivative_wrt(&[0.0, 0.0], 1).unwrap(), Some(0.0));
    }

    #[test]
    fn rejects_non_finite_and_mismatched() {
        let mut gp = GpWindowModel::new(fixed(Basis::None, 1e-6)).unwrap();
        assert!(gp.observe(&[f64::NAN], 0.0).is_err());
        assert_eq!(gp.rejected(), 1);
        gp.observe(&[1.0], 0.0).unwrap();
        assert!(matches!(
            gp.observe(&[1.0, 2.0], 0.0),
            Err(Error::Dimension { .. })
        ));
        assert!(gp.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn interpolates_stored_outputs_in_noise_free_limit() {
        let mut gp = GpWindowModel::new(fixed(Basis::None, 1e-12)).unwrap();
        let xs = [-1.0, -0.3, 0.4, 1.1, 2.0];
        for &x in &xs {
            gp.observe(&[x], (2.0 * x).sin()).unwrap();
        }
        for &x in &xs {
            let pred = gp.predict(&[x]).unwrap();
            assert!((pred.mean - (2.0 * x).sin()).abs() < 1e-6);
            assert!(pred.variance <= 1e-12 + 1e-9);
        }
    }

    #[test]
    fn constant_window_has_zero_derivative() {
        let mut config = fixed(Basis::Constant, 1e-6);
        config.scaling = InputScaling::Window;
        let mut gp = GpWindowModel::new(config).unwrap();
        for i in 0..8 {
            gp.observe(&[i as f64 * 0.1, (i as f64).cos()], 2.5).unwrap();
        }
        let d = gp.mean_derivative_wrt(&[0.35, 0.2], 0).unwrap().unwrap();
        assert!(d.abs() < 1e-6, "{d}");
    }

    #[test]
    fn csv_round_trip_restores_window() {
        let mut gp = GpWindowModel::new(fixed(Basis::Linear, 1e-6)).unwrap();
        for i in 0..6 {
            let x = i as f64 * 0.37;
            gp.observe(&[x, x * x], 1.0 / 3.0 + x).unwrap();
        }
        let mut buf = Vec::new();
        gp.dump_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("xi0,xi1,output\n"));
        let restored = GpWindowModel::restore_csv(gp.config().clone(), buf.as_slice()).unwrap();
        let a: Vec<_> = gp.samples().cloned().collect();
        let b: Vec<_> = restored.samples().cloned().collect();
        assert_eq!(a, b);
        assert_eq!(
            gp.predict(&[0.5, 0.1]).unwrap(),
            restored.predict(&[0.5, 0.1]).unwrap()
        );
    }

    #[test]
    fn zero_outputs_drive_prior_variance_to_lower_bound() {
        let mut config = fixed(Basis::None, 1e-4);
        config.fit = HyperFit::Online {
            stride: 1,
            max_evals: 100,
        };
        let mut gp = GpWindowModel::new(config).unwrap();
        for i in 0..15 {
            gp.observe(&[i as f64 * 0.3], 0.0).unwrap();
        }
        let lower = gp.config().bounds.prior_variance.0;
        assert!(
            gp.hyperparams().prior_variance < lower * 1.01,
            "{:?}",
            gp.hyperparams()
        );
    }
}
