//! Small fully connected network for learning inverse dynamics.
//!
//! Hidden layers use `tanh`, the output layer is linear. Inputs and the
//! label are z-scored with constants taken from the training set, so the
//! network always works in normalized units.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::InverseDataset;
use crate::dynamics::StateVector;
use crate::error::{Error, Result};

const FORMAT_MAGIC: &str = "impromptu-mlp";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn tag(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Format(format!("unknown activation {other:?}"))),
        }
    }
}

/// Per-dimension affine map `v -> (v - mean) / std`.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    /// Z-score constants of `rows`. Dimensions with (near) zero spread keep a
    /// unit scale.
    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone) -> Self {
        let n = rows.clone().count().max(1) as f64;
        let dim = rows.clone().next().map_or(0, <[f64]>::len);
        let mut mean = vec![0.0; dim];
        for row in rows.clone() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for (s, m) in std.iter_mut().zip(&mean) {
            *s = (*s / n).sqrt();
            if !(*s > 1e-12 * (1.0 + m.abs())) {
                *s = 1.0;
            }
        }
        Normalization { mean, std }
    }

    pub fn normalize(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    pub fn denormalize(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| x * s + m)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs x inputs`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    fn forward(&self, input: &[f64], pre: &mut [f64], out: &mut [f64]) {
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z = self.biases[o] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
            pre[o] = z;
            out[o] = match self.activation {
                Activation::Tanh => z.tanh(),
                Activation::Identity => z,
            };
        }
    }
}

/// Hyperparameters of [`train_mlp`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub hidden: Vec<usize>,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    /// Epochs without sufficient validation improvement before stopping.
    pub patience: usize,
    /// Relative decrease of the validation loss that counts as improvement.
    pub min_relative_improvement: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            hidden: vec![20, 20],
            max_epochs: 2000,
            batch_size: 64,
            learning_rate: 1e-3,
            validation_fraction: 0.15,
            patience: 50,
            min_relative_improvement: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainingReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// RMSE in normalized label units.
    pub train_rmse: f64,
    /// RMSE in normalized label units on the held-out split.
    pub validation_rmse: f64,
    pub stopped_early: bool,
}

/// Feedforward approximation of an inverse-dynamics map
/// `[x(k), y_d(k+r)] -> u(k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpInverseModel {
    layers: Vec<Layer>,
    input_norm: Normalization,
    output_norm: Normalization,
}

impl MlpInverseModel {
    /// Randomly initialized network with `tanh` hidden layers. Weights are
    /// drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases start at 0.
    pub fn new(
        sizes: &[usize],
        input_norm: Normalization,
        output_norm: Normalization,
        seed: u64,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer sizes {sizes:?}")));
        }
        if *sizes.last().unwrap() != 1 {
            return Err(Error::InvalidArgument(
                "inverse network has a scalar output".into(),
            ));
        }
        if input_norm.mean.len() != sizes[0] || output_norm.mean.len() != 1 {
            return Err(Error::Dimension {
                expected: sizes[0],
                got: input_norm.mean.len(),
                context: "normalization constants",
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Layer {
                    inputs: w[0],
                    outputs: w[1],
                    weights: (0..w[0] * w[1])
                        .map(|_| rng.random_range(-bound..bound))
                        .collect(),
                    biases: vec![0.0; w[1]],
                    activation: if i == last {
                        Activation::Identity
                    } else {
                        Activation::Tanh
                    },
                }
            })
            .collect();
        Ok(MlpInverseModel {
            layers,
            input_norm,
            output_norm,
        })
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn input_normalization(&self) -> &Normalization {
        &self.input_norm
    }

    pub fn output_normalization(&self) -> &Normalization {
        &self.output_norm
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All weights and biases, layer by layer (weights row-major first).
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.biases);
        }
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: params.len(),
                context: "parameter vector",
            });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    /// Network output for an already normalized input.
    pub fn forward_normalized(&self, input: &[f64]) -> f64 {
        let mut act = input.to_vec();
        for l in &self.layers {
            let mut pre = vec![0.0; l.outputs];
            let mut out = vec![0.0; l.outputs];
            l.forward(&act, &mut pre, &mut out);
            act = out;
        }
        act[0]
    }

    /// Network output in physical units.
    pub fn predict(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: input.len(),
                context: "network input",
            });
        }
        let z = self.forward_normalized(&self.input_norm.normalize(input));
        Ok(self.output_norm.denormalize(&[z])[0])
    }

    /// `u_1(k)` for state `x(k)` and preview `y_d(k+r)`.
    pub fn reference(&self, x: &StateVector, preview: f64) -> Result<f64> {
        let mut input: Vec<f64> = x.iter().copied().collect();
        input.push(preview);
        self.predict(&input)
    }

    /// Loss `mean(0.5 (f(x_i) - t_i)^2)` over normalized pairs and its
    /// gradient with respect to [`MlpInverseModel::params`].
    pub fn loss_and_gradient(&self, inputs: &[Vec<f64>], targets: &[f64]) -> (f64, Vec<f64>) {
        let mut grads = Gradients::zeros(self);
        let mut scratch = Scratch::new(self);
        let mut loss = 0.0;
        for (x, &t) in inputs.iter().zip(targets) {
            loss += self.accumulate(x, t, &mut scratch, &mut grads);
        }
        let n = inputs.len().max(1) as f64;
        let flat: Vec<f64> = grads
            .layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).map(|g| g / n).collect::<Vec<_>>())
            .collect();
        (loss / n, flat)
    }

    /// Forward and backward pass for one normalized sample. Adds the
    /// gradient of `0.5 (f(x) - t)^2` into `grads` and returns that loss.
    fn accumulate(&self, x: &[f64], target: f64, scratch: &mut Scratch, grads: &mut Gradients) -> f64 {
        let nl = self.layers.len();
        scratch.acts[0].copy_from_slice(x);
        for (i, l) in self.layers.iter().enumerate() {
            let (head, tail) = scratch.acts.split_at_mut(i + 1);
            l.forward(&head[i], &mut scratch.pre[i], &mut tail[0]);
        }
        let err = scratch.acts[nl][0] - target;

        // delta for the output layer (identity activation)
        scratch.delta[nl - 1][0] = err;
        for i in (0..nl).rev() {
            let l = &self.layers[i];
            let (gw, gb) = &mut grads.layers[i];
            for o in 0..l.outputs {
                let d = scratch.delta[i][o];
                gb[o] += d;
                let row = &mut gw[o * l.inputs..(o + 1) * l.inputs];
                for (g, a) in row.iter_mut().zip(&scratch.acts[i]) {
                    *g += d * a;
                }
            }
            if i > 0 {
                let prev = &self.layers[i - 1];
                let (lower, upper) = scratch.delta.split_at_mut(i);
                let below = &mut lower[i - 1];
                for j in 0..l.inputs {
                    let mut s = 0.0;
                    for o in 0..l.outputs {
                        s += l.weights[o * l.inputs + j] * upper[0][o];
                    }
                    below[j] = match prev.activation {
                        Activation::Tanh => {
                            let a = scratch.acts[i][j];
                            s * (1.0 - a * a)
                        }
                        Activation::Identity => s,
                    };
                }
            }
        }
        0.5 * err * err
    }

    /// Writes the versioned text format. Floats use Rust's shortest
    /// round-trip representation, so [`MlpInverseModel::load`] restores the
    /// model bit for bit.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        writeln!(s, "{FORMAT_MAGIC} {FORMAT_VERSION}").unwrap();
        let sizes: Vec<String> = self.layer_sizes().iter().map(usize::to_string).collect();
        writeln!(s, "layers {}", sizes.join(" ")).unwrap();
        let acts: Vec<&str> = self.layers.iter().map(|l| l.activation.tag()).collect();
        writeln!(s, "activations {}", acts.join(" ")).unwrap();
        writeln!(s, "input_mean {}", join(&self.input_norm.mean)).unwrap();
        writeln!(s, "input_std {}", join(&self.input_norm.std)).unwrap();
        writeln!(s, "output_mean {}", join(&self.output_norm.mean)).unwrap();
        writeln!(s, "output_std {}", join(&self.output_norm.std)).unwrap();
        for (i, l) in self.layers.iter().enumerate() {
            writeln!(s, "weights {i} {}", join(&l.weights)).unwrap();
            writeln!(s, "biases {i} {}", join(&l.biases)).unwrap();
        }
        w.write_all(s.as_bytes()).map_err(|e| Error::io("<mlp model>", e))
    }

    pub fn load<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let mut next = |key: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing {key:?} line")))?
                .map_err(|e| Error::io("<mlp model>", e))?;
            let mut fields = line.split_whitespace().map(str::to_owned);
            match fields.next() {
                Some(k) if k == key => Ok(fields.collect()),
                other => Err(Error::Format(format!("expected {key:?}, found {other:?}"))),
            }
        };
        let floats = |fields: &[String]| -> Result<Vec<f64>> {
            fields
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Format(format!("{f:?}: {e}"))))
                .collect()
        };

        let header = next(FORMAT_MAGIC)?;
        if header != [FORMAT_VERSION.to_string()] {
            return Err(Error::Format(format!("unsupported version {header:?}")));
        }
        let sizes: Vec<usize> = next("layers")?
            .iter()
            .map(|f| f.parse().map_err(|e| Error::Format(format!("{f:?}: {e}"))))
            .collect::<Result<_>>()?;
        if sizes.len() < 2 {
            return Err(Error::Format("need at least two layer sizes".into()));
        }
        let acts = next("activations")?
            .iter()
            .map(|t| Activation::from_tag(t))
            .collect::<Result<Vec<_>>>()?;
        if acts.len() != sizes.len() - 1 {
            return Err(Error::Format("activation count does not match layers".into()));
        }
        let input_norm = Normalization {
            mean: floats(&next("input_mean")?)?,
            std: floats(&next("input_std")?)?,
        };
        let output_norm = Normalization {
            mean: floats(&next("output_mean")?)?,
            std: floats(&next("output_std")?)?,
        };
        if input_norm.mean.len() != sizes[0] || input_norm.std.len() != sizes[0] {
            return Err(Error::Format("input normalization has the wrong length".into()));
        }
        let mut layers = Vec::new();
        for (i, (w, act)) in sizes.windows(2).zip(acts).enumerate() {
            let mut weights_line = next("weights")?;
            let mut biases_line = next("biases")?;
            if weights_line.first().map(String::as_str) != Some(&i.to_string())
                || biases_line.first().map(String::as_str) != Some(&i.to_string())
            {
                return Err(Error::Format(format!("layer {i} out of order")));
            }
            weights_line.remove(0);
            biases_line.remove(0);
            let weights = floats(&weights_line)?;
            let biases = floats(&biases_line)?;
            if weights.len() != w[0] * w[1] || biases.len() != w[1] {
                return Err(Error::Format(format!(
                    "layer {i} has the wrong number of parameters"
                )));
            }
            layers.push(Layer {
                inputs: w[0],
                outputs: w[1],
                weights,
                biases,
                activation: act,
            });
        }
        Ok(MlpInverseModel {
            layers,
            input_norm,
            output_norm,
        })
    }
}

struct Scratch {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Scratch {
    fn new(model: &MlpInverseModel) -> Self {
        let sizes = model.layer_sizes();
        Scratch {
            acts: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            pre: sizes[1..].iter().map(|&s| vec![0.0; s]).collect(),
            delta: sizes[1..].iter().map(|&s| vec![0.0; s]).collect(),
        }
    }
}

struct Gradients {
    layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    fn zeros(model: &MlpInverseModel) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
                .collect(),
        }
    }

    fn clear(&mut self) {
        for (w, b) in &mut self.layers {
            w.iter_mut().for_each(|g| *g = 0.0);
            b.iter_mut().for_each(|g| *g = 0.0);
        }
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Trains an inverse network on `dataset` with mini-batch Adam and early
/// stopping on the validation split. Reproducible for a fixed `seed`.
pub fn train_mlp(
    dataset: &InverseDataset,
    config: &TrainingConfig,
    seed: u64,
) -> Result<(MlpInverseModel, TrainingReport)> {
    if dataset.is_empty() {
        return Err(Error::Empty("inverse dataset"));
    }
    if config.batch_size == 0 || config.max_epochs == 0 {
        return Err(Error::InvalidArgument(
            "batch size and epochs must be positive".into(),
        ));
    }
    if !(0.0..1.0).contains(&config.validation_fraction) {
        return Err(Error::InvalidArgument(
            "validation fraction must be in [0, 1)".into(),
        ));
    }
    let dim = dataset.input_dim().unwrap();
    if dataset.inputs.iter().any(|x| x.len() != dim) {
        return Err(Error::InvalidArgument(
            "inconsistent input dimensions in dataset".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((dataset.len() as f64) * config.validation_fraction).round() as usize;
    let n_val = if dataset.len() > 1 {
        n_val.min(dataset.len() - 1)
    } else {
        0
    };
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();

    let input_norm = Normalization::fit(train_idx.iter().map(|&i| dataset.inputs[i].as_slice()));
    let labels: Vec<[f64; 1]> = dataset.labels.iter().map(|&u| [u]).collect();
    let output_norm = Normalization::fit(train_idx.iter().map(|&i| labels[i].as_slice()));
    let xs: Vec<Vec<f64>> = dataset.inputs.iter().map(|x| input_norm.normalize(x)).collect();
    let ts: Vec<f64> = dataset
        .labels
        .iter()
        .map(|&u| (u - output_norm.mean[0]) / output_norm.std[0])
        .collect();

    let mut sizes = vec![dim];
    sizes.extend(&config.hidden);
    sizes.push(1);
    let mut model = MlpInverseModel::new(&sizes, input_norm, output_norm, rng.random())?;

    let mse = |model: &MlpInverseModel, idx: &[usize]| -> f64 {
        if idx.is_empty() {
            return f64::NAN;
        }
        idx.iter()
            .map(|&i| {
                let e = model.forward_normalized(&xs[i]) - ts[i];
                e * e
            })
            .sum::<f64>()
            / idx.len() as f64
    };

    let n_params = model.param_count();
    let mut adam = Adam {
        m: vec![0.0; n_params],
        v: vec![0.0; n_params],
        t: 0,
    };
    let mut grads = Gradients::zeros(&model);
    let mut scratch = Scratch::new(&model);
    let mut params = model.params();

    let monitor: Vec<usize> = if val_idx.is_empty() {
        train_idx.clone()
    } else {
        val_idx.to_vec()
    };
    let mut best = (mse(&model, &monitor), 0usize, params.clone());
    let mut since_improvement = 0usize;
    let mut epochs_run = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        epochs_run = epoch;
        train_idx.shuffle(&mut rng);
        for batch in train_idx.chunks(config.batch_size) {
            grads.clear();
            let mut loss = 0.0;
            for &i in batch {
                loss += model.accumulate(&xs[i], ts[i], &mut scratch, &mut grads);
            }
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            adam.t += 1;
            let scale = 1.0 / batch.len() as f64;
            let bc1 = 1.0 - config.beta1.powi(adam.t);
            let bc2 = 1.0 - config.beta2.powi(adam.t);
            let flat = grads.layers.iter().flat_map(|(w, b)| w.iter().chain(b.iter()));
            for (j, g) in flat.enumerate() {
                let g = g * scale;
                adam.m[j] = config.beta1 * adam.m[j] + (1.0 - config.beta1) * g;
                adam.v[j] = config.beta2 * adam.v[j] + (1.0 - config.beta2) * g * g;
                let m_hat = adam.m[j] / bc1;
                let v_hat = adam.v[j] / bc2;
                params[j] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            }
            model.set_params(&params)?;
        }

        let val = mse(&model, &monitor);
        if !val.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        if val < best.0 * (1.0 - config.min_relative_improvement) {
            best = (val, epoch, params.clone());
            since_improvement = 0;
        } else {
            if val < best.0 {
                best = (val, epoch, params.clone());
            }
            since_improvement += 1;
            if since_improvement >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }

    model.set_params(&best.2)?;
    let report = TrainingReport {
        epochs_run,
        best_epoch: best.1,
        train_rmse: mse(&model, &train_idx).sqrt(),
        validation_rmse: mse(&model, &monitor).sqrt(),
        stopped_early,
    };
    log::info!(
        "trained inverse network: {} epochs, validation rmse {:.3e}",
        report.epochs_run,
        report.validation_rmse
    );
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model(seed: u64) -> MlpInverseModel {
        let norm = Normalization {
            mean: vec![0.0; 3],
            std: vec![1.0; 3],
        };
        let out = Normalization {
            mean: vec![0.0],
            std: vec![1.0],
        };
        MlpInverseModel::new(&[3, 5, 4, 1], norm, out, seed).unwrap()
    }

    #[test]
    fn normalization_round_trip() {
        let rows = [vec![1.0, 10.0, 5.0], vec![3.0, -2.0, 5.0], vec![-0.5, 4.0, 5.0]];
        let norm = Normalization::fit(rows.iter().map(Vec::as_slice));
        assert_eq!(norm.std[2], 1.0);
        for row in &rows {
            let back = norm.denormalize(&norm.normalize(row));
            for (a, b) in back.iter().zip(row) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn params_round_trip() {
        let mut m = toy_model(3);
        let p = m.params();
        assert_eq!(p.len(), m.param_count());
        let shifted: Vec<f64> = p.iter().map(|v| v + 1.0).collect();
        m.set_params(&shifted).unwrap();
        assert_eq!(m.params(), shifted);
        assert!(m.set_params(&p[1..]).is_err());
    }

    #[test]
    fn save_load_is_bit_exact() {
        let m = toy_model(11);
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let back = MlpInverseModel::load(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        let bits = |m: &MlpInverseModel| m.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn load_rejects_garbage() {
        assert!(MlpInverseModel::load("impromptu-mlp 2\n".as_bytes()).is_err());
        assert!(MlpInverseModel::load("hello".as_bytes()).is_err());
        let m = toy_model(1);
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("tanh", "relu");
        assert!(MlpInverseModel::load(text.as_bytes()).is_err());
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let err = train_mlp(&InverseDataset::default(), &TrainingConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Empty(_)));
    }

    #[test]
    fn training_is_deterministic() {
        let inputs: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.05;
                vec![t.sin(), t.cos(), (2.0 * t).sin()]
            })
            .collect();
        let labels = inputs.iter().map(|x| x[2] - 0.5 * x[0] + 0.2 * x[1]).collect();
        let ds = InverseDataset {
            inputs,
            labels,
            r: 1,
            skipped_traces: 0,
        };
        let config = TrainingConfig {
            max_epochs: 5,
            ..Default::default()
        };
        let (a, ra) = train_mlp(&ds, &config, 42).unwrap();
        let (b, rb) = train_mlp(&ds, &config, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        let (c, _) = train_mlp(&ds, &config, 43).unwrap();
        assert_ne!(a, c);
    }
}
