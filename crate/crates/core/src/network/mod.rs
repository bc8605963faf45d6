//! Fully connected classifier with a softmax output, trained by ADAM on
//! mean cross-entropy plus an optional L2 penalty on hidden-layer weights.

mod activation;
mod train;

pub use activation::{apply_activation, sigmoid, softplus, ActivationKind};
pub use train::{train, EpochMetrics, TrainMetrics};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::INPUT_BITS;
use crate::{Error, Matrix, Result};

/// Default layer widths: 12 inputs, five hidden layers, two softmax outputs.
pub const DEFAULT_LAYER_SIZES: [usize; 7] = [12, 10, 7, 5, 4, 3, 2];

/// Number of snapshot epochs in the default schedule.
pub const DEFAULT_SNAPSHOT_COUNT: usize = 60;

/// Which samples are forwarded at a snapshot epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotSamples {
    /// Train and test samples in canonical dataset order.
    #[default]
    Full,
    /// Training samples only, in ascending index order.
    Train,
}

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "default_layer_sizes")]
    pub layer_sizes: Vec<usize>,
    pub activation: ActivationKind,
    #[serde(default)]
    pub l2_lambda: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: u64,
    #[serde(default)]
    pub seed: u64,
    /// Explicit schedule; `None` selects [`log_spaced_epochs`].
    #[serde(default)]
    pub snapshot_epochs: Option<Vec<u64>>,
    #[serde(default)]
    pub snapshot_samples: SnapshotSamples,
}

fn default_layer_sizes() -> Vec<usize> {
    DEFAULT_LAYER_SIZES.to_vec()
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_batch_size() -> usize {
    512
}
fn default_epochs() -> u64 {
    8000
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            layer_sizes: default_layer_sizes(),
            activation: ActivationKind::Relu,
            l2_lambda: 0.0,
            learning_rate: default_learning_rate(),
            batch_size: default_batch_size(),
            epochs: default_epochs(),
            seed: 0,
            snapshot_epochs: None,
            snapshot_samples: SnapshotSamples::Full,
        }
    }
}

impl NetworkConfig {
    pub fn with_activation(activation: ActivationKind) -> Self {
        NetworkConfig {
            activation,
            ..Default::default()
        }
    }

    /// The effective snapshot schedule.
    pub fn snapshot_schedule(&self) -> Vec<u64> {
        match &self.snapshot_epochs {
            Some(epochs) => epochs.clone(),
            None => log_spaced_epochs(self.epochs, DEFAULT_SNAPSHOT_COUNT),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.layer_sizes.len() < 2 {
            return bad("need at least an input and an output layer".into());
        }
        if self.layer_sizes[0] != INPUT_BITS {
            return bad(format!("input layer must have {INPUT_BITS} units"));
        }
        if *self.layer_sizes.last().unwrap() != 2 {
            return bad("output layer must have 2 softmax units".into());
        }
        if self.layer_sizes.contains(&0) {
            return bad("layer sizes must be positive".into());
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad(format!("l2_lambda must be nonnegative, got {}", self.l2_lambda));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        let schedule = self.snapshot_schedule();
        if schedule.windows(2).any(|w| w[0] >= w[1]) {
            return bad("snapshot_epochs must be strictly increasing".into());
        }
        if schedule.last().is_some_and(|&e| e > self.epochs) {
            return bad("snapshot_epochs must not exceed epochs".into());
        }
        Ok(())
    }
}

/// `count` strictly increasing epochs from 0 to `epochs`, geometrically
/// spaced after epoch 0. Every epoch is returned when there are fewer than
/// `count` of them.
pub fn log_spaced_epochs(epochs: u64, count: usize) -> Vec<u64> {
    let total = epochs as usize + 1;
    if count >= total {
        return (0..=epochs).collect();
    }
    if count == 1 {
        return vec![epochs];
    }
    let mut out = Vec::with_capacity(count);
    out.push(0u64);
    let steps = (count - 2).max(1) as f64;
    for k in 1..count {
        let target = if k == count - 1 {
            epochs
        } else {
            (epochs as f64).powf((k - 1) as f64 / steps).round() as u64
        };
        let floor = out[k - 1] + 1;
        let ceiling = epochs - (count - 1 - k) as u64;
        out.push(target.max(floor).min(ceiling));
    }
    out
}

/// Weights, biases and (for PReLU) negative-side slopes of one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub fan_in: usize,
    pub fan_out: usize,
    /// `fan_out × fan_in`, row-major.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    /// One slope per unit for PReLU hidden layers, empty otherwise.
    pub slopes: Vec<f64>,
}

impl LayerParams {
    fn zeros_like(&self) -> Self {
        LayerParams {
            fan_in: self.fan_in,
            fan_out: self.fan_out,
            weights: vec![0.0; self.weights.len()],
            biases: vec![0.0; self.biases.len()],
            slopes: vec![0.0; self.slopes.len()],
        }
    }

    fn buffers(&self) -> [&Vec<f64>; 3] {
        [&self.weights, &self.biases, &self.slopes]
    }

    fn buffers_mut(&mut self) -> [&mut Vec<f64>; 3] {
        [&mut self.weights, &mut self.biases, &mut self.slopes]
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.fan_in + inp]
    }
}

/// Parameters of the whole network; also the shape of gradients and moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub layers: Vec<LayerParams>,
}

impl Parameters {
    pub fn zeros_like(&self) -> Self {
        Parameters {
            layers: self.layers.iter().map(LayerParams::zeros_like).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every scalar in layer order: weights, biases, slopes.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.buffers().into_iter().flat_map(|b| b.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.buffers_mut().into_iter().flat_map(|b| b.iter_mut()))
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn same_shape(&self, other: &Parameters) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.fan_in == b.fan_in
                    && a.fan_out == b.fan_out
                    && a.buffers()
                        .iter()
                        .zip(b.buffers())
                        .all(|(x, y)| x.len() == y.len())
            })
    }
}

/// ADAM hyperparameters other than the learning rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Network parameters plus ADAM state.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    activation: ActivationKind,
    params: Parameters,
    first_moment: Parameters,
    second_moment: Parameters,
    step: u64,
}

/// Pre- and post-activation values of every layer for one batch.
struct ForwardCache {
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
}

impl NetworkState {
    /// Truncated-Gaussian initialization: weights ~ N(0, 2/(fan_in+fan_out)),
    /// redrawn beyond two standard deviations; zero biases and moments.
    pub fn initialize(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n_layers = config.layer_sizes.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for (k, pair) in config.layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| loop {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if z.abs() <= 2.0 {
                        break z * std;
                    }
                })
                .collect();
            let slopes = match config.activation {
                ActivationKind::Prelu { slope } if k + 1 < n_layers => vec![slope; fan_out],
                _ => Vec::new(),
            };
            layers.push(LayerParams {
                fan_in,
                fan_out,
                weights,
                biases: vec![0.0; fan_out],
                slopes,
            });
        }
        Ok(Self::from_parameters(config.activation, Parameters { layers }))
    }

    /// Fresh optimizer state around the given parameters.
    pub fn from_parameters(activation: ActivationKind, params: Parameters) -> Self {
        NetworkState {
            activation,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            params,
            step: 0,
        }
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters {
        &mut self.params
    }

    pub fn first_moment(&self) -> &Parameters {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &Parameters {
        &self.second_moment
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn n_layers(&self) -> usize {
        self.params.layers.len()
    }

    /// Units in each non-input layer.
    pub fn layer_units(&self) -> Vec<usize> {
        self.params.layers.iter().map(|l| l.fan_out).collect()
    }

    fn forward_cache(&self, inputs: &Matrix) -> Result<ForwardCache> {
        let first = &self.params.layers[0];
        if inputs.cols() != first.fan_in {
            return Err(Error::InvalidArgument(format!(
                "inputs have {} columns, network expects {}",
                inputs.cols(),
                first.fan_in
            )));
        }
        let n_layers = self.n_layers();
        let batch = inputs.rows();
        let mut pre = Vec::with_capacity(n_layers);
        let mut post: Vec<Matrix> = Vec::with_capacity(n_layers);

        for (k, layer) in self.params.layers.iter().enumerate() {
            let prev = if k == 0 { inputs } else { &post[k - 1] };
            let mut z = Matrix::zeros(batch, layer.fan_out);
            for b in 0..batch {
                let x = prev.row(b);
                let zr = z.row_mut(b);
                for (o, zo) in zr.iter_mut().enumerate() {
                    let w = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                    *zo = layer.biases[o] + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
                }
            }

            let mut a = Matrix::zeros(batch, layer.fan_out);
            if k + 1 == n_layers {
                for b in 0..batch {
                    softmax_into(z.row(b), a.row_mut(b));
                }
            } else {
                let kind = self.activation;
                for b in 0..batch {
                    for (o, (av, &zv)) in a.row_mut(b).iter_mut().zip(z.row(b)).enumerate() {
                        let slope = layer.slopes.get(o).copied().unwrap_or(0.0);
                        *av = kind.apply_with_slope(zv, slope);
                    }
                }
            }
            if !a.as_slice().iter().all(|v| v.is_finite()) || !z.as_slice().iter().all(|v| v.is_finite()) {
                return Err(Error::Numerical {
                    layer: k,
                    epoch: None,
                });
            }
            pre.push(z);
            post.push(a);
        }
        Ok(ForwardCache { pre, post })
    }

    /// Activations of every non-input layer; the last one holds softmax rows.
    pub fn forward(&self, inputs: &Matrix) -> Result<Vec<Matrix>> {
        Ok(self.forward_cache(inputs)?.post)
    }

    /// Mean cross-entropy (nats) plus `l2_lambda` times the squared norm of
    /// hidden-layer weights.
    pub fn loss(&self, inputs: &Matrix, labels: &[u8], l2_lambda: f64) -> Result<f64> {
        let cache = self.forward_cache(inputs)?;
        let ce = mean_cross_entropy(cache.pre.last().unwrap(), labels);
        Ok(ce + l2_lambda * self.hidden_weight_sq_norm())
    }

    fn hidden_weight_sq_norm(&self) -> f64 {
        let n = self.n_layers();
        self.params.layers[..n - 1]
            .iter()
            .flat_map(|l| &l.weights)
            .map(|w| w * w)
            .sum()
    }

    /// Exact gradients of [`NetworkState::loss`].
    pub fn backward(&self, inputs: &Matrix, labels: &[u8], l2_lambda: f64) -> Result<Parameters> {
        self.loss_and_gradients(inputs, labels, l2_lambda).map(|(_, g)| g)
    }

    pub fn loss_and_gradients(
        &self,
        inputs: &Matrix,
        labels: &[u8],
        l2_lambda: f64,
    ) -> Result<(f64, Parameters)> {
        check_labels(inputs, labels)?;
        let cache = self.forward_cache(inputs)?;
        let n_layers = self.n_layers();
        let batch = inputs.rows();
        let scale = 1.0 / batch as f64;
        let mut grads = self.params.zeros_like();

        // softmax cross-entropy residual p - y, averaged over the batch
        let mut delta = cache.post[n_layers - 1].clone();
        for (b, &y) in labels.iter().enumerate() {
            let row = delta.row_mut(b);
            row[usize::from(y)] -= 1.0;
            row.iter_mut().for_each(|v| *v *= scale);
        }

        for k in (0..n_layers).rev() {
            let layer = &self.params.layers[k];
            let prev = if k == 0 { inputs } else { &cache.post[k - 1] };
            let g = &mut grads.layers[k];
            for b in 0..batch {
                let d = delta.row(b);
                let x = prev.row(b);
                for (o, &dv) in d.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    g.biases[o] += dv;
                    let gw = &mut g.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                    for (gwi, &xi) in gw.iter_mut().zip(x) {
                        *gwi += dv * xi;
                    }
                }
            }
            if k + 1 < n_layers {
                for (gw, &w) in g.weights.iter_mut().zip(&layer.weights) {
                    *gw += 2.0 * l2_lambda * w;
                }
            }
            if k == 0 {
                break;
            }

            // propagate to the previous hidden layer's pre-activations
            let below = &self.params.layers[k - 1];
            let pre = &cache.pre[k - 1];
            let mut next = Matrix::zeros(batch, layer.fan_in);
            let gb = &mut grads.layers[k - 1];
            for b in 0..batch {
                let d = delta.row(b);
                let nr = next.row_mut(b);
                for (o, &dv) in d.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    let w = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                    for (n, &wv) in nr.iter_mut().zip(w) {
                        *n += dv * wv;
                    }
                }
                let zr = pre.row(b);
                for (i, n) in nr.iter_mut().enumerate() {
                    let slope = below.slopes.get(i).copied().unwrap_or(0.0);
                    if !below.slopes.is_empty() && zr[i] <= 0.0 {
                        gb.slopes[i] += *n * zr[i];
                    }
                    *n *= self.activation.derivative_with_slope(zr[i], slope);
                }
            }
            delta = next;
        }

        let ce = mean_cross_entropy(cache.pre.last().unwrap(), labels);
        Ok((ce + l2_lambda * self.hidden_weight_sq_norm(), grads))
    }

    /// One bias-corrected ADAM update.
    pub fn adam_step(&mut self, grads: &Parameters, learning_rate: f64, adam: &Adam) -> Result<()> {
        if !self.params.same_shape(grads) {
            return Err(Error::InvalidArgument(
                "gradient shape does not match parameters".into(),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - adam.beta1.powi(t);
        let bias2 = 1.0 - adam.beta2.powi(t);
        let updates = self
            .params
            .iter_mut()
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
            .zip(grads.iter());
        for (((p, m), v), &g) in updates {
            *m = adam.beta1 * *m + (1.0 - adam.beta1) * g;
            *v = adam.beta2 * *v + (1.0 - adam.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + adam.epsilon);
        }
        Ok(())
    }
}

fn check_labels(inputs: &Matrix, labels: &[u8]) -> Result<()> {
    if labels.len() != inputs.rows() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {} input rows",
            labels.len(),
            inputs.rows()
        )));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    Ok(())
}

fn softmax_into(z: &[f64], out: &mut [f64]) {
    let max = z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// Mean of `logsumexp(z) - z_y` over rows of output logits.
fn mean_cross_entropy(logits: &Matrix, labels: &[u8]) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(b, &y)| {
            let z = logits.row(b);
            let max = z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - z[usize::from(y)]
        })
        .sum();
    total / labels.len().max(1) as f64
}

/// Fraction of rows whose arg-max output matches the label.
pub fn accuracy(outputs: &Matrix, labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = labels
        .iter()
        .enumerate()
        .filter(|&(b, &y)| {
            let row = outputs.row(b);
            let predicted = usize::from(row[1] > row[0]);
            predicted == usize::from(y)
        })
        .count();
    correct as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tanh_config() -> NetworkConfig {
        NetworkConfig {
            activation: ActivationKind::Tanh,
            epochs: 10,
            ..Default::default()
        }
    }

    #[test]
    fn initialization_respects_truncation_and_shapes() {
        let state = NetworkState::initialize(&tanh_config()).unwrap();
        let first = &state.params().layers[0];
        assert_eq!((first.fan_out, first.fan_in), (10, 12));
        assert_eq!(state.layer_units(), vec![10, 7, 5, 4, 3, 2]);
        for l in &state.params().layers {
            let bound = 2.0 * (2.0 / (l.fan_in + l.fan_out) as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= bound));
            assert!(l.biases.iter().all(|&b| b == 0.0));
        }
        assert!(state.first_moment().iter().all(|&m| m == 0.0));
        assert_eq!(state, NetworkState::initialize(&tanh_config()).unwrap());
    }

    #[test]
    fn prelu_carries_slopes_on_hidden_layers_only() {
        let cfg = NetworkConfig::with_activation(ActivationKind::Prelu { slope: 0.25 });
        let state = NetworkState::initialize(&cfg).unwrap();
        let layers = &state.params().layers;
        assert!(layers[..5].iter().all(|l| l.slopes == vec![0.25; l.fan_out]));
        assert!(layers[5].slopes.is_empty());
    }

    #[test]
    fn zero_network_is_symmetric() {
        let mut state = NetworkState::initialize(&tanh_config()).unwrap();
        state.params_mut().iter_mut().for_each(|p| *p = 0.0);
        let inputs = crate::generate_dataset(0).input_matrix();
        let out = state.forward(&inputs).unwrap();
        assert_eq!(out.len(), 6);
        for layer in &out[..5] {
            assert!(layer.as_slice().iter().all(|&v| v == 0.0));
        }
        assert!(out[5].as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn schedule_validation() {
        let mut cfg = tanh_config();
        cfg.snapshot_epochs = Some(vec![0, 5, 5]);
        assert!(cfg.validate().is_err());
        cfg.snapshot_epochs = Some(vec![0, 11]);
        assert!(cfg.validate().is_err());
        cfg.snapshot_epochs = Some(vec![0, 10]);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn log_spacing() {
        let e = log_spaced_epochs(8000, 60);
        assert_eq!(e.len(), 60);
        assert_eq!((e[0], e[59]), (0, 8000));
        assert!(e.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(log_spaced_epochs(5, 60), vec![0, 1, 2, 3, 4, 5]);
        let short = log_spaced_epochs(70, 60);
        assert_eq!(short.len(), 60);
        assert_eq!(*short.last().unwrap(), 70);
        assert!(short.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        let ok = r#"{"activation": {"kind": "relu"}, "epochs": 20}"#;
        let cfg: NetworkConfig = serde_json::from_str(ok).unwrap();
        assert_eq!(cfg.layer_sizes, DEFAULT_LAYER_SIZES.to_vec());
        assert_eq!(cfg.batch_size, 512);
        let bad = r#"{"activation": {"kind": "relu"}, "momentum": 0.9}"#;
        assert!(serde_json::from_str::<NetworkConfig>(bad).is_err());
    }
}
