//! Multilayer perceptron: ReLU hidden layers, softmax output, trained
//! with mini-batch Adam on mean cross-entropy.
//!
//! The standard architecture is `[D, 32, 16, 8, C]`. Dropout, when
//! enabled, acts after the first two hidden layers only, in inverted form
//! (survivors scaled by `1/(1-p)` at train time) so that inference with
//! dropout off and a dropout rate of zero are the same computation.
//!
//! Everything is `f64` and seed-deterministic: weight initialization,
//! epoch shuffling, dropout masks, and stochastic forward passes each draw
//! from their own derived stream.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::models::{check_dimensions, Classifier, ModelError, ProbVector};
use crate::seeds;

/// Hidden layer widths of the standard architecture.
pub const HIDDEN_SIZES: [usize; 3] = [32, 16, 8];

/// Number of leading hidden layers followed by dropout (when enabled).
const DROPOUT_LAYERS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    /// Row-major `[fan_out x fan_in]` weight matrix.
    weights: Vec<f64>,
    biases: Vec<f64>,
    fan_in: usize,
    fan_out: usize,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            weights: vec![0.0; self.weights.len()],
            biases: vec![0.0; self.biases.len()],
            fan_in: self.fan_in,
            fan_out: self.fan_out,
        }
    }
}

/// Whether a forward pass applies dropout, and with which mask stream.
#[derive(Debug, Clone, Copy)]
pub enum DropoutMode {
    Off,
    /// Draw Bernoulli masks from the stream derived from this seed.
    Seeded(u64),
}

/// A feed-forward network. Immutable once fitted; clone to retrain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layers: Vec<Layer>,
    /// Per-unit drop probability after the first two hidden layers;
    /// 0 disables dropout entirely.
    dropout_rate: f64,
}

/// Builds the standard `[D, 32, 16, 8, C]` network with fan-in-scaled
/// uniform weights (`U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, drawn row-major
/// per layer from the derived stream) and zero biases. Dropout is off.
pub fn mlp_init(num_features: usize, num_classes: usize, seed: u64) -> MlpModel {
    let mut sizes = Vec::with_capacity(HIDDEN_SIZES.len() + 2);
    sizes.push(num_features);
    sizes.extend_from_slice(&HIDDEN_SIZES);
    sizes.push(num_classes);
    MlpModel::with_layer_sizes(&sizes, seed).expect("standard architecture is valid")
}

impl MlpModel {
    /// Builds a network with explicit layer sizes `[D, h1, ..., C]`
    /// (at least input and output, every size ≥ 1).
    pub fn with_layer_sizes(sizes: &[usize], seed: u64) -> Result<MlpModel, ModelError> {
        if sizes.len() < 2 {
            return Err(ModelError::ParameterOutOfRange {
                name: "layer_sizes",
                value: sizes.len() as f64,
                range: "at least [input, output]",
            });
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(ModelError::ParameterOutOfRange {
                name: "layer_size",
                value: 0.0,
                range: "1..",
            });
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (index, window) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (window[0], window[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut rng = seeds::rng(seed, &[seeds::tag::INIT, index as u64]);
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            layers.push(Layer {
                weights,
                biases: vec![0.0; fan_out],
                fan_in,
                fan_out,
            });
        }
        Ok(MlpModel {
            layers,
            dropout_rate: 0.0,
        })
    }

    /// Sets the dropout rate (`0 <= p < 1`).
    pub fn with_dropout(mut self, p: f64) -> Result<MlpModel, ModelError> {
        if !(0.0..1.0).contains(&p) {
            return Err(ModelError::ParameterOutOfRange {
                name: "dropout_rate",
                value: p,
                range: "[0, 1)",
            });
        }
        self.dropout_rate = p;
        Ok(self)
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].fan_in];
        sizes.extend(self.layers.iter().map(|l| l.fan_out));
        sizes
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// True when dropout applies after hidden layer `index` (0-based).
    fn dropout_after(&self, index: usize) -> bool {
        index < DROPOUT_LAYERS && index + 1 < self.layers.len()
    }

    /// Computes the logits for one input.
    ///
    /// With `DropoutMode::Seeded`, each eligible hidden unit is dropped
    /// independently with probability `p` and survivors are scaled by
    /// `1/(1-p)`; masks come from the stream derived from the pass seed
    /// (layer by layer, unit by unit). With `p = 0` the seeded path is
    /// identical to `Off`.
    pub fn forward(&self, features: &[f64], dropout: DropoutMode) -> Result<Vec<f64>, ModelError> {
        check_dimensions(self.layers[0].fan_in, features)?;
        let mut rng = match dropout {
            DropoutMode::Seeded(seed) if self.dropout_rate > 0.0 => Some(seeds::rng(seed, &[])),
            _ => None,
        };
        let mut activation = features.to_vec();
        for (index, layer) in self.layers.iter().enumerate() {
            let mut z = affine(layer, &activation);
            let last = index + 1 == self.layers.len();
            if last {
                return Ok(z);
            }
            for v in &mut z {
                *v = v.max(0.0);
            }
            if self.dropout_after(index) {
                if let Some(rng) = rng.as_mut() {
                    let keep_scale = 1.0 / (1.0 - self.dropout_rate);
                    for v in &mut z {
                        if rng.random::<f64>() < self.dropout_rate {
                            *v = 0.0;
                        } else {
                            *v *= keep_scale;
                        }
                    }
                }
            }
            activation = z;
        }
        unreachable!("loop returns at the final layer")
    }

    /// Mean cross-entropy of the dataset under the current weights,
    /// dropout off.
    pub fn loss(&self, data: &Dataset) -> Result<f64, ModelError> {
        self.check_dataset(data)?;
        let mut total = 0.0;
        for s in data.samples() {
            let logits = self.forward(&s.features, DropoutMode::Off)?;
            total += cross_entropy(&logits, s.label)?;
        }
        Ok(total / data.len() as f64)
    }

    /// Mean cross-entropy and its analytic gradient over the full
    /// dataset, dropout off, flattened in parameter order (see
    /// [`flat_parameters`](Self::flat_parameters)).
    pub fn loss_gradient(&self, data: &Dataset) -> Result<(f64, Vec<f64>), ModelError> {
        self.check_dataset(data)?;
        let mut grads: Vec<Layer> = self.layers.iter().map(Layer::zeros_like).collect();
        let mut total = 0.0;
        let scale = 1.0 / data.len() as f64;
        for s in data.samples() {
            let trace = self.forward_trace(&s.features, None);
            total += cross_entropy(trace.logits(), s.label)?;
            self.backward(&trace, s.label, scale, &mut grads)?;
        }
        let mut flat = Vec::with_capacity(self.num_parameters());
        for g in &grads {
            flat.extend_from_slice(&g.weights);
            flat.extend_from_slice(&g.biases);
        }
        Ok((total * scale, flat))
    }

    /// All parameters in a stable order: layer by layer, row-major
    /// weights then biases.
    pub fn flat_parameters(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_parameters());
        for layer in &self.layers {
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.biases);
        }
        flat
    }

    /// Restores parameters from [`flat_parameters`](Self::flat_parameters)
    /// order.
    pub fn set_flat_parameters(&mut self, flat: &[f64]) -> Result<(), ModelError> {
        if flat.len() != self.num_parameters() {
            return Err(ModelError::DimensionMismatch {
                expected: self.num_parameters(),
                found: flat.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let weight_count = layer.weights.len();
            layer.weights.copy_from_slice(&flat[offset..offset + weight_count]);
            offset += weight_count;
            let bias_count = layer.biases.len();
            layer.biases.copy_from_slice(&flat[offset..offset + bias_count]);
            offset += bias_count;
        }
        Ok(())
    }

    fn check_dataset(&self, data: &Dataset) -> Result<(), ModelError> {
        if data.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        if data.num_features() != self.num_features() {
            return Err(ModelError::DimensionMismatch {
                expected: self.num_features(),
                found: data.num_features(),
            });
        }
        if data.num_classes() != self.num_classes() {
            return Err(ModelError::DimensionMismatch {
                expected: self.num_classes(),
                found: data.num_classes(),
            });
        }
        Ok(())
    }

    /// Forward pass retaining everything backprop needs. `rng` draws
    /// dropout masks when given (training); `None` runs clean.
    fn forward_trace(&self, features: &[f64], rng: Option<&mut rand_chacha::ChaCha8Rng>) -> Trace {
        let mut activations: Vec<Vec<f64>> = vec![features.to_vec()];
        let mut pre_activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut mask_scales: Vec<Option<Vec<f64>>> = Vec::with_capacity(self.layers.len());
        let mut rng = rng;
        for (index, layer) in self.layers.iter().enumerate() {
            let z = affine(layer, activations.last().expect("nonempty"));
            pre_activations.push(z.clone());
            let last = index + 1 == self.layers.len();
            if last {
                mask_scales.push(None);
                activations.push(z);
                break;
            }
            let mut a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
            let mask = if self.dropout_after(index) && self.dropout_rate > 0.0 {
                rng.as_deref_mut().map(|rng| {
                    let keep_scale = 1.0 / (1.0 - self.dropout_rate);
                    let mask: Vec<f64> = a
                        .iter()
                        .map(|_| {
                            if rng.random::<f64>() < self.dropout_rate {
                                0.0
                            } else {
                                keep_scale
                            }
                        })
                        .collect();
                    for (v, &m) in a.iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    mask
                })
            } else {
                None
            };
            mask_scales.push(mask);
            activations.push(a);
        }
        Trace {
            activations,
            pre_activations,
            mask_scales,
        }
    }

    /// Accumulates `scale * dLoss/dParam` for one sample into `grads`.
    fn backward(
        &self,
        trace: &Trace,
        label: usize,
        scale: f64,
        grads: &mut [Layer],
    ) -> Result<(), ModelError> {
        let probs = softmax(trace.logits())?;
        let mut delta: Vec<f64> = probs.probs().to_vec();
        delta[label] -= 1.0;

        for index in (0..self.layers.len()).rev() {
            let layer = &self.layers[index];
            let input = &trace.activations[index];
            let grad = &mut grads[index];
            for (unit, &d) in delta.iter().enumerate() {
                let row = &mut grad.weights[unit * layer.fan_in..(unit + 1) * layer.fan_in];
                for (w, &a) in row.iter_mut().zip(input) {
                    *w += scale * d * a;
                }
                grad.biases[unit] += scale * d;
            }
            if index == 0 {
                break;
            }
            // Propagate to the previous layer's activation, then through
            // its dropout mask and ReLU.
            let mut previous = vec![0.0f64; layer.fan_in];
            for (unit, &d) in delta.iter().enumerate() {
                let row = &layer.weights[unit * layer.fan_in..(unit + 1) * layer.fan_in];
                for (p, &w) in previous.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            if let Some(mask) = &trace.mask_scales[index - 1] {
                for (p, &m) in previous.iter_mut().zip(mask) {
                    *p *= m;
                }
            }
            for (p, &z) in previous.iter_mut().zip(&trace.pre_activations[index - 1]) {
                if z <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = previous;
        }
        Ok(())
    }
}

struct Trace {
    /// `activations[0]` is the input; `activations[l + 1]` is the
    /// post-ReLU, post-dropout output of layer `l` (logits for the last).
    activations: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
    /// Per layer: the mask-and-scale factors applied to its activation,
    /// when dropout was active there.
    mask_scales: Vec<Option<Vec<f64>>>,
}

impl Trace {
    fn logits(&self) -> &[f64] {
        self.activations.last().expect("trace has layers")
    }
}

fn affine(layer: &Layer, input: &[f64]) -> Vec<f64> {
    let mut out = layer.biases.clone();
    for (unit, slot) in out.iter_mut().enumerate() {
        let row = &layer.weights[unit * layer.fan_in..(unit + 1) * layer.fan_in];
        let mut sum = 0.0;
        for (&w, &x) in row.iter().zip(input) {
            sum += w * x;
        }
        *slot += sum;
    }
    out
}

/// Exp-normalizes logits into a [`ProbVector`], subtracting the maximum
/// first so large logits cannot overflow.
pub fn softmax(logits: &[f64]) -> Result<ProbVector, ModelError> {
    if logits.is_empty() || logits.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("logits"));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    ProbVector::new(exps.into_iter().map(|e| e / sum).collect())
}

/// `-log softmax(logits)[label]`, computed in log space.
fn cross_entropy(logits: &[f64], label: usize) -> Result<f64, ModelError> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("logits"));
    }
    if label >= logits.len() {
        return Err(ModelError::LabelOutOfRange {
            label,
            num_classes: logits.len(),
        });
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum_exp = logits
        .iter()
        .map(|&z| (z - max).exp())
        .sum::<f64>()
        .ln()
        + max;
    Ok(log_sum_exp - logits[label])
}

/// Hyperparameters for [`train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Reshuffle the data each epoch. Disable only for deterministic
    /// full-batch experiments (e.g. loss-descent tests).
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            learning_rate: 1e-3,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 {
            return Err(ModelError::ParameterOutOfRange {
                name: "epochs",
                value: 0.0,
                range: "1..",
            });
        }
        if self.batch_size == 0 {
            return Err(ModelError::ParameterOutOfRange {
                name: "batch_size",
                value: 0.0,
                range: "1..",
            });
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::ParameterOutOfRange {
                name: "learning_rate",
                value: self.learning_rate,
                range: "finite, >= 0",
            });
        }
        Ok(())
    }
}

/// Trains a network with mini-batch Adam on mean cross-entropy.
///
/// Each epoch visits every sample once, in an order reshuffled from the
/// derived stream `(seed, SHUFFLE, epoch)` unless `shuffle` is off.
/// Dropout masks (drawn per sample from the `(seed, DROPOUT)` stream) are
/// active during training iff the model's dropout rate is positive.
/// A zero learning rate performs null updates and returns the model
/// unchanged.
pub fn train(model: MlpModel, data: &Dataset, config: &TrainConfig) -> Result<MlpModel, ModelError> {
    config.validate()?;
    model.check_dataset(data)?;
    let mut model = model;
    let n = data.len();

    let mut adam_m: Vec<Layer> = model.layers.iter().map(Layer::zeros_like).collect();
    let mut adam_v: Vec<Layer> = model.layers.iter().map(Layer::zeros_like).collect();
    let mut grads: Vec<Layer> = model.layers.iter().map(Layer::zeros_like).collect();
    let mut step = 0usize;
    let mut dropout_rng = seeds::rng(config.seed, &[seeds::tag::DROPOUT]);
    let use_dropout = model.dropout_rate > 0.0;

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        if config.shuffle {
            use rand::seq::SliceRandom;
            order.shuffle(&mut seeds::rng(
                config.seed,
                &[seeds::tag::SHUFFLE, epoch as u64],
            ));
        }
        for batch in order.chunks(config.batch_size) {
            for g in &mut grads {
                for w in &mut g.weights {
                    *w = 0.0;
                }
                for b in &mut g.biases {
                    *b = 0.0;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let sample = &data.samples()[i];
                let trace = model.forward_trace(
                    &sample.features,
                    if use_dropout {
                        Some(&mut dropout_rng)
                    } else {
                        None
                    },
                );
                model.backward(&trace, sample.label, scale, &mut grads)?;
            }

            step += 1;
            let correction1 = 1.0 - config.beta1.powi(step as i32);
            let correction2 = 1.0 - config.beta2.powi(step as i32);
            for ((layer, grad), (m, v)) in model
                .layers
                .iter_mut()
                .zip(&grads)
                .zip(adam_m.iter_mut().zip(adam_v.iter_mut()))
            {
                adam_update(
                    &mut layer.weights,
                    &grad.weights,
                    &mut m.weights,
                    &mut v.weights,
                    config,
                    correction1,
                    correction2,
                );
                adam_update(
                    &mut layer.biases,
                    &grad.biases,
                    &mut m.biases,
                    &mut v.biases,
                    config,
                    correction1,
                    correction2,
                );
            }
        }
    }
    Ok(model)
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    config: &TrainConfig,
    correction1: f64,
    correction2: f64,
) {
    for i in 0..params.len() {
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grads[i];
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
        let m_hat = m[i] / correction1;
        let v_hat = v[i] / correction2;
        params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
}

impl Classifier for MlpModel {
    fn num_classes(&self) -> usize {
        self.layers.last().expect("at least one layer").fan_out
    }

    fn num_features(&self) -> usize {
        self.layers[0].fan_in
    }

    /// Softmax of the clean (dropout-off) forward pass.
    fn predict_proba(&self, features: &[f64]) -> Result<ProbVector, ModelError> {
        softmax(&self.forward(features, DropoutMode::Off)?)
    }
}
