//! Minibatch training: greedy denoising pretraining and end-to-end fine-tuning.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{backward, dataset_loss, forward_train, LayerGradient};
use super::{forward_all, AutoencoderModel, DenseLayer, RowSource};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Optimizer {
    SgdMomentum {
        momentum: f64,
    },
    /// Per-parameter adaptive steps from running first and second moment
    /// estimates, with bias correction.
    AdaptiveMoments {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::AdaptiveMoments {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Fine-tuning epochs.
    pub epochs: usize,
    /// Epochs per pretrained layer; `None` reuses `epochs`.
    pub pretrain_epochs: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Dropout rate used for both corruption points of each denoising layer.
    pub dropout_rate: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            pretrain_epochs: None,
            batch_size: 256,
            learning_rate: 1e-3,
            dropout_rate: 0.2,
            seed: 0,
            optimizer: Optimizer::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.pretrain_epochs == Some(0) {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        match self.optimizer {
            Optimizer::SgdMomentum { momentum } if !(0.0..1.0).contains(&momentum) => Err(Error::InvalidConfig(
                format!("momentum must lie in [0, 1), got {momentum}"),
            )),
            Optimizer::AdaptiveMoments { beta1, beta2, epsilon }
                if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && epsilon > 0.0) =>
            {
                Err(Error::InvalidConfig(
                    "adaptive moment hyperparameters out of range".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn effective_pretrain_epochs(&self) -> usize {
        self.pretrain_epochs.unwrap_or(self.epochs)
    }
}

struct Slot {
    first_w: Array2<f64>,
    second_w: Array2<f64>,
    first_b: Array1<f64>,
    second_b: Array1<f64>,
}

struct OptimizerState {
    kind: Optimizer,
    learning_rate: f64,
    step: i32,
    slots: Vec<Slot>,
}

impl OptimizerState {
    fn new(kind: Optimizer, learning_rate: f64, layers: &[DenseLayer]) -> Self {
        let slots = layers
            .iter()
            .map(|l| Slot {
                first_w: Array2::zeros(l.weights.dim()),
                second_w: Array2::zeros(l.weights.dim()),
                first_b: Array1::zeros(l.bias.len()),
                second_b: Array1::zeros(l.bias.len()),
            })
            .collect();
        OptimizerState {
            kind,
            learning_rate,
            step: 0,
            slots,
        }
    }

    fn apply(&mut self, layers: &mut [DenseLayer], grads: &[LayerGradient]) {
        self.step += 1;
        let lr = self.learning_rate;
        for ((layer, grad), slot) in layers.iter_mut().zip(grads).zip(&mut self.slots) {
            match self.kind {
                Optimizer::SgdMomentum { momentum } => {
                    // velocity lives in the first-moment slot
                    ndarray::Zip::from(&mut layer.weights)
                        .and(&mut slot.first_w)
                        .and(&grad.weights)
                        .for_each(|w, v, &g| {
                            *v = momentum * *v - lr * g;
                            *w += *v;
                        });
                    ndarray::Zip::from(&mut layer.bias)
                        .and(&mut slot.first_b)
                        .and(&grad.bias)
                        .for_each(|w, v, &g| {
                            *v = momentum * *v - lr * g;
                            *w += *v;
                        });
                }
                Optimizer::AdaptiveMoments { beta1, beta2, epsilon } => {
                    let c1 = 1.0 - beta1.powi(self.step);
                    let c2 = 1.0 - beta2.powi(self.step);
                    let update = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
                    };
                    ndarray::Zip::from(&mut layer.weights)
                        .and(&mut slot.first_w)
                        .and(&mut slot.second_w)
                        .and(&grad.weights)
                        .for_each(|w, m, v, &g| update(w, m, v, g));
                    ndarray::Zip::from(&mut layer.bias)
                        .and(&mut slot.first_b)
                        .and(&mut slot.second_b)
                        .and(&grad.bias)
                        .for_each(|w, m, v, &g| update(w, m, v, g));
                }
            }
        }
    }
}

fn check_loss(loss: f64, epoch: usize) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFiniteLoss { epoch, loss })
    }
}

/// Trains `layers` to reconstruct `data`. Returns the clean loss before
/// training followed by the clean loss after each epoch.
fn train_stack(
    layers: &mut [DenseLayer],
    data: &dyn RowSource,
    epochs: usize,
    cfg: &TrainConfig,
    dropout_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let n = data.n_rows();
    let clean_loss = |layers: &[DenseLayer]| {
        let refs: Vec<&DenseLayer> = layers.iter().collect();
        dataset_loss(&refs, data)
    };
    let mut trace = vec![check_loss(clean_loss(layers), 0)?];
    let mut optimizer = OptimizerState::new(cfg.optimizer, cfg.learning_rate, layers);
    let mut order: Vec<usize> = (0..n).collect();
    // A single clean minibatch sees the whole dataset with the weights left by
    // the previous epoch, so its loss is that epoch's clean loss.
    let reuse_batch_loss = dropout_rate == 0.0 && n <= cfg.batch_size;
    for epoch in 1..=epochs {
        order.shuffle(rng);
        for batch in order.chunks(cfg.batch_size) {
            let x = data.gather(batch);
            let refs: Vec<&DenseLayer> = layers.iter().collect();
            let noise = (dropout_rate > 0.0).then_some((dropout_rate, &mut *rng));
            let tape = forward_train(&refs, x.clone(), noise);
            let (loss, grads) = backward(&refs, &tape, x.view());
            check_loss(loss, epoch)?;
            if reuse_batch_loss && epoch > 1 {
                trace.push(loss);
            }
            optimizer.apply(layers, &grads);
        }
        if !reuse_batch_loss || epoch == epochs {
            trace.push(check_loss(clean_loss(layers), epoch)?);
        }
    }
    Ok(trace)
}

/// Outcome of fitting one denoising autoencoder.
#[derive(Debug, Clone)]
pub struct PretrainedLayer {
    pub encoder: DenseLayer,
    pub decoder: DenseLayer,
    /// Clean activations of the trained encoder half on the layer's input.
    pub next: Array2<f64>,
    pub loss_trace: Vec<f64>,
}

/// Fits the denoising autoencoder formed by encoder layer `layer` and its
/// mirrored decoder layer on `inputs` (the previous layer's clean
/// activations). Inputs and hidden units are corrupted with dropout during
/// training; the returned activations are computed without it.
pub fn pretrain_layer(
    model: &AutoencoderModel,
    inputs: &dyn RowSource,
    layer: usize,
    cfg: &TrainConfig,
) -> Result<PretrainedLayer> {
    cfg.validate()?;
    let depth = model.encoder().len();
    if layer >= depth {
        return Err(Error::InvalidConfig(format!(
            "layer {layer} out of range for {depth} layers"
        )));
    }
    let enc = &model.encoder()[layer];
    if inputs.n_cols() != enc.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "pretraining input",
            expected: enc.in_dim(),
            found: inputs.n_cols(),
        });
    }
    let mut pair = vec![enc.clone(), model.decoder()[depth - 1 - layer].clone()];
    let mut rng = rng_from_seed(derive_seed(cfg.seed, &format!("pretrain/{layer}")));
    let loss_trace = train_stack(
        &mut pair,
        inputs,
        cfg.effective_pretrain_epochs(),
        cfg,
        cfg.dropout_rate,
        &mut rng,
    )?;
    let decoder = pair.pop().expect("pair");
    let encoder = pair.pop().expect("pair");
    let next = forward_all(&[&encoder], inputs);
    Ok(PretrainedLayer {
        encoder,
        decoder,
        next,
        loss_trace,
    })
}

/// Greedy layer-wise pretraining: layer `i` is fitted on the clean outputs of
/// the already-trained layers `0..i`, and its weights are copied into the
/// model's encoder layer `i` and the mirrored decoder layer. Returns each
/// layer's loss trace.
pub fn greedy_pretrain(model: &mut AutoencoderModel, x: &dyn RowSource, cfg: &TrainConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let depth = model.encoder().len();
    let mut traces = Vec::with_capacity(depth);
    let mut hidden: Option<Array2<f64>> = None;
    for layer in 0..depth {
        let fitted = match &hidden {
            None => pretrain_layer(model, x, layer, cfg)?,
            Some(h) => pretrain_layer(model, h, layer, cfg)?,
        };
        let (enc, dec) = model.layers_mut();
        enc[layer] = fitted.encoder;
        dec[depth - 1 - layer] = fitted.decoder;
        traces.push(fitted.loss_trace);
        hidden = Some(fitted.next);
    }
    Ok(traces)
}

/// End-to-end fine-tuning of the whole stack on the reconstruction loss,
/// without dropout. Returns the loss before training followed by the loss
/// after each epoch.
pub fn fine_tune(model: &mut AutoencoderModel, x: &dyn RowSource, cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if x.n_cols() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "fine-tuning input",
            expected: model.input_dim(),
            found: x.n_cols(),
        });
    }
    let depth = model.encoder().len();
    let mut layers: Vec<DenseLayer> = model.stack().into_iter().cloned().collect();
    let mut rng = rng_from_seed(derive_seed(cfg.seed, "finetune"));
    let trace = train_stack(&mut layers, x, cfg.epochs, cfg, 0.0, &mut rng)?;
    let decoder = layers.split_off(depth);
    *model = AutoencoderModel::from_layers(layers, decoder)?;
    Ok(trace)
}
