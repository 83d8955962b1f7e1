//! Forward pass with optional dropout, and exact backpropagation of the
//! squared reconstruction loss.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::{Activation, AutoencoderModel, DenseLayer, RowSource, INFERENCE_CHUNK};

/// Inverted dropout: each coordinate is zeroed with probability `rate`, the
/// survivors are scaled by `1 / (1 − rate)`. `rate = 0` is the identity.
pub fn dropout<R: Rng>(x: ArrayView1<f64>, rate: f64, rng: &mut R) -> Array1<f64> {
    if rate == 0.0 {
        return x.to_owned();
    }
    let keep: Vec<bool> = (0..x.len()).map(|_| rng.random::<f64>() >= rate).collect();
    dropout_with_mask(x, &keep, rate)
}

/// Inverted dropout with an explicit keep mask.
pub fn dropout_with_mask(x: ArrayView1<f64>, keep: &[bool], rate: f64) -> Array1<f64> {
    let scale = 1.0 / (1.0 - rate);
    x.iter()
        .zip(keep)
        .map(|(&v, &k)| if k { v * scale } else { 0.0 })
        .collect()
}

/// Scaled keep mask (`0` or `1 / (1 − rate)` per entry) for a batch.
fn batch_mask<R: Rng>(shape: (usize, usize), rate: f64, rng: &mut R) -> Array2<f64> {
    let scale = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn(shape, || if rng.random::<f64>() >= rate { scale } else { 0.0 })
}

/// One denoising autoencoder pass on a single example: corrupt the input,
/// encode, corrupt the hidden code, decode. Returns `(h, y)` where `h` is the
/// uncorrupted hidden activation.
pub fn denoising_forward<R: Rng>(
    x: ArrayView1<f64>,
    encoder: &DenseLayer,
    decoder: &DenseLayer,
    rate: f64,
    rng: &mut R,
) -> (Array1<f64>, Array1<f64>) {
    let x_noisy = dropout(x, rate, rng);
    let h = encoder.forward_one(x_noisy.view());
    let h_noisy = dropout(h.view(), rate, rng);
    let y = decoder.forward_one(h_noisy.view());
    (h, y)
}

/// Activations recorded during a training forward pass.
pub(crate) struct Tape {
    /// Input seen by each layer, after dropout.
    inputs: Vec<Array2<f64>>,
    /// Scaled dropout mask applied to each layer's input, if any.
    masks: Vec<Option<Array2<f64>>>,
    /// Output of each layer.
    outputs: Vec<Array2<f64>>,
}

impl Tape {
    pub(crate) fn prediction(&self) -> &Array2<f64> {
        self.outputs.last().expect("at least one layer")
    }
}

/// Forward pass through `layers`. When `dropout` is given, every layer input
/// is corrupted with inverted dropout at that rate.
pub(crate) fn forward_train<R: Rng>(
    layers: &[&DenseLayer],
    x: Array2<f64>,
    mut dropout: Option<(f64, &mut R)>,
) -> Tape {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut masks = Vec::with_capacity(layers.len());
    let mut outputs: Vec<Array2<f64>> = Vec::with_capacity(layers.len());
    let mut current = x;
    for layer in layers {
        let mask = match dropout.as_mut() {
            Some((rate, rng)) if *rate > 0.0 => Some(batch_mask(current.dim(), *rate, *rng)),
            _ => None,
        };
        if let Some(m) = &mask {
            current *= m;
        }
        let out = layer.forward(current.view());
        inputs.push(current);
        masks.push(mask);
        current = out.clone();
        outputs.push(out);
    }
    Tape { inputs, masks, outputs }
}

/// Gradient of the loss with respect to one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Squared-error loss `Σ_n ‖y_n − t_n‖² / n` and its gradient for every layer.
pub(crate) fn backward(layers: &[&DenseLayer], tape: &Tape, target: ArrayView2<f64>) -> (f64, Vec<LayerGradient>) {
    let n = target.nrows() as f64;
    let residual = tape.prediction() - &target;
    let loss = residual.iter().map(|r| r * r).sum::<f64>() / n;
    let mut delta = residual * (2.0 / n);
    let mut grads = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate().rev() {
        if layer.activation == Activation::Relu {
            delta.zip_mut_with(&tape.outputs[l], |d, &out| {
                if out <= 0.0 {
                    *d = 0.0;
                }
            });
        }
        let weights = delta.t().dot(&tape.inputs[l]);
        let bias = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut upstream = delta.dot(&layer.weights);
            if let Some(mask) = &tape.masks[l] {
                upstream *= mask;
            }
            delta = upstream;
        }
        grads.push(LayerGradient { weights, bias });
    }
    grads.reverse();
    (loss, grads)
}

/// Gradients of the end-to-end reconstruction loss for the whole model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: Vec<LayerGradient>,
    pub decoder: Vec<LayerGradient>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(|g| g.weights.iter().chain(g.bias.iter()))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Exact gradients of `Σ_n ‖x_n − decode(encode(x_n))‖² / n` over `batch`,
/// without dropout. Returns the loss alongside.
pub fn backprop_gradients(model: &AutoencoderModel, batch: ArrayView2<f64>) -> (f64, Gradients) {
    let layers = model.stack();
    let tape = forward_train::<rand_chacha::ChaCha8Rng>(&layers, batch.to_owned(), None);
    let (loss, mut grads) = backward(&layers, &tape, batch);
    let decoder = grads.split_off(model.encoder().len());
    (
        loss,
        Gradients {
            encoder: grads,
            decoder,
        },
    )
}

/// Clean (dropout-free) loss of `layers` reconstructing `data`.
pub(crate) fn dataset_loss(layers: &[&DenseLayer], data: &dyn RowSource) -> f64 {
    let n = data.n_rows();
    let all: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for chunk in all.chunks(INFERENCE_CHUNK) {
        let x = data.gather(chunk);
        let mut h = x.clone();
        for layer in layers {
            h = layer.forward(h.view());
        }
        total += (&h - &x).iter().map(|r| r * r).sum::<f64>();
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{build_autoencoder_with_hidden, LayerSpec};
    use crate::seed::rng_from_seed;
    use ndarray::array;

    #[test]
    fn dropout_fixed_mask() {
        let x = array![1.0, 1.0];
        assert_eq!(dropout_with_mask(x.view(), &[false, true], 0.5), array![0.0, 2.0]);
    }

    #[test]
    fn zero_rate_is_identity() {
        let mut rng = rng_from_seed(1);
        let enc = DenseLayer::glorot(
            LayerSpec {
                in_dim: 3,
                out_dim: 4,
                activation: Activation::Relu,
            },
            &mut rng,
        );
        let dec = DenseLayer::glorot(
            LayerSpec {
                in_dim: 4,
                out_dim: 3,
                activation: Activation::Linear,
            },
            &mut rng,
        );
        let x = array![0.3, -1.0, 2.0];
        let (h, y) = denoising_forward(x.view(), &enc, &dec, 0.0, &mut rng);
        let h_ref = enc.forward_one(x.view());
        assert_eq!(h, h_ref);
        assert_eq!(y, dec.forward_one(h_ref.view()));
    }

    #[test]
    fn linear_zero_weights_give_bias() {
        let mut rng = rng_from_seed(1);
        let enc = DenseLayer::zeros(LayerSpec {
            in_dim: 2,
            out_dim: 2,
            activation: Activation::Linear,
        });
        let mut dec = DenseLayer::zeros(LayerSpec {
            in_dim: 2,
            out_dim: 3,
            activation: Activation::Linear,
        });
        dec.bias = array![0.5, -1.0, 2.0];
        let (_, y) = denoising_forward(array![4.0, 5.0].view(), &enc, &dec, 0.3, &mut rng);
        assert_eq!(y, dec.bias);
    }

    #[test]
    fn dropout_is_unbiased() {
        let mut rng = rng_from_seed(99);
        let x = array![1.0, -2.0, 0.5, 3.0];
        let trials = 100_000;
        let mut mean = Array1::<f64>::zeros(4);
        for _ in 0..trials {
            mean += &dropout(x.view(), 0.2, &mut rng);
        }
        mean /= trials as f64;
        for (m, v) in mean.iter().zip(x.iter()) {
            assert!((m - v).abs() <= 0.01 * v.abs(), "{m} vs {v}");
        }
    }

    #[test]
    fn linear_layer_closed_form_gradient() {
        // Single linear layer without bias effects: loss = Σ‖Wx − x‖² / n,
        // gradient = 2 (W X − X) Xᵀ / n in column-example notation.
        let w = array![[0.5, -0.2, 0.1], [0.3, 0.9, -0.4], [0.0, 0.2, 1.1]];
        let layer = DenseLayer {
            weights: w.clone(),
            bias: Array1::zeros(3),
            activation: Activation::Linear,
        };
        let x = array![[1.0, 2.0, -1.0], [0.5, 0.0, 3.0], [-2.0, 1.0, 1.0], [0.2, 0.3, 0.4]];
        let tape = forward_train::<rand_chacha::ChaCha8Rng>(&[&layer], x.clone(), None);
        let (_, grads) = backward(&[&layer], &tape, x.view());
        let n = x.nrows() as f64;
        let xc = x.t();
        let expected = (w.dot(&xc) - xc).dot(&xc.t()) * (2.0 / n);
        assert!((&grads[0].weights - &expected).iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn memorized_point_has_zero_gradient() {
        // Identity-like net: linear layers whose composition reproduces x exactly.
        let mut model = build_autoencoder_with_hidden(3, &[3], 3, 0).unwrap();
        let (enc, dec) = model.layers_mut();
        for l in enc.iter_mut().chain(dec.iter_mut()) {
            l.weights = Array2::eye(3);
            l.bias.fill(0.0);
        }
        // relu layers pass positive inputs unchanged
        let batch = Array2::from_shape_fn((8, 3), |(_, j)| 1.0 + j as f64);
        let (loss, grads) = backprop_gradients(&model, batch.view());
        assert_eq!(loss, 0.0);
        assert!(grads.norm() < 1e-8);
    }
}
