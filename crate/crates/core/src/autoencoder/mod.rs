//! Deep autoencoder with mirrored encoder/decoder stacks, trained by greedy
//! layer-wise denoising pretraining followed by end-to-end fine-tuning.
//!
//! Weight matrices are stored `out × in`; batches are `n × features` with one
//! example per row.

mod checkpoint;
mod network;
mod train;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::textprep::DocTermMatrix;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use network::{backprop_gradients, denoising_forward, dropout, dropout_with_mask, Gradients, LayerGradient};
pub use train::{fine_tune, greedy_pretrain, pretrain_layer, Optimizer, PretrainedLayer, TrainConfig};

/// Hidden layer widths of the encoder, input side first.
pub const DEFAULT_HIDDEN: [usize; 3] = [500, 500, 2000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        if self == Activation::Relu {
            z.mapv_inplace(|v| v.max(0.0));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Fully connected layer `g(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out_dim × in_dim`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng>(spec: LayerSpec, rng: &mut R) -> Self {
        let limit = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((spec.out_dim, spec.in_dim), || rng.random_range(-limit..limit));
        DenseLayer {
            weights,
            bias: Array1::zeros(spec.out_dim),
            activation: spec.activation,
        }
    }

    pub fn zeros(spec: LayerSpec) -> Self {
        DenseLayer {
            weights: Array2::zeros((spec.out_dim, spec.in_dim)),
            bias: Array1::zeros(spec.out_dim),
            activation: spec.activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn spec(&self) -> LayerSpec {
        LayerSpec {
            in_dim: self.in_dim(),
            out_dim: self.out_dim(),
            activation: self.activation,
        }
    }

    /// Batch forward pass, `n × in` → `n × out`.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t()) + &self.bias;
        self.activation.apply(&mut z);
        z
    }

    pub fn forward_one(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let mut z = self.weights.dot(&x) + &self.bias;
        if self.activation == Activation::Relu {
            z.mapv_inplace(|v| v.max(0.0));
        }
        z
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Rows of a training matrix, densified on demand one minibatch at a time.
pub trait RowSource {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    /// Dense `rows.len() × n_cols` copy of the given rows, in order.
    fn gather(&self, rows: &[usize]) -> Array2<f64>;
}

impl RowSource for DocTermMatrix {
    fn n_rows(&self) -> usize {
        self.n_docs()
    }

    fn n_cols(&self) -> usize {
        self.n_terms()
    }

    fn gather(&self, rows: &[usize]) -> Array2<f64> {
        self.dense_rows(rows)
    }
}

impl RowSource for Array2<f64> {
    fn n_rows(&self) -> usize {
        self.nrows()
    }

    fn n_cols(&self) -> usize {
        self.ncols()
    }

    fn gather(&self, rows: &[usize]) -> Array2<f64> {
        self.select(ndarray::Axis(0), rows)
    }
}

impl RowSource for ArrayView2<'_, f64> {
    fn n_rows(&self) -> usize {
        self.nrows()
    }

    fn n_cols(&self) -> usize {
        self.ncols()
    }

    fn gather(&self, rows: &[usize]) -> Array2<f64> {
        self.select(ndarray::Axis(0), rows)
    }
}

/// Rows processed at once when pushing a whole data set through the network.
const INFERENCE_CHUNK: usize = 1024;

/// Runs `layers` over every row of `data` without dropout.
pub(crate) fn forward_all(layers: &[&DenseLayer], data: &dyn RowSource) -> Array2<f64> {
    let out_dim = layers.last().map_or(data.n_cols(), |l| l.out_dim());
    let n = data.n_rows();
    let mut out = Array2::zeros((n, out_dim));
    let all: Vec<usize> = (0..n).collect();
    for (chunk_idx, chunk) in all.chunks(INFERENCE_CHUNK).enumerate() {
        let mut h = data.gather(chunk);
        for layer in layers {
            h = layer.forward(h.view());
        }
        let start = chunk_idx * INFERENCE_CHUNK;
        out.slice_mut(ndarray::s![start..start + chunk.len(), ..]).assign(&h);
    }
    out
}

/// Encoder stack `D_x → h₁ → … → p` and its mirror `p → … → h₁ → D_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    encoder: Vec<DenseLayer>,
    decoder: Vec<DenseLayer>,
}

impl AutoencoderModel {
    /// Assembles a model, checking that the layer dimensions chain and that
    /// the decoder mirrors the encoder.
    pub fn from_layers(encoder: Vec<DenseLayer>, decoder: Vec<DenseLayer>) -> Result<Self> {
        if encoder.is_empty() || encoder.len() != decoder.len() {
            return Err(Error::InvalidConfig(format!(
                "encoder has {} layers, decoder has {}",
                encoder.len(),
                decoder.len()
            )));
        }
        let model = AutoencoderModel { encoder, decoder };
        let stack: Vec<&DenseLayer> = model.encoder.iter().chain(&model.decoder).collect();
        for pair in stack.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::DimensionMismatch {
                    context: "layer chain",
                    expected: pair[0].out_dim(),
                    found: pair[1].in_dim(),
                });
            }
        }
        for layer in &stack {
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::DimensionMismatch {
                    context: "bias length",
                    expected: layer.out_dim(),
                    found: layer.bias.len(),
                });
            }
        }
        let enc = model.layer_dims();
        let mut dec: Vec<usize> = model.decoder.iter().map(DenseLayer::in_dim).collect();
        dec.push(model.output_dim());
        dec.reverse();
        if enc != dec {
            return Err(Error::InvalidConfig(format!(
                "decoder dims {dec:?} do not mirror encoder dims {enc:?}"
            )));
        }
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].in_dim()
    }

    pub fn code_dim(&self) -> usize {
        self.encoder.last().expect("nonempty").out_dim()
    }

    fn output_dim(&self) -> usize {
        self.decoder.last().expect("nonempty").out_dim()
    }

    /// Encoder widths from input to code, e.g. `[D_x, 500, 500, 2000, p]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.encoder.iter().map(DenseLayer::in_dim).collect();
        dims.push(self.code_dim());
        dims
    }

    pub fn encoder(&self) -> &[DenseLayer] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[DenseLayer] {
        &self.decoder
    }

    /// Mutable access to the layers. Shapes must be preserved.
    pub fn layers_mut(&mut self) -> (&mut [DenseLayer], &mut [DenseLayer]) {
        (&mut self.encoder, &mut self.decoder)
    }

    /// Encoder and decoder layers as one stack, input to reconstruction.
    pub fn stack(&self) -> Vec<&DenseLayer> {
        self.encoder.iter().chain(&self.decoder).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.stack().iter().all(|l| l.is_finite())
    }

    /// Maps `n × D_x` inputs to `n × p` codes.
    pub fn encode(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.encode_rows(&x)
    }

    /// [`AutoencoderModel::encode`] over any row source (e.g. a sparse matrix).
    pub fn encode_rows(&self, x: &dyn RowSource) -> Result<Array2<f64>> {
        if x.n_cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "encoder input",
                expected: self.input_dim(),
                found: x.n_cols(),
            });
        }
        let layers: Vec<&DenseLayer> = self.encoder.iter().collect();
        Ok(forward_all(&layers, x))
    }

    /// Maps `c × p` codes back to `c × D_x`. The output is not rectified.
    pub fn decode(&self, codes: ArrayView2<f64>) -> Result<Array2<f64>> {
        if codes.ncols() != self.code_dim() {
            return Err(Error::DimensionMismatch {
                context: "decoder input",
                expected: self.code_dim(),
                found: codes.ncols(),
            });
        }
        let layers: Vec<&DenseLayer> = self.decoder.iter().collect();
        Ok(forward_all(&layers, &codes))
    }

    /// Mean over rows of the squared reconstruction error `‖x − decode(encode(x))‖²`.
    pub fn reconstruction_loss(&self, x: &dyn RowSource) -> Result<f64> {
        if x.n_cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "encoder input",
                expected: self.input_dim(),
                found: x.n_cols(),
            });
        }
        Ok(network::dataset_loss(&self.stack(), x))
    }
}

fn layer_specs(dims: &[usize]) -> (Vec<LayerSpec>, Vec<LayerSpec>) {
    let last = dims.len() - 2;
    let encoder = dims
        .windows(2)
        .enumerate()
        .map(|(i, w)| LayerSpec {
            in_dim: w[0],
            out_dim: w[1],
            activation: if i == last {
                Activation::Linear
            } else {
                Activation::Relu
            },
        })
        .collect();
    let reversed: Vec<usize> = dims.iter().rev().copied().collect();
    let decoder = reversed
        .windows(2)
        .enumerate()
        .map(|(i, w)| LayerSpec {
            in_dim: w[0],
            out_dim: w[1],
            activation: if i == last {
                Activation::Linear
            } else {
                Activation::Relu
            },
        })
        .collect();
    (encoder, decoder)
}

/// Builds the default `D_x → 500 → 500 → 2000 → p` autoencoder and its mirror.
pub fn build_autoencoder(input_dim: usize, code_dim: usize, seed: u64) -> Result<AutoencoderModel> {
    build_autoencoder_with_hidden(input_dim, &DEFAULT_HIDDEN, code_dim, seed)
}

/// Builds an autoencoder with custom hidden widths. Hidden layers use relu;
/// the code layer and the reconstruction layer are linear. Encoder layers are
/// initialized first, then decoder layers, all from one seeded stream.
pub fn build_autoencoder_with_hidden(
    input_dim: usize,
    hidden: &[usize],
    code_dim: usize,
    seed: u64,
) -> Result<AutoencoderModel> {
    let mut dims = vec![input_dim];
    dims.extend_from_slice(hidden);
    dims.push(code_dim);
    if dims.contains(&0) {
        return Err(Error::InvalidConfig(format!("layer widths must be positive: {dims:?}")));
    }
    let (enc_specs, dec_specs) = layer_specs(&dims);
    let mut rng = rng_from_seed(seed);
    let encoder = enc_specs.into_iter().map(|s| DenseLayer::glorot(s, &mut rng)).collect();
    let decoder = dec_specs.into_iter().map(|s| DenseLayer::glorot(s, &mut rng)).collect();
    AutoencoderModel::from_layers(encoder, decoder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn default_architecture() {
        let model = build_autoencoder(100, 5, 1).unwrap();
        let enc: Vec<(usize, usize)> = model.encoder().iter().map(|l| (l.in_dim(), l.out_dim())).collect();
        assert_eq!(enc, vec![(100, 500), (500, 500), (500, 2000), (2000, 5)]);
        let dec: Vec<(usize, usize)> = model.decoder().iter().map(|l| (l.in_dim(), l.out_dim())).collect();
        assert_eq!(dec, vec![(5, 2000), (2000, 500), (500, 500), (500, 100)]);
        let acts: Vec<Activation> = model.stack().iter().map(|l| l.activation).collect();
        use Activation::*;
        assert_eq!(acts, vec![Relu, Relu, Relu, Linear, Relu, Relu, Relu, Linear]);
        assert_eq!(model.layer_dims(), vec![100, 500, 500, 2000, 5]);
    }

    #[test]
    fn tiny_input_still_builds_full_stack() {
        let model = build_autoencoder(1, 1, 0).unwrap();
        assert_eq!(model.layer_dims(), vec![1, 500, 500, 2000, 1]);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = build_autoencoder_with_hidden(7, &[5], 3, 9).unwrap();
        let b = build_autoencoder_with_hidden(7, &[5], 3, 9).unwrap();
        let c = build_autoencoder_with_hidden(7, &[5], 3, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let limit = (6.0f64 / 12.0).sqrt();
        assert!(a.encoder()[0].weights.iter().all(|w| w.abs() <= limit));
        assert!(a.stack().iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn encode_decode_shapes_and_errors() {
        let model = build_autoencoder_with_hidden(6, &[4], 2, 3).unwrap();
        let x = Array2::from_shape_fn((5, 6), |(i, j)| (i + j) as f64 * 0.1);
        let codes = model.encode(x.view()).unwrap();
        assert_eq!(codes.dim(), (5, 2));
        assert_eq!(model.decode(codes.view()).unwrap().dim(), (5, 6));
        assert!(matches!(
            model.encode(Array2::zeros((2, 5)).view()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            model.decode(Array2::zeros((2, 3)).view()),
            Err(Error::DimensionMismatch { .. })
        ));
        // a single row encodes exactly like its batch counterpart
        let single = model.encode(x.slice(ndarray::s![2..3, ..])).unwrap();
        assert_eq!(single.row(0), codes.row(2));
    }

    #[test]
    fn zero_weights() {
        let mut model = build_autoencoder_with_hidden(4, &[3], 2, 3).unwrap();
        let (enc, dec) = model.layers_mut();
        for l in enc.iter_mut() {
            l.weights.fill(0.0);
        }
        for l in dec.iter_mut() {
            l.weights.fill(0.0);
        }
        dec[1].bias = array![1.0, -2.0, 3.0, 0.5];
        let codes = model.encode(Array2::ones((3, 4)).view()).unwrap();
        assert!(codes.iter().all(|&v| v == 0.0));
        let out = model.decode(array![[1.0, 2.0], [3.0, -1.0]].view()).unwrap();
        for row in out.rows() {
            assert_eq!(row.to_vec(), vec![1.0, -2.0, 3.0, 0.5]);
        }
    }

    #[test]
    fn rejects_broken_mirror() {
        let model = build_autoencoder_with_hidden(4, &[3], 2, 3).unwrap();
        let mut dec = model.decoder().to_vec();
        dec.reverse();
        assert!(AutoencoderModel::from_layers(model.encoder().to_vec(), dec).is_err());
    }
}
