//! Binary model checkpoints.
//!
//! Layout, all integers and floats little endian:
//!
//! ```text
//! magic        8 bytes  "DFCMAE\0\0"
//! version      u32      CHECKPOINT_VERSION
//! input_dim    u64      D_x
//! code_dim     u64      p
//! n_encoder    u32      number of encoder layers (the decoder has as many)
//! per layer, encoder first then decoder:
//!   in_dim     u64
//!   out_dim    u64
//!   activation u8       0 = linear, 1 = relu
//! per layer, same order:
//!   weights    out_dim × in_dim f64, row-major
//!   bias       out_dim f64
//! ```
//!
//! A JSON sidecar ([`CheckpointMeta`]) records the training configuration and
//! final loss.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, AutoencoderModel, DenseLayer, TrainConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"DFCMAE\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub train_config: TrainConfig,
    pub final_loss: Option<f64>,
}

fn format_error(message: impl Into<String>) -> Error {
    Error::InvalidConfig(format!("checkpoint: {}", message.into()))
}

pub fn write_checkpoint<W: Write>(model: &AutoencoderModel, mut out: W) -> std::io::Result<()> {
    let layers = model.stack();
    out.write_all(&CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(model.input_dim() as u64).to_le_bytes())?;
    out.write_all(&(model.code_dim() as u64).to_le_bytes())?;
    out.write_all(&(model.encoder().len() as u32).to_le_bytes())?;
    for layer in &layers {
        out.write_all(&(layer.in_dim() as u64).to_le_bytes())?;
        out.write_all(&(layer.out_dim() as u64).to_le_bytes())?;
        let act: u8 = match layer.activation {
            Activation::Linear => 0,
            Activation::Relu => 1,
        };
        out.write_all(&[act])?;
    }
    for layer in &layers {
        for v in layer.weights.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
        for v in layer.bias.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| format_error(format!("truncated file ({e})")))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(u64::from_le_bytes(self.bytes()?)).map_err(|_| format_error("dimension overflow"))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| Ok(f64::from_le_bytes(self.bytes()?))).collect()
    }
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<AutoencoderModel> {
    let mut r = Reader { inner: input };
    if r.bytes::<8>()? != CHECKPOINT_MAGIC {
        return Err(format_error("bad magic"));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format_error(format!("unsupported version {version}")));
    }
    let input_dim = r.usize()?;
    let code_dim = r.usize()?;
    let n_encoder = r.u32()? as usize;
    let mut specs = Vec::with_capacity(2 * n_encoder);
    for _ in 0..2 * n_encoder {
        let in_dim = r.usize()?;
        let out_dim = r.usize()?;
        let activation = match r.bytes::<1>()?[0] {
            0 => Activation::Linear,
            1 => Activation::Relu,
            other => return Err(format_error(format!("unknown activation tag {other}"))),
        };
        specs.push((in_dim, out_dim, activation));
    }
    let mut layers = Vec::with_capacity(specs.len());
    for (in_dim, out_dim, activation) in specs {
        let len = in_dim
            .checked_mul(out_dim)
            .ok_or_else(|| format_error("dimension overflow"))?;
        let weights =
            Array2::from_shape_vec((out_dim, in_dim), r.f64s(len)?).map_err(|e| format_error(e.to_string()))?;
        let bias = Array1::from(r.f64s(out_dim)?);
        layers.push(DenseLayer {
            weights,
            bias,
            activation,
        });
    }
    let mut trailing = [0u8; 1];
    if r.inner.read(&mut trailing).map_err(|e| format_error(e.to_string()))? != 0 {
        return Err(format_error("trailing bytes"));
    }
    let decoder = layers.split_off(n_encoder);
    let model = AutoencoderModel::from_layers(layers, decoder)?;
    if model.input_dim() != input_dim || model.code_dim() != code_dim {
        return Err(format_error("header dimensions disagree with layers"));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::build_autoencoder_with_hidden;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn round_trip_is_bit_exact(d in 1usize..9, h in 1usize..7, p in 1usize..4, seed in any::<u64>()) {
            let mut model = build_autoencoder_with_hidden(d, &[h], p, seed).unwrap();
            // include awkward values
            model.layers_mut().1[0].bias[0] = -0.0;
            model.layers_mut().0[0].weights[[0, 0]] = f64::MIN_POSITIVE / 3.0;
            let mut buf = Vec::new();
            write_checkpoint(&model, &mut buf).unwrap();
            let back = read_checkpoint(&buf[..]).unwrap();
            let bits = |m: &AutoencoderModel| -> Vec<u64> {
                m.stack().iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).map(|v| v.to_bits()).collect::<Vec<_>>()).collect()
            };
            prop_assert_eq!(bits(&back), bits(&model));
            prop_assert_eq!(back, model);
        }
    }

    #[test]
    fn rejects_corruption() {
        let model = build_autoencoder_with_hidden(3, &[2], 1, 0).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_checkpoint(&extra[..]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&bad[..]).is_err());
    }
}
