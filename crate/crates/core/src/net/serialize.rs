//! Binary model format.
//!
//! ```text
//! "DSEG" | u16 version | u8 variant | u32 num_classes | u32 in_channels | u32 layer_count
//! per layer: u8 type, then
//!   0 conv       u32 in, out, kernel, dilation, stride | u8 padding | tensor weight | tensor bias
//!   1 relu
//!   2 maxpool    u32 window, stride
//!   3 transposed u32 stride, crop | tensor weight
//!   4 bilinear   u32 factor
//! tensor: u8 rank | u32 extent × rank | f32 × product(extents)
//! ```
//!
//! All integers and floats are little-endian. Parameters are stored as
//! 32-bit floats, so a saved network reloads with every parameter rounded
//! to the nearest `f32`; saving the reloaded network reproduces the file
//! byte for byte.

use std::path::Path;

use crate::error::{Error, ModelError, Result};
use crate::ops::{ConvSpec, Padding, PoolSpec};
use crate::tensor::Tensor;

use super::{Layer, Network, Variant};

pub const MODEL_MAGIC: [u8; 4] = *b"DSEG";
pub const MODEL_VERSION: u16 = 1;

const CONV: u8 = 0;
const RELU: u8 = 1;
const MAXPOOL: u8 = 2;
const TRANSPOSED: u8 = 3;
const BILINEAR: u8 = 4;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn tensor(&mut self, t: &Tensor) {
        self.u8(t.rank() as u8);
        for &e in t.shape() {
            self.u32(e);
        }
        for &v in t.values() {
            self.0.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
}

pub fn encode_model(net: &Network) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(&MODEL_MAGIC);
    w.0.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    w.u8(match net.variant {
        Variant::StandardFcn => 0,
        Variant::DilatedFcn => 1,
    });
    w.u32(net.num_classes);
    w.u32(net.in_channels);
    w.u32(net.layers.len());
    for layer in &net.layers {
        match layer {
            Layer::Conv { spec, weight, bias } => {
                w.u8(CONV);
                for v in [
                    spec.in_channels,
                    spec.out_channels,
                    spec.kernel_size,
                    spec.dilation,
                    spec.stride,
                ] {
                    w.u32(v);
                }
                w.u8(match spec.padding {
                    Padding::ZeroSame => 0,
                    Padding::Valid => 1,
                });
                w.tensor(weight);
                w.tensor(bias);
            }
            Layer::Relu => w.u8(RELU),
            Layer::MaxPool(p) => {
                w.u8(MAXPOOL);
                w.u32(p.window);
                w.u32(p.stride);
            }
            Layer::TransposedConv { stride, crop, weight } => {
                w.u8(TRANSPOSED);
                w.u32(*stride);
                w.u32(*crop);
                w.tensor(weight);
            }
            Layer::BilinearUpsample { factor } => {
                w.u8(BILINEAR);
                w.u32(*factor);
            }
        }
    }
    w.0
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(ModelError::Truncated(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, ModelError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &'static str) -> Result<usize, ModelError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn tensor(&mut self, what: &'static str) -> Result<Tensor, ModelError> {
        let rank = self.u8(what)? as usize;
        let shape = (0..rank).map(|_| self.u32(what)).collect::<Result<Vec<_>, _>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &e| acc.checked_mul(e))
            .ok_or_else(|| ModelError::Corrupt(format!("tensor extents {shape:?} overflow")))?;
        let bytes = self.take(count.checked_mul(4).ok_or(ModelError::Truncated(what))?, what)?;
        let values = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        Tensor::from_values(&shape, values).map_err(|e| ModelError::Corrupt(e.to_string()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MODEL_MAGIC {
        return Err(ModelError::BadMagic([magic[0], magic[1], magic[2], magic[3]]).into());
    }
    let v = r.take(2, "version")?;
    let version = u16::from_le_bytes([v[0], v[1]]);
    if version != MODEL_VERSION {
        return Err(ModelError::Version(version).into());
    }
    let variant = match r.u8("variant")? {
        0 => Variant::StandardFcn,
        1 => Variant::DilatedFcn,
        other => return Err(ModelError::Corrupt(format!("unknown variant byte {other}")).into()),
    };
    let num_classes = r.u32("header")?;
    let in_channels = r.u32("header")?;
    let count = r.u32("header")?;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let layer = match r.u8("layer type")? {
            CONV => {
                let mut f = [0usize; 5];
                for v in &mut f {
                    *v = r.u32("conv descriptor")?;
                }
                let padding = match r.u8("conv descriptor")? {
                    0 => Padding::ZeroSame,
                    1 => Padding::Valid,
                    other => return Err(ModelError::Corrupt(format!("unknown padding byte {other}")).into()),
                };
                let spec = ConvSpec {
                    in_channels: f[0],
                    out_channels: f[1],
                    kernel_size: f[2],
                    dilation: f[3],
                    stride: f[4],
                    padding,
                };
                Layer::Conv {
                    spec,
                    weight: r.tensor("conv weight")?,
                    bias: r.tensor("conv bias")?,
                }
            }
            RELU => Layer::Relu,
            MAXPOOL => Layer::MaxPool(PoolSpec::new(r.u32("pool descriptor")?, r.u32("pool descriptor")?)),
            TRANSPOSED => {
                let stride = r.u32("transposed descriptor")?;
                let crop = r.u32("transposed descriptor")?;
                let weight = r.tensor("transposed weight")?;
                if weight.rank() != 4 {
                    return Err(ModelError::Corrupt("transposed weight must be rank 4".into()).into());
                }
                Layer::TransposedConv { stride, crop, weight }
            }
            BILINEAR => Layer::BilinearUpsample {
                factor: r.u32("bilinear descriptor")?,
            },
            other => return Err(ModelError::Corrupt(format!("unknown layer type {other}")).into()),
        };
        layers.push(layer);
    }
    if r.pos != bytes.len() {
        return Err(ModelError::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)).into());
    }
    Network::new(variant, num_classes, in_channels, layers)
        .map_err(|e| ModelError::Corrupt(e.to_string()).into())
}

/// Writes via a temporary sibling file and a rename, so readers never see a
/// partially written model.
pub fn save_model(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    crate::data::write_atomic(path.as_ref(), &encode_model(net))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
