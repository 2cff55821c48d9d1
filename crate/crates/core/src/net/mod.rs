//! The two comparison architectures and their forward/backward passes.
//!
//! * `standard-fcn`: three conv+pool blocks (output stride 8), one more conv,
//!   a 1×1 classifier and a learnable ×8 transposed-convolution head.
//! * `dilated-fcn`: one conv+pool block (output stride 2), then convolutions
//!   with dilation 1, 2 and 4 at that resolution, a 1×1 classifier and a
//!   fixed ×2 bilinear upsampling.

mod serialize;

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::labels::LabelMap;
use crate::ops::{self, ArgmaxIndices, ConvBackend, ConvSpec, PoolSpec};
use crate::tensor::Tensor;

pub use serialize::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};

/// Spatial extents fed to either network must be multiples of this.
pub const INPUT_MULTIPLE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    StandardFcn,
    DilatedFcn,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::StandardFcn => "standard-fcn",
            Variant::DilatedFcn => "dilated-fcn",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard-fcn" | "standard" => Ok(Variant::StandardFcn),
            "dilated-fcn" | "dilated" => Ok(Variant::DilatedFcn),
            other => Err(Error::Parameter(format!("unknown network variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv {
        spec: ConvSpec,
        weight: Tensor,
        bias: Tensor,
    },
    Relu,
    MaxPool(PoolSpec),
    /// Learnable upsampling; `weight` is `[C_in, C_out, K, K]`. The raw
    /// output is cropped by `crop` on the top/left to `H·stride × W·stride`.
    TransposedConv {
        stride: usize,
        crop: usize,
        weight: Tensor,
    },
    /// Fixed bilinear upsampling, no parameters.
    BilinearUpsample { factor: usize },
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv { .. } => "conv",
            Layer::Relu => "relu",
            Layer::MaxPool(_) => "maxpool",
            Layer::TransposedConv { .. } => "transposed-conv",
            Layer::BilinearUpsample { .. } => "bilinear-upsample",
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Layer::Conv { weight, bias, .. } => weight.len() + bias.len(),
            Layer::TransposedConv { weight, .. } => weight.len(),
            _ => 0,
        }
    }

    fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv { weight, bias, .. } => vec![weight, bias],
            Layer::TransposedConv { weight, .. } => vec![weight],
            _ => Vec::new(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv { weight, bias, .. } => vec![weight, bias],
            Layer::TransposedConv { weight, .. } => vec![weight],
            _ => Vec::new(),
        }
    }

    /// Channel count produced from `channels` input channels.
    fn output_channels(&self, channels: usize) -> Result<usize> {
        match self {
            Layer::Conv { spec, .. } => {
                if spec.in_channels != channels {
                    return Err(Error::Shape(format!(
                        "conv expects {} channels, receives {channels}",
                        spec.in_channels
                    )));
                }
                Ok(spec.out_channels)
            }
            Layer::TransposedConv { weight, .. } => {
                if weight.shape()[0] != channels {
                    return Err(Error::Shape(format!(
                        "transposed conv expects {} channels, receives {channels}",
                        weight.shape()[0]
                    )));
                }
                Ok(weight.shape()[1])
            }
            _ => Ok(channels),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    variant: Variant,
    num_classes: usize,
    in_channels: usize,
    layers: Vec<Layer>,
    backend: ConvBackend,
}

/// Activations kept from a forward pass for the matching backward pass.
pub struct Trace {
    inputs: Vec<Tensor>,
    pool_indices: Vec<Option<ArgmaxIndices>>,
}

struct Init {
    rng: Xoshiro256PlusPlus,
}

impl Init {
    fn conv(&mut self, in_channels: usize, out_channels: usize, kernel_size: usize, dilation: usize) -> Layer {
        let spec = ConvSpec::new(in_channels, out_channels, kernel_size, dilation);
        let fan_in = (in_channels * kernel_size * kernel_size) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
        let n = out_channels * in_channels * kernel_size * kernel_size;
        let values = (0..n).map(|_| normal.sample(&mut self.rng)).collect();
        Layer::Conv {
            weight: Tensor::from_parts(spec.kernel_shape().to_vec(), values),
            bias: Tensor::from_parts(vec![out_channels], vec![0.0; out_channels]),
            spec,
        }
    }
}

fn check_builder_args(num_classes: usize, base_channels: usize) -> Result<()> {
    if base_channels < 4 {
        return Err(Error::Parameter(format!(
            "base_channels must be >= 4, got {base_channels}"
        )));
    }
    if num_classes < 2 || num_classes > u8::MAX as usize {
        return Err(Error::Parameter(format!(
            "num_classes must be in 2..=255, got {num_classes}"
        )));
    }
    Ok(())
}

pub const IMAGE_CHANNELS: usize = 3;

pub fn build_standard_fcn(num_classes: usize, base_channels: usize, seed: u64) -> Result<Network> {
    check_builder_args(num_classes, base_channels)?;
    let c = base_channels;
    let mut init = Init {
        rng: Xoshiro256PlusPlus::seed_from_u64(seed),
    };
    let pool = Layer::MaxPool(PoolSpec::new(2, 2));
    let layers = vec![
        init.conv(IMAGE_CHANNELS, c, 3, 1),
        Layer::Relu,
        pool.clone(),
        init.conv(c, 2 * c, 3, 1),
        Layer::Relu,
        pool.clone(),
        init.conv(2 * c, 4 * c, 3, 1),
        Layer::Relu,
        pool,
        init.conv(4 * c, 4 * c, 3, 1),
        Layer::Relu,
        init.conv(4 * c, num_classes, 1, 1),
        Layer::TransposedConv {
            stride: 8,
            crop: ops::bilinear_crop(8),
            weight: ops::bilinear_transposed_kernel(num_classes, 8)?,
        },
    ];
    Network::new(Variant::StandardFcn, num_classes, IMAGE_CHANNELS, layers)
}

pub fn build_dilated_fcn(num_classes: usize, base_channels: usize, seed: u64) -> Result<Network> {
    check_builder_args(num_classes, base_channels)?;
    let c = base_channels;
    let mut init = Init {
        rng: Xoshiro256PlusPlus::seed_from_u64(seed),
    };
    let layers = vec![
        init.conv(IMAGE_CHANNELS, c, 3, 1),
        Layer::Relu,
        Layer::MaxPool(PoolSpec::new(2, 2)),
        init.conv(c, 2 * c, 3, 1),
        Layer::Relu,
        init.conv(2 * c, 4 * c, 3, 2),
        Layer::Relu,
        init.conv(4 * c, 4 * c, 3, 4),
        Layer::Relu,
        init.conv(4 * c, num_classes, 1, 1),
        Layer::BilinearUpsample { factor: 2 },
    ];
    Network::new(Variant::DilatedFcn, num_classes, IMAGE_CHANNELS, layers)
}

pub fn build(variant: Variant, num_classes: usize, base_channels: usize, seed: u64) -> Result<Network> {
    match variant {
        Variant::StandardFcn => build_standard_fcn(num_classes, base_channels, seed),
        Variant::DilatedFcn => build_dilated_fcn(num_classes, base_channels, seed),
    }
}

impl Network {
    pub fn new(variant: Variant, num_classes: usize, in_channels: usize, layers: Vec<Layer>) -> Result<Self> {
        let net = Self {
            variant,
            num_classes,
            in_channels,
            layers,
            backend: ConvBackend::Direct,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        let mut channels = self.in_channels;
        for layer in &self.layers {
            channels = layer.output_channels(channels)?;
            if let Layer::Conv { spec, weight, bias } = layer {
                spec.validate()?;
                if weight.shape() != spec.kernel_shape() || bias.shape() != [spec.out_channels] {
                    return Err(Error::Shape("conv parameters do not match their spec".into()));
                }
            }
            if let Layer::MaxPool(p) = layer {
                p.validate()?;
            }
            if let Layer::TransposedConv { stride, crop, weight } = layer {
                let k = weight.shape()[2];
                if *stride == 0 || weight.shape()[3] != k || k < *stride || 2 * crop != k - stride {
                    return Err(Error::Shape(format!(
                        "transposed conv kernel {k}, stride {stride}, crop {crop} cannot map H to H*stride"
                    )));
                }
            }
            if let Layer::BilinearUpsample { factor: 0 } = layer {
                return Err(Error::Parameter("upsampling factor must be >= 1".into()));
            }
        }
        if channels != self.num_classes {
            return Err(Error::Shape(format!(
                "network produces {channels} channels, expected {} classes",
                self.num_classes
            )));
        }
        let (down, up) = self.scale_factors();
        if down != up {
            return Err(Error::Shape(format!(
                "network downsamples by {down} but upsamples by {up}"
            )));
        }
        Ok(())
    }

    fn scale_factors(&self) -> (usize, usize) {
        self.layers.iter().fold((1, 1), |(down, up), l| match l {
            Layer::MaxPool(p) => (down * p.stride, up),
            Layer::Conv { spec, .. } => (down * spec.stride, up),
            Layer::TransposedConv { stride, .. } => (down, up * stride),
            Layer::BilinearUpsample { factor } => (down, up * factor),
            Layer::Relu => (down, up),
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Downsampling factor of the feature map entering the upsampling head.
    pub fn output_stride(&self) -> usize {
        self.scale_factors().0
    }

    pub fn backend(&self) -> ConvBackend {
        self.backend
    }

    pub fn set_backend(&mut self, backend: ConvBackend) {
        self.backend = backend;
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Layer::parameter_count).sum()
    }

    /// Receptive field (per axis, in input pixels) of one activation after
    /// the first `depth` layers.
    pub fn receptive_field(&self, depth: usize) -> usize {
        let mut field = 1;
        let mut jump = 1;
        for layer in self.layers.iter().take(depth) {
            match layer {
                Layer::Conv { spec, .. } => {
                    field += (spec.receptive_span() - 1) * jump;
                    jump *= spec.stride;
                }
                Layer::MaxPool(p) => {
                    field += (p.window - 1) * jump;
                    jump *= p.stride;
                }
                _ => {}
            }
        }
        field
    }

    fn check_image(&self, image: &Tensor) -> Result<()> {
        let (c, h, w) = image.chw()?;
        if c != self.in_channels {
            return Err(Error::Shape(format!(
                "network expects {} input channels, got {c}",
                self.in_channels
            )));
        }
        if h % INPUT_MULTIPLE != 0 || w % INPUT_MULTIPLE != 0 {
            let pad = |e: usize| e.div_ceil(INPUT_MULTIPLE) * INPUT_MULTIPLE;
            let crop = |e: usize| (e / INPUT_MULTIPLE) * INPUT_MULTIPLE;
            return Err(Error::Shape(format!(
                "spatial extent {h}x{w} must be divisible by {INPUT_MULTIPLE}: pad to {}x{} or crop to {}x{}",
                pad(h),
                pad(w),
                crop(h),
                crop(w)
            )));
        }
        Ok(())
    }

    /// Logits `[B, num_classes, H, W]` for a `[B, C, H, W]` batch.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        if batch.rank() != 4 {
            return Err(Error::Shape(format!(
                "expected [B,C,H,W], got {:?}",
                batch.shape()
            )));
        }
        let outputs = batch
            .unstack()?
            .iter()
            .map(|img| self.forward_image(img))
            .collect::<Result<Vec<_>>>()?;
        Tensor::stack(&outputs)
    }

    pub fn forward_image(&self, image: &Tensor) -> Result<Tensor> {
        self.check_image(image)?;
        let mut x = image.clone();
        for layer in &self.layers {
            x = self.layer_forward(layer, &x)?.0;
        }
        Ok(x)
    }

    pub fn forward_traced(&self, image: &Tensor) -> Result<(Tensor, Trace)> {
        self.check_image(image)?;
        let mut trace = Trace {
            inputs: Vec::with_capacity(self.layers.len()),
            pool_indices: Vec::with_capacity(self.layers.len()),
        };
        let mut x = image.clone();
        for layer in &self.layers {
            let (y, idx) = self.layer_forward(layer, &x)?;
            trace.inputs.push(x);
            trace.pool_indices.push(idx);
            x = y;
        }
        Ok((x, trace))
    }

    fn layer_forward(&self, layer: &Layer, x: &Tensor) -> Result<(Tensor, Option<ArgmaxIndices>)> {
        Ok(match layer {
            Layer::Conv { spec, weight, bias } => (
                ops::dilated_conv2d_forward_with(x, weight, bias, spec, self.backend)?,
                None,
            ),
            Layer::Relu => (ops::relu(x), None),
            Layer::MaxPool(p) => {
                let (y, idx) = ops::maxpool2d(x, p)?;
                (y, Some(idx))
            }
            Layer::TransposedConv { stride, crop, weight } => {
                let (_, h, w) = x.chw()?;
                let raw = ops::transposed_conv2d(x, weight, *stride)?;
                (ops::crop_spatial(&raw, *crop, *crop, h * stride, w * stride)?, None)
            }
            Layer::BilinearUpsample { factor } => (ops::bilinear_upsample(x, *factor)?, None),
        })
    }

    /// Parameter gradients, in [`Network::params`] order, for the loss whose
    /// gradient with respect to the logits is `grad_logits`.
    pub fn backward(&self, trace: &Trace, grad_logits: &Tensor) -> Result<Vec<Tensor>> {
        let mut grads: Vec<Vec<Tensor>> = Vec::with_capacity(self.layers.len());
        let mut g = grad_logits.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &trace.inputs[i];
            match layer {
                Layer::Conv { spec, weight, .. } => {
                    let cg = ops::dilated_conv2d_backward_with(x, weight, spec, &g, self.backend)?;
                    grads.push(vec![cg.kernel, cg.bias]);
                    g = cg.input;
                }
                Layer::Relu => g = ops::relu_backward(x, &g)?,
                Layer::MaxPool(_) => {
                    let idx = trace.pool_indices[i]
                        .as_ref()
                        .ok_or_else(|| Error::Shape("trace lacks pooling indices".into()))?;
                    g = ops::maxpool2d_backward(idx, &g)?;
                }
                Layer::TransposedConv { stride, crop, weight } => {
                    let (_, h, w) = x.chw()?;
                    let k = weight.shape()[2];
                    let (rh, rw) = ((h - 1) * stride + k, (w - 1) * stride + k);
                    let raw = ops::crop_spatial_backward(&g, *crop, *crop, rh, rw)?;
                    let tg = ops::transposed_conv2d_backward(x, weight, *stride, &raw)?;
                    grads.push(vec![tg.kernel]);
                    g = tg.input;
                }
                Layer::BilinearUpsample { factor } => g = ops::bilinear_upsample_backward(&g, *factor)?,
            }
        }
        Ok(grads.into_iter().rev().flatten().collect())
    }

    /// Softmax cross-entropy loss of one image and the parameter gradients.
    pub fn loss_and_gradients(&self, image: &Tensor, labels: &LabelMap) -> Result<(f64, Vec<Tensor>)> {
        let (logits, trace) = self.forward_traced(image)?;
        let probs = ops::softmax_pixelwise(&logits)?;
        let (loss, grad) = ops::cross_entropy_loss(&probs, labels, None)?;
        Ok((loss, self.backward(&trace, &grad)?))
    }

    pub fn loss(&self, image: &Tensor, labels: &LabelMap) -> Result<f64> {
        let probs = ops::softmax_pixelwise(&self.forward_image(image)?)?;
        Ok(ops::cross_entropy_loss(&probs, labels, None)?.0)
    }

    /// Per-pixel argmax prediction; the lowest class index wins ties.
    pub fn predict(&self, image: &Tensor) -> Result<LabelMap> {
        let logits = self.forward_image(image)?;
        let (_, h, w) = logits.chw()?;
        LabelMap::with_classes(h, w, ops::argmax_channels(&logits)?, self.num_classes)
    }
}
