//! Transposed (fractionally strided) convolution and fixed bilinear upsampling.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Kernel layout is `[C_in, C_out, M, M]`. Each input pixel `(c, i, j)`
/// stamps `input(c,i,j)·kernel(c,o,·,·)` onto the output window starting at
/// `(i·s, j·s)`, giving an output of extent `(H-1)·s + M`.
pub fn transposed_conv2d(input: &Tensor, kernel: &Tensor, stride: usize) -> Result<Tensor> {
    let (ci, h, w, co, k) = transposed_geometry(input, kernel, stride)?;
    let (ho, wo) = ((h - 1) * stride + k, (w - 1) * stride + k);
    let x = input.values();
    let kv = kernel.values();
    let mut out = vec![0.0; co * ho * wo];
    for c in 0..ci {
        for i in 0..h {
            for j in 0..w {
                let v = x[(c * h + i) * w + j];
                if v == 0.0 {
                    continue;
                }
                for o in 0..co {
                    let kbase = (c * co + o) * k * k;
                    for m in 0..k {
                        let dst = (o * ho + i * stride + m) * wo + j * stride;
                        let krow = &kv[kbase + m * k..kbase + (m + 1) * k];
                        for (d, kk) in out[dst..dst + k].iter_mut().zip(krow) {
                            *d += v * kk;
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![co, ho, wo], out))
}

#[derive(Debug, Clone)]
pub struct TransposedGrads {
    pub input: Tensor,
    pub kernel: Tensor,
}

pub fn transposed_conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    stride: usize,
    grad_out: &Tensor,
) -> Result<TransposedGrads> {
    let (ci, h, w, co, k) = transposed_geometry(input, kernel, stride)?;
    let (ho, wo) = ((h - 1) * stride + k, (w - 1) * stride + k);
    if grad_out.shape() != [co, ho, wo] {
        return Err(Error::Shape(format!(
            "grad_out shape {:?}, forward output is {:?}",
            grad_out.shape(),
            [co, ho, wo]
        )));
    }
    let x = input.values();
    let kv = kernel.values();
    let g = grad_out.values();
    let mut gi = vec![0.0; x.len()];
    let mut gk = vec![0.0; kv.len()];
    for c in 0..ci {
        for i in 0..h {
            for j in 0..w {
                let v = x[(c * h + i) * w + j];
                let mut acc = 0.0;
                for o in 0..co {
                    let kbase = (c * co + o) * k * k;
                    for m in 0..k {
                        let src = (o * ho + i * stride + m) * wo + j * stride;
                        let grow = &g[src..src + k];
                        let krow = kbase + m * k;
                        for (n, gg) in grow.iter().enumerate() {
                            acc += gg * kv[krow + n];
                            gk[krow + n] += gg * v;
                        }
                    }
                }
                gi[(c * h + i) * w + j] = acc;
            }
        }
    }
    Ok(TransposedGrads {
        input: Tensor::from_parts(vec![ci, h, w], gi),
        kernel: Tensor::from_parts(kernel.shape().to_vec(), gk),
    })
}

fn transposed_geometry(
    input: &Tensor,
    kernel: &Tensor,
    stride: usize,
) -> Result<(usize, usize, usize, usize, usize)> {
    if stride == 0 {
        return Err(Error::Parameter("stride must be >= 1".into()));
    }
    let (ci, h, w) = input.chw()?;
    let &[kc, co, kh, kw] = kernel.shape() else {
        return Err(Error::Shape(format!(
            "transposed kernel must be [C_in, C_out, M, M], got {:?}",
            kernel.shape()
        )));
    };
    if kc != ci || kh != kw {
        return Err(Error::Shape(format!(
            "kernel {:?} incompatible with input {:?}",
            kernel.shape(),
            input.shape()
        )));
    }
    Ok((ci, h, w, co, kh))
}

/// Extracts the `[C, height, width]` window at `(top, left)`.
pub fn crop_spatial(input: &Tensor, top: usize, left: usize, height: usize, width: usize) -> Result<Tensor> {
    let (c, h, w) = input.chw()?;
    if top + height > h || left + width > w || height == 0 || width == 0 {
        return Err(Error::Shape(format!(
            "crop {height}x{width} at ({top},{left}) exceeds {h}x{w}"
        )));
    }
    let x = input.values();
    let mut out = Vec::with_capacity(c * height * width);
    for ch in 0..c {
        for i in 0..height {
            let src = (ch * h + top + i) * w + left;
            out.extend_from_slice(&x[src..src + width]);
        }
    }
    Ok(Tensor::from_parts(vec![c, height, width], out))
}

/// Adjoint of [`crop_spatial`]: embeds `grad` into a zero `[C, height, width]` field.
pub fn crop_spatial_backward(grad: &Tensor, top: usize, left: usize, height: usize, width: usize) -> Result<Tensor> {
    let (c, gh, gw) = grad.chw()?;
    if top + gh > height || left + gw > width {
        return Err(Error::Shape(format!(
            "{gh}x{gw} at ({top},{left}) does not fit in {height}x{width}"
        )));
    }
    let mut out = vec![0.0; c * height * width];
    for ch in 0..c {
        for i in 0..gh {
            let dst = (ch * height + top + i) * width + left;
            out[dst..dst + gw].copy_from_slice(&grad.values()[(ch * gh + i) * gw..(ch * gh + i + 1) * gw]);
        }
    }
    Ok(Tensor::from_parts(vec![c, height, width], out))
}

/// Side length of the bilinear kernel for an integer upsampling factor.
pub fn bilinear_kernel_size(factor: usize) -> usize {
    2 * factor - factor % 2
}

/// Separable bilinear interpolation weights, `[size, size]`.
pub fn bilinear_kernel(factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::Parameter("upsampling factor must be >= 1".into()));
    }
    let size = bilinear_kernel_size(factor);
    let center = if size % 2 == 1 {
        (factor - 1) as f64
    } else {
        factor as f64 - 0.5
    };
    let axis: Vec<f64> = (0..size)
        .map(|t| 1.0 - (t as f64 - center).abs() / factor as f64)
        .collect();
    let mut values = Vec::with_capacity(size * size);
    for a in &axis {
        for b in &axis {
            values.push(a * b);
        }
    }
    Tensor::from_values(&[size, size], values)
}

/// Per-channel `[C, C, K, K]` transposed-conv kernel holding bilinear weights
/// on the diagonal; the usual initialization of a learnable upsampling head.
pub fn bilinear_transposed_kernel(channels: usize, factor: usize) -> Result<Tensor> {
    let base = bilinear_kernel(factor)?;
    let k = base.shape()[0];
    let mut kernel = Tensor::zeros(&[channels, channels, k, k])?;
    for c in 0..channels {
        let off = (c * channels + c) * k * k;
        kernel.values_mut()[off..off + k * k].copy_from_slice(base.values());
    }
    Ok(kernel)
}

/// Crop applied after a stride-`factor` bilinear transposed convolution so
/// that `H` input rows map onto exactly `H·factor` output rows.
pub fn bilinear_crop(factor: usize) -> usize {
    factor / 2
}

/// Fixed (non-learnable) bilinear upsampling by an integer factor with the
/// align-corners = false convention.
///
/// Computed as a per-channel transposed convolution with the bilinear
/// kernel, cropped to `H·factor × W·factor`, then divided by the same
/// operation applied to a field of ones. The divisor is exactly 1 away from
/// the border; at the border it renormalizes the missing taps, which matches
/// edge-clamped interpolation.
pub fn bilinear_upsample(input: &Tensor, factor: usize) -> Result<Tensor> {
    let (c, h, w) = input.chw()?;
    let plan = BilinearPlan::new(h, w, factor)?;
    let mut out = Vec::with_capacity(c * plan.ho * plan.wo);
    for ch in 0..c {
        let plane = Tensor::from_parts(vec![1, h, w], input.values()[ch * h * w..(ch + 1) * h * w].to_vec());
        let up = plan.stamp(&plane)?;
        out.extend(up.values().iter().zip(&plan.coverage).map(|(v, cov)| v / cov));
    }
    Ok(Tensor::from_parts(vec![c, plan.ho, plan.wo], out))
}

pub fn bilinear_upsample_backward(grad_out: &Tensor, factor: usize) -> Result<Tensor> {
    let (c, ho, wo) = grad_out.chw()?;
    if factor == 0 || ho % factor != 0 || wo % factor != 0 {
        return Err(Error::Shape(format!(
            "gradient {ho}x{wo} is not an upsampling by {factor}"
        )));
    }
    let (h, w) = (ho / factor, wo / factor);
    let plan = BilinearPlan::new(h, w, factor)?;
    let mut out = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        let g: Vec<f64> = grad_out.values()[ch * ho * wo..(ch + 1) * ho * wo]
            .iter()
            .zip(&plan.coverage)
            .map(|(g, cov)| g / cov)
            .collect();
        let g = Tensor::from_parts(vec![1, ho, wo], g);
        let raw = crop_spatial_backward(&g, plan.crop, plan.crop, plan.raw_h, plan.raw_w)?;
        let plane = Tensor::from_parts(vec![1, h, w], vec![0.0; h * w]);
        let grads = transposed_conv2d_backward(&plane, &plan.kernel, factor, &raw)?;
        out.extend_from_slice(grads.input.values());
    }
    Ok(Tensor::from_parts(vec![c, h, w], out))
}

struct BilinearPlan {
    kernel: Tensor,
    factor: usize,
    crop: usize,
    raw_h: usize,
    raw_w: usize,
    ho: usize,
    wo: usize,
    coverage: Vec<f64>,
}

impl BilinearPlan {
    fn new(h: usize, w: usize, factor: usize) -> Result<Self> {
        let kernel = bilinear_transposed_kernel(1, factor)?;
        let k = bilinear_kernel_size(factor);
        let mut plan = Self {
            kernel,
            factor,
            crop: bilinear_crop(factor),
            raw_h: (h - 1) * factor + k,
            raw_w: (w - 1) * factor + k,
            ho: h * factor,
            wo: w * factor,
            coverage: Vec::new(),
        };
        let ones = Tensor::from_parts(vec![1, h, w], vec![1.0; h * w]);
        plan.coverage = plan.stamp(&ones)?.into_values();
        Ok(plan)
    }

    fn stamp(&self, plane: &Tensor) -> Result<Tensor> {
        let raw = transposed_conv2d(plane, &self.kernel, self.factor)?;
        crop_spatial(&raw, self.crop, self.crop, self.ho, self.wo)
    }
}
