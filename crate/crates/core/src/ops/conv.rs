//! r-dilated 2D convolution.
//!
//! Output position `(i, j)` of channel `o` reads input taps at
//! `(i·s + r·m, j·s + r·n)` for `m, n ∈ [-(M/2) ..= M/2]`, i.e. a
//! cross-correlation with the plus-sign index convention. Out-of-range taps
//! read as zero under [`Padding::ZeroSame`].
//!
//! Two backends compute the same function: [`ConvBackend::Direct`] is the
//! nested-loop reference, [`ConvBackend::Lowered`] gathers patches into a
//! column matrix and runs a single GEMM. They agree to rounding, not bitwise.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Padding {
    /// Zero padding; with stride 1 the output keeps the input extent.
    ZeroSame,
    /// Only positions where the whole dilated window fits.
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvBackend {
    #[default]
    Direct,
    Lowered,
}

impl std::str::FromStr for ConvBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "lowered" => Ok(Self::Lowered),
            other => Err(Error::Parameter(format!(
                "unknown convolution backend {other:?} (expected direct or lowered)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub dilation: usize,
    pub stride: usize,
    pub padding: Padding,
}

impl ConvSpec {
    /// Square zero-same convolution with stride 1.
    pub fn new(in_channels: usize, out_channels: usize, kernel_size: usize, dilation: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_size,
            dilation,
            stride: 1,
            padding: Padding::ZeroSame,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::UnsupportedKernel(format!(
                "kernel size must be odd, got {}",
                self.kernel_size
            )));
        }
        if self.dilation == 0 || self.stride == 0 {
            return Err(Error::Parameter(format!(
                "dilation and stride must be >= 1, got r={} s={}",
                self.dilation, self.stride
            )));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Parameter("channel counts must be positive".into()));
        }
        Ok(())
    }

    pub fn half(&self) -> usize {
        self.kernel_size / 2
    }

    /// Input extent covered by one output pixel along each axis: `(M-1)·r + 1`.
    pub fn receptive_span(&self) -> usize {
        (self.kernel_size - 1) * self.dilation + 1
    }

    pub fn kernel_shape(&self) -> [usize; 4] {
        [
            self.out_channels,
            self.in_channels,
            self.kernel_size,
            self.kernel_size,
        ]
    }

    /// Trainable parameters: kernel taps plus one bias per output channel.
    /// Independent of the dilation factor.
    pub fn parameter_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_size * self.kernel_size
            + self.out_channels
    }

    pub fn output_extent(&self, extent: usize) -> Result<usize> {
        match self.padding {
            Padding::ZeroSame => Ok(extent.div_ceil(self.stride)),
            Padding::Valid => {
                let span = self.receptive_span();
                if extent < span {
                    return Err(Error::Shape(format!(
                        "valid convolution needs extent >= {span}, got {extent}"
                    )));
                }
                Ok((extent - span) / self.stride + 1)
            }
        }
    }

    /// Input coordinate of tap index `m` (0-based) for output coordinate `i`.
    #[inline]
    fn tap(&self, i: usize, m: usize) -> isize {
        let origin = match self.padding {
            Padding::ZeroSame => 0,
            Padding::Valid => (self.half() * self.dilation) as isize,
        };
        (i * self.stride) as isize + origin + (self.dilation as isize) * (m as isize - self.half() as isize)
    }
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernel: Tensor,
    pub bias: Tensor,
}

struct Geometry {
    ci: usize,
    h: usize,
    w: usize,
    co: usize,
    k: usize,
    ho: usize,
    wo: usize,
}

fn geometry(input: &Tensor, kernel: &Tensor, spec: &ConvSpec) -> Result<Geometry> {
    spec.validate()?;
    let (ci, h, w) = input.chw()?;
    if ci != spec.in_channels {
        return Err(Error::Shape(format!(
            "input has {ci} channels, spec expects {}",
            spec.in_channels
        )));
    }
    if kernel.shape() != spec.kernel_shape() {
        return Err(Error::Shape(format!(
            "kernel shape {:?} does not match spec {:?}",
            kernel.shape(),
            spec.kernel_shape()
        )));
    }
    Ok(Geometry {
        ci,
        h,
        w,
        co: spec.out_channels,
        k: spec.kernel_size,
        ho: spec.output_extent(h)?,
        wo: spec.output_extent(w)?,
    })
}

#[inline]
fn in_range(v: isize, extent: usize) -> Option<usize> {
    (v >= 0 && (v as usize) < extent).then_some(v as usize)
}

pub fn dilated_conv2d_forward(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    spec: &ConvSpec,
) -> Result<Tensor> {
    dilated_conv2d_forward_with(input, kernel, bias, spec, ConvBackend::Direct)
}

pub fn dilated_conv2d_forward_with(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    spec: &ConvSpec,
    backend: ConvBackend,
) -> Result<Tensor> {
    let g = geometry(input, kernel, spec)?;
    if bias.shape() != [g.co] {
        return Err(Error::Shape(format!(
            "bias shape {:?}, expected [{}]",
            bias.shape(),
            g.co
        )));
    }
    let out = match backend {
        ConvBackend::Direct => forward_direct(input.values(), kernel.values(), bias.values(), spec, &g),
        ConvBackend::Lowered => forward_lowered(input.values(), kernel.values(), bias.values(), spec, &g),
    };
    Ok(Tensor::from_parts(vec![g.co, g.ho, g.wo], out))
}

fn forward_direct(x: &[f64], k: &[f64], b: &[f64], spec: &ConvSpec, g: &Geometry) -> Vec<f64> {
    let mut out = vec![0.0; g.co * g.ho * g.wo];
    for o in 0..g.co {
        for i in 0..g.ho {
            for j in 0..g.wo {
                let mut acc = 0.0;
                for c in 0..g.ci {
                    for m in 0..g.k {
                        let Some(y) = in_range(spec.tap(i, m), g.h) else {
                            continue;
                        };
                        let row = (c * g.h + y) * g.w;
                        let krow = ((o * g.ci + c) * g.k + m) * g.k;
                        for n in 0..g.k {
                            let Some(xx) = in_range(spec.tap(j, n), g.w) else {
                                continue;
                            };
                            acc += x[row + xx] * k[krow + n];
                        }
                    }
                }
                out[(o * g.ho + i) * g.wo + j] = acc + b[o];
            }
        }
    }
    out
}

/// Gathers dilated patches into a `[ci·k·k, ho·wo]` column matrix.
fn im2col(x: &[f64], spec: &ConvSpec, g: &Geometry) -> Vec<f64> {
    let cols_w = g.ho * g.wo;
    let mut cols = vec![0.0; g.ci * g.k * g.k * cols_w];
    for c in 0..g.ci {
        for m in 0..g.k {
            for n in 0..g.k {
                let row = ((c * g.k + m) * g.k + n) * cols_w;
                for i in 0..g.ho {
                    let Some(y) = in_range(spec.tap(i, m), g.h) else {
                        continue;
                    };
                    let src = (c * g.h + y) * g.w;
                    let dst = row + i * g.wo;
                    for j in 0..g.wo {
                        if let Some(xx) = in_range(spec.tap(j, n), g.w) {
                            cols[dst + j] = x[src + xx];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-adds a column matrix back onto the input grid (adjoint of `im2col`).
fn col2im(cols: &[f64], spec: &ConvSpec, g: &Geometry) -> Vec<f64> {
    let cols_w = g.ho * g.wo;
    let mut x = vec![0.0; g.ci * g.h * g.w];
    for c in 0..g.ci {
        for m in 0..g.k {
            for n in 0..g.k {
                let row = ((c * g.k + m) * g.k + n) * cols_w;
                for i in 0..g.ho {
                    let Some(y) = in_range(spec.tap(i, m), g.h) else {
                        continue;
                    };
                    let dst = (c * g.h + y) * g.w;
                    let src = row + i * g.wo;
                    for j in 0..g.wo {
                        if let Some(xx) = in_range(spec.tap(j, n), g.w) {
                            x[dst + xx] += cols[src + j];
                        }
                    }
                }
            }
        }
    }
    x
}

/// `c = a·b` with `a: m×k`, `b: k×n`, row-major; transposes expressed via strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    c: &mut [f64],
) {
    let (rsa, csa) = if a_transposed { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_transposed { (1, k as isize) } else { (n as isize, 1) };
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: slice lengths cover every index reachable from the given
    // dimensions and strides, checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn forward_lowered(x: &[f64], k: &[f64], b: &[f64], spec: &ConvSpec, g: &Geometry) -> Vec<f64> {
    let cols = im2col(x, spec, g);
    let p = g.ho * g.wo;
    let mut out = vec![0.0; g.co * p];
    gemm(g.co, g.ci * g.k * g.k, p, k, false, &cols, false, &mut out);
    for (o, plane) in out.chunks_mut(p).enumerate() {
        for v in plane {
            *v += b[o];
        }
    }
    out
}

pub fn dilated_conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    spec: &ConvSpec,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    dilated_conv2d_backward_with(input, kernel, spec, grad_out, ConvBackend::Direct)
}

pub fn dilated_conv2d_backward_with(
    input: &Tensor,
    kernel: &Tensor,
    spec: &ConvSpec,
    grad_out: &Tensor,
    backend: ConvBackend,
) -> Result<ConvGrads> {
    let g = geometry(input, kernel, spec)?;
    if grad_out.shape() != [g.co, g.ho, g.wo] {
        return Err(Error::Shape(format!(
            "grad_out shape {:?}, forward output is {:?}",
            grad_out.shape(),
            [g.co, g.ho, g.wo]
        )));
    }
    let (gi, gk) = match backend {
        ConvBackend::Direct => backward_direct(input.values(), kernel.values(), grad_out.values(), spec, &g),
        ConvBackend::Lowered => backward_lowered(input.values(), kernel.values(), grad_out.values(), spec, &g),
    };
    let p = g.ho * g.wo;
    let gb = grad_out
        .values()
        .chunks(p)
        .map(|plane| plane.iter().sum())
        .collect();
    Ok(ConvGrads {
        input: Tensor::from_parts(vec![g.ci, g.h, g.w], gi),
        kernel: Tensor::from_parts(spec.kernel_shape().to_vec(), gk),
        bias: Tensor::from_parts(vec![g.co], gb),
    })
}

fn backward_direct(
    x: &[f64],
    k: &[f64],
    go: &[f64],
    spec: &ConvSpec,
    g: &Geometry,
) -> (Vec<f64>, Vec<f64>) {
    let mut gi = vec![0.0; x.len()];
    let mut gk = vec![0.0; k.len()];
    for o in 0..g.co {
        for i in 0..g.ho {
            for j in 0..g.wo {
                let d = go[(o * g.ho + i) * g.wo + j];
                for c in 0..g.ci {
                    for m in 0..g.k {
                        let Some(y) = in_range(spec.tap(i, m), g.h) else {
                            continue;
                        };
                        let row = (c * g.h + y) * g.w;
                        let krow = ((o * g.ci + c) * g.k + m) * g.k;
                        for n in 0..g.k {
                            let Some(xx) = in_range(spec.tap(j, n), g.w) else {
                                continue;
                            };
                            gi[row + xx] += d * k[krow + n];
                            gk[krow + n] += d * x[row + xx];
                        }
                    }
                }
            }
        }
    }
    (gi, gk)
}

fn backward_lowered(
    x: &[f64],
    k: &[f64],
    go: &[f64],
    spec: &ConvSpec,
    g: &Geometry,
) -> (Vec<f64>, Vec<f64>) {
    let cols = im2col(x, spec, g);
    let p = g.ho * g.wo;
    let rows = g.ci * g.k * g.k;
    let mut gk = vec![0.0; g.co * rows];
    gemm(g.co, p, rows, go, false, &cols, true, &mut gk);
    let mut gcols = vec![0.0; rows * p];
    gemm(rows, g.co, p, k, true, go, false, &mut gcols);
    (col2im(&gcols, spec, g), gk)
}

/// Spreads the taps of a `[..., M, M]` kernel `r` apart, filling the gaps
/// with zeros. The result has spatial extent `(M-1)·r + 1`.
pub fn upsample_kernel(kernel: &Tensor, dilation: usize) -> Result<Tensor> {
    if dilation == 0 {
        return Err(Error::Parameter("dilation must be >= 1".into()));
    }
    let shape = kernel.shape();
    if shape.len() < 2 {
        return Err(Error::Shape(format!(
            "kernel must have rank >= 2, got {shape:?}"
        )));
    }
    let (kh, kw) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    let (uh, uw) = ((kh - 1) * dilation + 1, (kw - 1) * dilation + 1);
    let planes = kernel.len() / (kh * kw);
    let mut out = vec![0.0; planes * uh * uw];
    for p in 0..planes {
        for m in 0..kh {
            for n in 0..kw {
                out[(p * uh + m * dilation) * uw + n * dilation] =
                    kernel.values()[(p * kh + m) * kw + n];
            }
        }
    }
    let mut out_shape = shape.to_vec();
    let rank = out_shape.len();
    out_shape[rank - 2] = uh;
    out_shape[rank - 1] = uw;
    Ok(Tensor::from_parts(out_shape, out))
}
