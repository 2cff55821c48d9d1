use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Passes gradient where the forward input was strictly positive; the
/// subgradient at zero is taken as 0.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    input.require_same_shape(grad_out)?;
    let values = input
        .values()
        .iter()
        .zip(grad_out.values())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_values(input.shape(), values)
}

/// Softmax over the channel axis of `[C, H, W]`, independently per pixel.
pub fn softmax_pixelwise(logits: &Tensor) -> Result<Tensor> {
    let (c, h, w) = logits.chw()?;
    if c < 2 {
        return Err(Error::Shape(format!("softmax needs >= 2 channels, got {c}")));
    }
    let plane = h * w;
    let x = logits.values();
    let mut out = vec![0.0; x.len()];
    for p in 0..plane {
        let max = (0..c).map(|k| x[k * plane + p]).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for k in 0..c {
            let e = (x[k * plane + p] - max).exp();
            out[k * plane + p] = e;
            total += e;
        }
        for k in 0..c {
            out[k * plane + p] /= total;
        }
    }
    Ok(Tensor::from_parts(vec![c, h, w], out))
}

/// Per-pixel argmax over channels of `[C, H, W]`; the lowest index wins ties.
pub fn argmax_channels(logits: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = logits.chw()?;
    let plane = h * w;
    let x = logits.values();
    Ok((0..plane)
        .map(|p| {
            let mut best = 0;
            for k in 1..c {
                if x[k * plane + p] > x[best * plane + p] {
                    best = k;
                }
            }
            best as u8
        })
        .collect())
}
