use crate::error::{Error, Result};
use crate::labels::LabelMap;
use crate::tensor::Tensor;

/// Mean pixelwise cross-entropy of softmax probabilities against `labels`.
///
/// Returns the loss and its gradient with respect to the logits that
/// produced `probs`, `(probs - onehot) / count`. Pixels labelled `ignore`
/// contribute neither to the loss nor to the count.
pub fn cross_entropy_loss(
    probs: &Tensor,
    labels: &LabelMap,
    ignore: Option<u8>,
) -> Result<(f64, Tensor)> {
    let (c, h, w) = probs.chw()?;
    if (labels.height(), labels.width()) != (h, w) {
        return Err(Error::Shape(format!(
            "labels are {}x{}, probabilities {h}x{w}",
            labels.height(),
            labels.width()
        )));
    }
    let plane = h * w;
    let p = probs.values();
    let mut grad = p.to_vec();
    let mut loss = 0.0;
    let mut count = 0usize;
    for (px, &label) in labels.values().iter().enumerate() {
        if Some(label) == ignore {
            for k in 0..c {
                grad[k * plane + px] = 0.0;
            }
            continue;
        }
        let label = label as usize;
        if label >= c {
            return Err(Error::Label {
                label,
                num_classes: c,
            });
        }
        loss -= p[label * plane + px].max(f64::MIN_POSITIVE).ln();
        grad[label * plane + px] -= 1.0;
        count += 1;
    }
    if count == 0 {
        return Ok((0.0, Tensor::from_parts(vec![c, h, w], vec![0.0; c * plane])));
    }
    let scale = 1.0 / count as f64;
    for g in &mut grad {
        *g *= scale;
    }
    Ok((loss * scale, Tensor::from_parts(vec![c, h, w], grad)))
}
