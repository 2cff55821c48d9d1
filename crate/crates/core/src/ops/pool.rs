use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub window: usize,
    pub stride: usize,
}

impl PoolSpec {
    pub fn new(window: usize, stride: usize) -> Self {
        Self { window, stride }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 || self.stride == 0 {
            return Err(Error::Parameter(format!(
                "pool window must be >= 2 and stride >= 1, got w={} s={}",
                self.window, self.stride
            )));
        }
        Ok(())
    }

    pub fn output_extent(&self, extent: usize) -> Result<usize> {
        if extent < self.window {
            return Err(Error::Shape(format!(
                "pool window {} larger than input extent {extent}",
                self.window
            )));
        }
        Ok((extent - self.window) / self.stride + 1)
    }
}

/// Flat input offsets of the winning element of every pooling window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgmaxIndices {
    pub input_shape: Vec<usize>,
    pub winners: Vec<usize>,
}

/// Max pooling over `[C, H, W]`. Ties go to the first element in row-major
/// scan order of the window.
pub fn maxpool2d(input: &Tensor, spec: &PoolSpec) -> Result<(Tensor, ArgmaxIndices)> {
    spec.validate()?;
    let (c, h, w) = input.chw()?;
    let (ho, wo) = (spec.output_extent(h)?, spec.output_extent(w)?);
    let x = input.values();
    let mut out = Vec::with_capacity(c * ho * wo);
    let mut winners = Vec::with_capacity(c * ho * wo);
    for ch in 0..c {
        for i in 0..ho {
            for j in 0..wo {
                let mut best = (c * h * w, f64::NEG_INFINITY);
                for m in 0..spec.window {
                    let row = (ch * h + i * spec.stride + m) * w + j * spec.stride;
                    for (n, &v) in x[row..row + spec.window].iter().enumerate() {
                        if v > best.1 || best.0 == c * h * w {
                            best = (row + n, v);
                        }
                    }
                }
                winners.push(best.0);
                out.push(best.1);
            }
        }
    }
    Ok((
        Tensor::from_parts(vec![c, ho, wo], out),
        ArgmaxIndices {
            input_shape: vec![c, h, w],
            winners,
        },
    ))
}

/// Routes each output gradient to its window's winner; overlapping windows accumulate.
pub fn maxpool2d_backward(indices: &ArgmaxIndices, grad_out: &Tensor) -> Result<Tensor> {
    if grad_out.len() != indices.winners.len() {
        return Err(Error::Shape(format!(
            "grad_out has {} entries, pooling produced {}",
            grad_out.len(),
            indices.winners.len()
        )));
    }
    let mut grad = Tensor::zeros(&indices.input_shape)?;
    let g = grad.values_mut();
    for (&idx, &d) in indices.winners.iter().zip(grad_out.values()) {
        g[idx] += d;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_tensor;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn picks_window_maximum() {
        let x = Tensor::from_values(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, idx) = maxpool2d(&x, &PoolSpec::new(2, 2)).unwrap();
        assert_eq!(y.values(), &[4.0]);
        assert_eq!(idx.winners, vec![3]);
    }

    #[test]
    fn ties_go_to_first_in_scan_order() {
        let x = Tensor::filled(&[1, 4, 4], 7.0).unwrap();
        let (y, idx) = maxpool2d(&x, &PoolSpec::new(2, 2)).unwrap();
        assert!(y.values().iter().all(|v| *v == 7.0));
        assert_eq!(idx.winners, vec![0, 2, 8, 10]);
    }

    #[test]
    fn matches_brute_force_window_max() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(21);
        let x = random_tensor(&mut rng, &[2, 6, 6]);
        let (y, _) = maxpool2d(&x, &PoolSpec::new(2, 2)).unwrap();
        for c in 0..2 {
            for i in 0..3 {
                for j in 0..3 {
                    let expected = [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .iter()
                        .map(|(a, b)| x.at(&[c, 2 * i + a, 2 * j + b]).unwrap())
                        .fold(f64::NEG_INFINITY, f64::max);
                    assert_eq!(y.at(&[c, i, j]).unwrap(), expected);
                }
            }
        }
    }

    #[test]
    fn window_larger_than_input_is_rejected() {
        let x = Tensor::zeros(&[1, 2, 5]).unwrap();
        assert!(matches!(maxpool2d(&x, &PoolSpec::new(3, 1)), Err(Error::Shape(_))));
    }

    #[test]
    fn backward_routes_to_winners_only() {
        let x = Tensor::from_values(&[1, 2, 4], vec![1.0, 5.0, 2.0, 0.0, 3.0, 4.0, 9.0, 1.0]).unwrap();
        let (_, idx) = maxpool2d(&x, &PoolSpec::new(2, 2)).unwrap();
        let g = Tensor::from_values(&[1, 1, 2], vec![10.0, 20.0]).unwrap();
        let gi = maxpool2d_backward(&idx, &g).unwrap();
        assert_eq!(gi.values(), &[0.0, 10.0, 0.0, 0.0, 0.0, 0.0, 20.0, 0.0]);
    }
}
