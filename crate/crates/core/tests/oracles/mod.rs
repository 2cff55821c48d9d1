//! Test-side reference implementations, written independently of the
//! library code they check.
#![allow(dead_code)]

use dilseg::{LabelMap, Tensor};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_values(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Max absolute difference over the larger of the two max magnitudes.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// `|a - b| / max(|a|, |b|)` for scalars, 0 when both are 0.
pub fn rel_scalar(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 { 0.0 } else { (a - b).abs() / s }
}

/// Textbook stride-1 cross-correlation over an explicitly zero-padded
/// input. `x` is `[C, H, W]`, `k` is `[O, C, M, M]` with odd `M`.
pub fn plain_conv2d(x: &Tensor, k: &Tensor, b: &Tensor) -> Tensor {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (o, m) = (k.shape()[0], k.shape()[2]);
    assert_eq!(m % 2, 1);
    let p = m / 2;
    let (hp, wp) = (h + 2 * p, w + 2 * p);
    let mut padded = vec![0.0; c * hp * wp];
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                padded[(ch * hp + i + p) * wp + j + p] = x.values()[(ch * h + i) * w + j];
            }
        }
    }
    let kv = k.values();
    let mut out = vec![0.0; o * h * w];
    for oc in 0..o {
        for i in 0..h {
            for j in 0..w {
                let mut acc = 0.0;
                for ch in 0..c {
                    for a in 0..m {
                        for bb in 0..m {
                            acc += padded[(ch * hp + i + a) * wp + j + bb] * kv[((oc * c + ch) * m + a) * m + bb];
                        }
                    }
                }
                out[(oc * h + i) * w + j] = acc + b.values()[oc];
            }
        }
    }
    Tensor::from_values(&[o, h, w], out).unwrap()
}

/// Central finite differences of a scalar function of `x`.
pub fn numeric_grad(x: &Tensor, h: f64, mut f: impl FnMut(&Tensor) -> f64) -> Vec<f64> {
    let mut probe = x.clone();
    (0..x.len())
        .map(|i| {
            let v = x.values()[i];
            probe.values_mut()[i] = v + h;
            let up = f(&probe);
            probe.values_mut()[i] = v - h;
            let down = f(&probe);
            probe.values_mut()[i] = v;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn dot(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

pub fn dice_brute(pred: &LabelMap, truth: &LabelMap, class: u8) -> f64 {
    let (mut inter, mut p, mut t) = (0usize, 0usize, 0usize);
    for r in 0..truth.height() {
        for c in 0..truth.width() {
            let a = pred.get(r, c) == class;
            let b = truth.get(r, c) == class;
            if a {
                p += 1;
            }
            if b {
                t += 1;
            }
            if a && b {
                inter += 1;
            }
        }
    }
    if p + t == 0 { 1.0 } else { 2.0 * inter as f64 / (p + t) as f64 }
}

/// Signed-rank statistic and two-sided p-value by listing every one of the
/// `2^n` sign assignments. Magnitudes must be distinct and nonzero.
pub fn wilcoxon_enumerate(diffs: &[f64]) -> (f64, f64) {
    let n = diffs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| diffs[a].abs().partial_cmp(&diffs[b].abs()).unwrap());
    let mut rank = vec![0usize; n];
    for (r, &i) in idx.iter().enumerate() {
        rank[i] = r + 1;
    }
    let total = n * (n + 1) / 2;
    let plus: usize = (0..n).filter(|&i| diffs[i] > 0.0).map(|i| rank[i]).sum();
    let observed = plus.min(total - plus);
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: usize = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| rank[i]).sum();
        if s.min(total - s) <= observed {
            hits += 1;
        }
    }
    (observed as f64, hits as f64 / (1u64 << n) as f64)
}
