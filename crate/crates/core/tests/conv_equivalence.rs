mod oracles;

use dilseg::ops::{
    dilated_conv2d_backward, dilated_conv2d_forward, dilated_conv2d_forward_with, upsample_kernel, ConvBackend,
    ConvSpec,
};
use dilseg::Tensor;
use oracles::*;
use rand::Rng;

fn random_case(rng: &mut impl Rng, m: usize) -> (Tensor, Tensor, Tensor, ConvSpec, usize) {
    let ci = rng.random_range(1..=3);
    let co = rng.random_range(1..=3);
    let h = rng.random_range(3..=12);
    let w = rng.random_range(3..=12);
    let x = uniform(rng, &[ci, h, w]);
    let k = uniform(rng, &[co, ci, m, m]);
    let b = uniform(rng, &[co]);
    (x, k, b, ConvSpec::new(ci, co, m, 1), co)
}

#[test]
fn rate_one_is_plain_convolution_bitwise() {
    let mut rng = rng(1);
    for case in 0..200 {
        let m = [1, 3, 5][case % 3];
        let (x, k, b, spec, _) = random_case(&mut rng, m);
        let got = dilated_conv2d_forward(&x, &k, &b, &spec).unwrap();
        let want = plain_conv2d(&x, &k, &b);
        assert_eq!(got.shape(), want.shape());
        for (a, e) in got.values().iter().zip(want.values()) {
            assert_eq!(a.to_bits(), e.to_bits(), "case {case}, M={m}");
        }
    }
}

#[test]
fn dilated_conv_equals_plain_conv_with_zero_stuffed_kernel() {
    let mut rng = rng(2);
    for case in 0..200 {
        let r = [2, 3, 4][case % 3];
        let m = [1, 3, 5][(case / 3) % 3];
        let (x, k, b, spec, _) = random_case(&mut rng, m);
        let spec = ConvSpec { dilation: r, ..spec };
        let got = dilated_conv2d_forward(&x, &k, &b, &spec).unwrap();
        let want = plain_conv2d(&x, &upsample_kernel(&k, r).unwrap(), &b);
        assert!(rel_err(got.values(), want.values()) <= 1e-9, "case {case}, r={r}, M={m}");
    }
}

#[test]
fn lowered_backend_agrees_with_direct() {
    let mut rng = rng(3);
    for case in 0..60 {
        let r = 1 + case % 4;
        let m = [1, 3, 5][case % 3];
        let (x, k, b, spec, _) = random_case(&mut rng, m);
        let spec = ConvSpec { dilation: r, ..spec };
        let direct = dilated_conv2d_forward_with(&x, &k, &b, &spec, ConvBackend::Direct).unwrap();
        let lowered = dilated_conv2d_forward_with(&x, &k, &b, &spec, ConvBackend::Lowered).unwrap();
        assert!(rel_err(direct.values(), lowered.values()) <= 1e-9);
    }
}

/// Extent of the nonzero region along one axis of a `[1, H, W]` map.
fn support(t: &Tensor, axis: usize) -> usize {
    let (h, w) = (t.shape()[1], t.shape()[2]);
    let (mut lo, mut hi) = (usize::MAX, 0);
    for i in 0..h {
        for j in 0..w {
            if t.values()[i * w + j] != 0.0 {
                let p = if axis == 0 { i } else { j };
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
    }
    hi - lo + 1
}

#[test]
fn receptive_span_measured_on_delta_images() {
    let size = 41;
    let mut delta = Tensor::zeros(&[1, size, size]).unwrap();
    delta.set(&[0, size / 2, size / 2], 1.0).unwrap();
    for r in [1, 2, 4] {
        for m in [1, 3, 5] {
            let spec = ConvSpec::new(1, 1, m, r);
            let k = Tensor::filled(&[1, 1, m, m], 1.0).unwrap();
            let b = Tensor::zeros(&[1]).unwrap();
            let out = dilated_conv2d_forward(&delta, &k, &b, &spec).unwrap();
            let want = (m - 1) * r + 1;
            assert_eq!(support(&out, 0), want, "r={r} M={m}");
            assert_eq!(support(&out, 1), want, "r={r} M={m}");
            assert_eq!(spec.receptive_span(), want);

            // The input region one output pixel depends on, read off its gradient.
            let mut g = Tensor::zeros(&[1, size, size]).unwrap();
            g.set(&[0, size / 2, size / 2], 1.0).unwrap();
            let grads = dilated_conv2d_backward(&delta, &k, &spec, &g).unwrap();
            assert_eq!(support(&grads.input, 0), want);
            assert_eq!(support(&grads.input, 1), want);
        }
    }
}
