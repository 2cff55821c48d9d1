mod oracles;

use dilseg::data::{
    decode_pgm, decode_ppm, encode_pgm, encode_ppm, generate_phantom, read_dataset, write_dataset, PhantomParams,
};
use dilseg::net::{build, build_dilated_fcn, decode_model, encode_model, load_model, save_model, Layer, Variant};
use dilseg::ops::ConvSpec;
use dilseg::train::{sgd_step, train, HyperParams, TrainState};
use dilseg::NUM_CLASSES;
use oracles::*;

#[test]
fn dilated_layers_have_the_parameter_count_of_rate_one_layers() {
    for c in [4, 8, 12] {
        let net = build_dilated_fcn(NUM_CLASSES, c, 1).unwrap();
        let mut dilated = 0;
        for layer in net.layers() {
            if let Layer::Conv { spec, weight, bias } = layer {
                let (ci, co, m) = (spec.in_channels, spec.out_channels, spec.kernel_size);
                assert_eq!(weight.len() + bias.len(), co * ci * m * m + co);
                let plain = ConvSpec::new(ci, co, m, 1);
                assert_eq!(layer.parameter_count(), plain.parameter_count());
                dilated += (spec.dilation > 1) as usize;
            }
        }
        assert_eq!(dilated, 2);
    }
}

#[test]
fn save_load_preserves_forward_outputs() {
    let mut rng = rng(30);
    let dir = tempfile::tempdir().unwrap();
    for variant in [Variant::StandardFcn, Variant::DilatedFcn] {
        let net = build(variant, NUM_CLASSES, 4, 9).unwrap();
        let path = dir.path().join(format!("{variant}.model"));
        save_model(&net, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        let x = uniform(&mut rng, &[3, 24, 24]);
        let (a, b) = (net.forward_image(&x).unwrap(), loaded.forward_image(&x).unwrap());
        assert!(rel_err(a.values(), b.values()) <= 1e-6);
        assert_eq!(encode_model(&loaded), encode_model(&decode_model(&encode_model(&loaded)).unwrap()));
    }
}

#[test]
fn netpbm_round_trips_are_byte_exact() {
    let slices = generate_phantom(&PhantomParams {
        image_size: 32,
        n_slices: 4,
        ..Default::default()
    })
    .unwrap();
    for s in &slices {
        let ppm = encode_ppm(&s.image).unwrap();
        assert_eq!(decode_ppm(&ppm).unwrap(), s.image);
        assert_eq!(encode_ppm(&decode_ppm(&ppm).unwrap()).unwrap(), ppm);
        let pgm = encode_pgm(&s.labels);
        assert_eq!(encode_pgm(&decode_pgm(&pgm, NUM_CLASSES).unwrap()), pgm);
    }
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&slices, dir.path()).unwrap();
    assert_eq!(read_dataset(dir.path()).unwrap(), slices);
}

#[test]
fn one_small_step_decreases_loss() {
    let s = &generate_phantom(&PhantomParams {
        image_size: 48,
        n_slices: 2,
        ..Default::default()
    })
    .unwrap()[0];
    for variant in [Variant::StandardFcn, Variant::DilatedFcn] {
        let mut net = build(variant, NUM_CLASSES, 4, 2).unwrap();
        let (before, grads) = net.loss_and_gradients(&s.image, &s.labels).unwrap();
        let hp = HyperParams {
            learning_rate: 1e-3,
            ..Default::default()
        };
        let mut state = TrainState::new(&net, 0);
        sgd_step(&mut net.params_mut(), &grads, &mut state, &hp).unwrap();
        assert!(net.loss(&s.image, &s.labels).unwrap() < before, "{variant}");
    }
}

#[test]
fn training_lowers_the_epoch_loss() {
    let slices = generate_phantom(&PhantomParams {
        image_size: 32,
        n_slices: 32,
        ..Default::default()
    })
    .unwrap();
    let net = build(Variant::DilatedFcn, NUM_CLASSES, 4, 5).unwrap();
    let hp = HyperParams {
        seed: 5,
        ..Default::default()
    };
    let (_, log) = train(net, &slices, &hp).unwrap();
    assert_eq!(log.len(), 60);
    assert!(log.iter().all(|l| l.is_finite()));
    assert!(log[59] < log[0], "{} vs {}", log[59], log[0]);
}
