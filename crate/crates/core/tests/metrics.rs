mod oracles;

use dilseg::eval::{compare_reports, dice, dsc_report, wilcoxon_signed_rank, MetricsReport, WilcoxonOutcome};
use dilseg::LabelMap;
use oracles::*;
use rand::seq::SliceRandom;
use rand::Rng;

#[test]
fn dice_matches_pixel_counting() {
    let mut rng = rng(20);
    for _ in 0..100 {
        let (h, w) = (rng.random_range(1..=20), rng.random_range(1..=20));
        // Few classes so overlaps and empty masks both occur.
        let k = rng.random_range(1..=4u8);
        let mut gen = || LabelMap::from_values(h, w, (0..h * w).map(|_| rng.random_range(0..k)).collect()).unwrap();
        let (p, t) = (gen(), gen());
        for class in 0..8 {
            assert_eq!(dice(&p, &t, class).unwrap(), dice_brute(&p, &t, class));
        }
    }
}

#[test]
fn single_slice_report_matches_brute_force() {
    let mut rng = rng(21);
    for _ in 0..20 {
        let gen = |rng: &mut rand_xoshiro::Xoshiro256PlusPlus| {
            LabelMap::from_values(8, 8, (0..64).map(|_| rng.random_range(0..8)).collect()).unwrap()
        };
        let (p, t) = (gen(&mut rng), gen(&mut rng));
        let r = dsc_report(&[p.clone()], &[t.clone()]).unwrap();
        for class in 0..8u8 {
            assert_eq!(r.dsc[class as usize], Some(dice_brute(&p, &t, class)));
        }
    }
}

#[test]
fn wilcoxon_matches_full_enumeration() {
    let mut rng = rng(22);
    for n in 1..=12usize {
        // Distinct magnitudes in random order, every sign pattern.
        let mut mags: Vec<f64> = (1..=n).map(|i| i as f64 * 0.7 + rng.random_range(0.0..0.3)).collect();
        mags.shuffle(&mut rng);
        for mask in 0u32..(1 << n) {
            let d: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { mags[i] } else { -mags[i] }).collect();
            let zeros = vec![0.0; n];
            let r = wilcoxon_signed_rank(&d, &zeros).unwrap();
            let (stat, p) = wilcoxon_enumerate(&d);
            assert_eq!(r.statistic, stat, "n={n} mask={mask:b}");
            assert!((r.p_two_sided - p).abs() <= 1e-12, "n={n} mask={mask:b}: {} vs {p}", r.p_two_sided);
        }
    }
}

const FCN_TEST: [f64; 8] = [98.1, 71.6, 52.6, 92.2, 73.6, 55.4, 77.9, 46.6];
const DILATED_TEST: [f64; 8] = [99.6, 93.0, 74.3, 98.8, 97.4, 88.7, 93.9, 78.9];
const PRINTED_DELTA: [f64; 8] = [1.5, 21.4, 21.7, 6.6, 23.8, 33.3, 16.0, 32.3];

fn report(percent: [f64; 8]) -> MetricsReport {
    MetricsReport::for_classes(percent.map(|v| v / 100.0)).unwrap()
}

fn one_decimal(fraction: f64) -> f64 {
    (fraction * 1000.0).round() / 10.0
}

#[test]
fn published_test_columns_reproduce_the_delta_column() {
    let (a, b) = (report(FCN_TEST), report(DILATED_TEST));
    let d = compare_reports(&a, &b).unwrap();
    for (got, want) in d.delta.iter().zip(PRINTED_DELTA) {
        assert_eq!(one_decimal(*got), want);
    }
    assert_eq!(one_decimal(d.mean_delta), 19.6);
    assert_eq!(one_decimal(a.mean), 71.0);
    assert_eq!(one_decimal(b.mean), 90.6);
    // Printed standard deviations follow the sample (n - 1) convention.
    assert_eq!(one_decimal(a.std_dev), 18.6);
    assert_eq!(one_decimal(b.std_dev), 9.4);
    assert_eq!(one_decimal(d.std_dev), 11.2);
    match d.wilcoxon {
        WilcoxonOutcome::Test(w) => {
            assert_eq!(w.n, 8);
            assert_eq!(w.statistic, 0.0);
            assert!(w.p_two_sided < 0.01);
        }
        other => panic!("expected a test result, got {other:?}"),
    }
}

#[test]
fn dice_is_symmetric_and_one_exactly_for_identical_masks() {
    let mut rng = rng(23);
    for _ in 0..200 {
        let (h, w) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let p = LabelMap::from_values(h, w, (0..h * w).map(|_| rng.random_range(0..2)).collect()).unwrap();
        let t = LabelMap::from_values(h, w, (0..h * w).map(|_| rng.random_range(0..2)).collect()).unwrap();
        for class in 0..2u8 {
            let d = dice(&p, &t, class).unwrap();
            assert_eq!(d, dice(&t, &p, class).unwrap());
            assert!((0.0..=1.0).contains(&d));
            let same_mask = p.values().iter().zip(t.values()).all(|(a, b)| (*a == class) == (*b == class));
            assert_eq!(d == 1.0, same_mask);
        }
    }
}

#[test]
fn report_summary_rows_recompute_from_the_class_list() {
    let mut rng = rng(24);
    for _ in 0..20 {
        let gen = |rng: &mut rand_xoshiro::Xoshiro256PlusPlus| {
            LabelMap::from_values(6, 6, (0..36).map(|_| rng.random_range(0..8)).collect()).unwrap()
        };
        let preds: Vec<_> = (0..3).map(|_| gen(&mut rng)).collect();
        let truths: Vec<_> = (0..3).map(|_| gen(&mut rng)).collect();
        let r = dsc_report(&preds, &truths).unwrap();
        let v: Vec<f64> = r.dsc.iter().map(|d| d.unwrap()).collect();
        assert_eq!(r.mean, v.iter().sum::<f64>() / 8.0);
        assert_eq!(r.min, v.iter().copied().fold(f64::INFINITY, f64::min));
        assert_eq!(r.max, v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
}

#[test]
fn increasing_deltas_give_zero_statistic() {
    let a = report([50.0; 8]);
    let b = report([51.0, 52.0, 53.0, 54.0, 55.0, 56.0, 57.0, 58.0]);
    let d = compare_reports(&a, &b).unwrap();
    match d.wilcoxon {
        WilcoxonOutcome::Test(w) => assert_eq!(w.statistic, 0.0),
        other => panic!("{other:?}"),
    }
}
