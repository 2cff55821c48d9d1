use std::path::Path;

use dilseg_cli::{cmd_compare, cmd_evaluate, cmd_generalize, cmd_generate, cmd_predict, cmd_propagate, ExperimentConfig};

fn small(out: &Path, data: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.out = out.to_path_buf();
    cfg.data.path = Some(data.to_path_buf());
    cfg.model.base_channels = 4;
    cfg.train.epochs = Some(2);
    cfg.log_every = 0;
    cfg
}

fn dataset(root: &Path) -> std::path::PathBuf {
    let dir = root.join("data");
    let mut cfg = ExperimentConfig::default();
    cfg.data.image_size = 32;
    cfg.data.slices = 10;
    cmd_generate(&cfg.phantom(), &dir, false).unwrap();
    dir
}

#[test]
fn compare_report_mirrors_the_table_layout() {
    let root = tempfile::tempdir().unwrap();
    let data = dataset(root.path());
    let out = root.path().join("cmp");
    let o = cmd_compare(&small(&out, &data)).unwrap();
    for (i, d) in o.delta.delta.iter().enumerate() {
        assert_eq!(*d, o.dilated.test.dsc[i].unwrap() - o.standard.test.dsc[i].unwrap());
    }
    assert_eq!(o.delta.mean_delta, o.dilated.test.mean - o.standard.test.mean);
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows.len(), 1 + 8 + 4);
    assert_eq!(&rows[9..], ["Mean", "Std. dev.", "Min", "Max"]);
    for f in ["standard-fcn.model", "dilated-fcn.model", "loss_standard-fcn.csv", "report.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn propagate_writes_one_overlay_per_test_slice() {
    let root = tempfile::tempdir().unwrap();
    let data = dataset(root.path());
    let out = root.path().join("prop");
    let mut cfg = small(&out, &data);
    cfg.split.train_fraction = Some(0.2);
    cmd_propagate(&cfg).unwrap();
    let overlays = std::fs::read_dir(out.join("overlays")).unwrap().count();
    assert_eq!(overlays, 8);
    let (_, scored) = cmd_evaluate(&out.join("predictions"), &data, &root.path().join("eval")).unwrap();
    assert_eq!(scored, 8);

    // The 80/20 run emits a report with the same rows and columns.
    let out2 = root.path().join("prop80");
    let mut cfg2 = small(&out2, &data);
    cfg2.split.train_fraction = Some(0.8);
    cmd_propagate(&cfg2).unwrap();
    let header = |p: &Path| {
        let text = std::fs::read_to_string(p.join("report.csv")).unwrap();
        text.lines().map(|l| l.split(',').next().unwrap().to_string()).collect::<Vec<_>>()
    };
    assert_eq!(header(&out), header(&out2));
}

#[test]
fn predict_and_generalize_are_deterministic() {
    let root = tempfile::tempdir().unwrap();
    let data = dataset(root.path());
    let out = root.path().join("cmp");
    cmd_compare(&small(&out, &data)).unwrap();
    let model = out.join("dilated-fcn.model");
    let image = data.join("images/slice_000.ppm");
    let a = cmd_predict(&model, &image, &root.path().join("p1"), false).unwrap();
    let b = cmd_predict(&model, &image, &root.path().join("p2"), false).unwrap();
    assert_eq!(a.labels, b.labels);
    assert!(a.labels.values().iter().all(|&v| v < 8));
    assert_eq!(std::fs::read(&a.overlay_path).unwrap(), std::fs::read(&b.overlay_path).unwrap());

    let mut reports = Vec::new();
    for run in 0..2 {
        let mut cfg = small(&root.path().join(format!("gen{run}")), &data);
        cfg.data.path = None;
        cfg.data.image_size = 32;
        cfg.data.slices = 4;
        cfg.data.seed = Some(99);
        cfg.data.shift = true;
        let r = cmd_generalize(&model, &cfg).unwrap();
        assert!(r.dsc.iter().all(|d| matches!(d, Some(v) if (0.0..=1.0).contains(v))));
        reports.push(std::fs::read(cfg.out.join("report.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn predict_suggests_a_crop_for_odd_sizes() {
    let root = tempfile::tempdir().unwrap();
    let data = dataset(root.path());
    let out = root.path().join("cmp");
    cmd_compare(&small(&out, &data)).unwrap();
    let img = dilseg::data::load_image(data.join("images/slice_000.ppm")).unwrap();
    let odd = dilseg::ops::crop_spatial(&img, 0, 0, 30, 29).unwrap();
    let path = root.path().join("odd.ppm");
    dilseg::data::save_image(&odd, &path).unwrap();
    let model = out.join("dilated-fcn.model");
    let err = cmd_predict(&model, &path, &root.path().join("p"), false).unwrap_err();
    assert!(err.to_string().contains("crop to 24x24"), "{err}");
    assert_eq!(err.exit_code(), 3);
    let p = cmd_predict(&model, &path, &root.path().join("p"), true).unwrap();
    assert_eq!((p.labels.height(), p.labels.width()), (24, 24));
}
