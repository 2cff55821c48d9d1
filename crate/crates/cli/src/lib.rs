//! Experiment commands behind the `dilseg` binary: dataset generation,
//! architecture comparison, label propagation, generalization, prediction
//! and standalone evaluation.
//!
//! | exit code | meaning |
//! |---|---|
//! | 0 | success |
//! | 1 | other error |
//! | 2 | invalid configuration or parameters |
//! | 3 | invalid or incompatible data, images or model files |
//! | 4 | training diverged |
//! | 5 | filesystem error, or refusal to overwrite |

pub mod config;

use std::path::{Path, PathBuf};

use dilseg::data::{self, PhantomParams, Slice};
use dilseg::eval::{self, DeltaReport, MetricsReport, ReportTable};
use dilseg::net::{self, Network, Variant, INPUT_MULTIPLE};
use dilseg::train::{self, HyperParams};
use dilseg::{LabelMap, NUM_CLASSES};
use thiserror::Error;

pub use config::ExperimentConfig;

pub const OVERLAY_ALPHA: f64 = 0.5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("refusing to write into non-empty directory {} (pass --force)", .0.display())]
    NotEmpty(PathBuf),
    #[error(transparent)]
    Core(#[from] dilseg::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use dilseg::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::NotEmpty(_) => 5,
            CliError::Core(e) => match e {
                E::Parameter(_) | E::Split(_) | E::UnsupportedKernel(_) => 2,
                E::Model(_)
                | E::Image(_)
                | E::Manifest { .. }
                | E::EmptyDataset
                | E::Label { .. }
                | E::Schema(_)
                | E::Shape(_)
                | E::InvalidShape(_) => 3,
                E::Diverged { .. } => 4,
                E::Io { .. } => 5,
                _ => 1,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| dilseg::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(data::write_atomic(path, text.as_bytes())?)
}

fn write_table(dir: &Path, stem: &str, table: &ReportTable) -> CliResult<()> {
    write_text(&dir.join(format!("{stem}.csv")), &table.to_csv()?)?;
    write_text(&dir.join(format!("{stem}.txt")), &table.to_text())
}

/// Writes a phantom dataset into `out`, which must be empty unless `force`.
pub fn cmd_generate(params: &PhantomParams, out: &Path, force: bool) -> CliResult<Vec<Slice>> {
    params.validate()?;
    if !force {
        if let Ok(mut entries) = std::fs::read_dir(out) {
            if entries.next().is_some() {
                return Err(CliError::NotEmpty(out.to_path_buf()));
            }
        }
    }
    let slices = data::generate_phantom(params)?;
    create_dir(out)?;
    data::write_dataset(&slices, out)?;
    Ok(slices)
}

/// The dataset named by the config: a directory on disk or an in-memory phantom.
pub fn load_data(cfg: &ExperimentConfig) -> CliResult<Vec<Slice>> {
    match &cfg.data.path {
        Some(dir) => Ok(data::read_dataset(dir)?),
        None => Ok(data::generate_phantom(&cfg.phantom())?),
    }
}

fn check_divisible(slices: &[Slice]) -> CliResult<()> {
    for s in slices {
        let (h, w) = (s.labels.height(), s.labels.width());
        if h % INPUT_MULTIPLE != 0 || w % INPUT_MULTIPLE != 0 {
            return Err(dilseg::Error::Shape(format!(
                "slice {} is {h}x{w}; both extents must be multiples of {INPUT_MULTIPLE}",
                s.id
            ))
            .into());
        }
    }
    Ok(())
}

fn train_variant(
    cfg: &ExperimentConfig,
    variant: Variant,
    train_set: &[Slice],
    hp: &HyperParams,
) -> CliResult<(Network, Vec<f64>)> {
    let mut net = net::build(variant, cfg.model.num_classes, cfg.model.base_channels, cfg.seed)?;
    net.set_backend(cfg.backend()?);
    let every = cfg.log_every;
    let total = hp.epochs;
    Ok(train::train_with_progress(net, train_set, hp, |epoch, loss| {
        if every > 0 && (epoch % every == 0 || epoch == total) {
            eprintln!("[{variant}] epoch {epoch}/{total} loss {loss:.6}");
        }
    })?)
}

fn predict_all(net: &Network, slices: &[Slice]) -> CliResult<Vec<LabelMap>> {
    Ok(slices.iter().map(|s| net.predict(&s.image)).collect::<dilseg::Result<_>>()?)
}

pub fn evaluate_slices(net: &Network, slices: &[Slice]) -> CliResult<MetricsReport> {
    if net.num_classes() != NUM_CLASSES {
        return Err(dilseg::Error::Schema(format!(
            "model predicts {} classes, dataset has {NUM_CLASSES}",
            net.num_classes()
        ))
        .into());
    }
    let preds = predict_all(net, slices)?;
    let truths: Vec<LabelMap> = slices.iter().map(|s| s.labels.clone()).collect();
    Ok(eval::dsc_report(&preds, &truths)?)
}

fn write_overlays(dir: &Path, slices: &[Slice], preds: &[LabelMap]) -> CliResult<()> {
    let overlays = dir.join("overlays");
    let labels = dir.join("predictions");
    create_dir(&overlays)?;
    create_dir(&labels)?;
    for (s, p) in slices.iter().zip(preds) {
        let over = data::overlay(&s.image, p, OVERLAY_ALPHA)?;
        data::save_image(&over, overlays.join(format!("{}.ppm", s.id)))?;
        data::save_labels(p, labels.join(format!("{}.pgm", s.id)))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub standard: RunOutcome,
    pub dilated: RunOutcome,
    pub delta: DeltaReport,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub net: Network,
    pub loss_log: Vec<f64>,
    pub train: MetricsReport,
    pub test: MetricsReport,
}

fn run_split(
    cfg: &ExperimentConfig,
    variant: Variant,
    train_set: &[Slice],
    test_set: &[Slice],
    hp: &HyperParams,
) -> CliResult<RunOutcome> {
    let (net, loss_log) = train_variant(cfg, variant, train_set, hp)?;
    Ok(RunOutcome {
        train: evaluate_slices(&net, train_set)?,
        test: evaluate_slices(&net, test_set)?,
        net,
        loss_log,
    })
}

fn save_run(dir: &Path, run: &RunOutcome) -> CliResult<()> {
    let tag = run.net.variant().tag();
    net::save_model(&run.net, dir.join(format!("{tag}.model")))?;
    write_text(&dir.join(format!("loss_{tag}.csv")), &train::loss_log_csv(&run.loss_log))
}

/// Trains both architectures on one split and writes models, loss logs and
/// a report with Train/Test per model and the test delta.
pub fn cmd_compare(cfg: &ExperimentConfig) -> CliResult<CompareOutcome> {
    let slices = load_data(cfg)?;
    check_divisible(&slices)?;
    let spec = cfg.split_spec(config::REFERENCE_FRACTION);
    let (train_set, test_set) = train::split_dataset(&slices, &spec)?;
    let hp = cfg.hyper_params(spec.train_fraction);
    let standard = run_split(cfg, Variant::StandardFcn, &train_set, &test_set, &hp)?;
    let dilated = run_split(cfg, Variant::DilatedFcn, &train_set, &test_set, &hp)?;
    let delta = eval::compare_reports(&standard.test, &dilated.test)?;

    create_dir(&cfg.out)?;
    save_run(&cfg.out, &standard)?;
    save_run(&cfg.out, &dilated)?;
    let table = ReportTable::new()
        .column("standard-fcn train", standard.train.clone())?
        .column("standard-fcn test", standard.test.clone())?
        .column("dilated-fcn train", dilated.train.clone())?
        .column("dilated-fcn test", dilated.test.clone())?
        .delta("delta test", delta.clone())?;
    write_table(&cfg.out, "report", &table)?;
    Ok(CompareOutcome {
        standard,
        dilated,
        delta,
    })
}

/// Trains the dilated network on a sparse subset and labels the rest.
pub fn cmd_propagate(cfg: &ExperimentConfig) -> CliResult<RunOutcome> {
    let slices = load_data(cfg)?;
    check_divisible(&slices)?;
    let spec = cfg.split_spec(1.0 - config::REFERENCE_FRACTION);
    let (train_set, test_set) = train::split_dataset(&slices, &spec)?;
    let hp = cfg.hyper_params(spec.train_fraction);
    let run = run_split(cfg, Variant::DilatedFcn, &train_set, &test_set, &hp)?;

    create_dir(&cfg.out)?;
    save_run(&cfg.out, &run)?;
    write_overlays(&cfg.out, &test_set, &predict_all(&run.net, &test_set)?)?;
    let table = ReportTable::new()
        .column("dilated-fcn train", run.train.clone())?
        .column("dilated-fcn test", run.test.clone())?;
    write_table(&cfg.out, "report", &table)?;
    Ok(run)
}

/// Inference only: scores a saved model on another dataset.
pub fn cmd_generalize(model: &Path, cfg: &ExperimentConfig) -> CliResult<MetricsReport> {
    let mut net = net::load_model(model)?;
    net.set_backend(cfg.backend()?);
    let slices = load_data(cfg)?;
    check_divisible(&slices)?;
    let report = evaluate_slices(&net, &slices)?;
    create_dir(&cfg.out)?;
    write_overlays(&cfg.out, &slices, &predict_all(&net, &slices)?)?;
    let table = ReportTable::new().column(format!("{} eval", net.variant()), report.clone())?;
    write_table(&cfg.out, "report", &table)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub labels: LabelMap,
    pub label_path: PathBuf,
    pub overlay_path: PathBuf,
}

/// Labels one image. With `crop`, an image whose extents are not multiples
/// of 8 is centre-cropped to the largest square that fits.
pub fn cmd_predict(model: &Path, image: &Path, out: &Path, crop: bool) -> CliResult<Prediction> {
    let net = net::load_model(model)?;
    let mut img = data::load_image(image)?;
    let (_, h, w) = img.chw()?;
    if crop && (h % INPUT_MULTIPLE != 0 || w % INPUT_MULTIPLE != 0) {
        let size = h.min(w) / INPUT_MULTIPLE * INPUT_MULTIPLE;
        img = data::crop_center(&img, size)?;
    }
    let labels = net.predict(&img)?;
    let stem = image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());
    create_dir(out)?;
    let label_path = out.join(format!("{stem}.pgm"));
    let overlay_path = out.join(format!("{stem}_overlay.ppm"));
    data::save_labels(&labels, &label_path)?;
    data::save_image(&data::overlay(&img, &labels, OVERLAY_ALPHA)?, &overlay_path)?;
    Ok(Prediction {
        labels,
        label_path,
        overlay_path,
    })
}

/// Scores `<predictions>/<slice_id>.pgm` against a dataset's label maps.
/// Slices without a prediction file are skipped; returns the report and
/// the number of slices scored.
pub fn cmd_evaluate(predictions: &Path, dataset: &Path, out: &Path) -> CliResult<(MetricsReport, usize)> {
    let entries = data::read_manifest(dataset)?;
    let mut preds = Vec::with_capacity(entries.len());
    let mut truths = Vec::with_capacity(entries.len());
    for e in &entries {
        let path = predictions.join(format!("{}.pgm", e.slice_id));
        if !path.exists() {
            continue;
        }
        preds.push(data::load_labels(&path)?);
        truths.push(data::load_labels(&e.label_path)?);
    }
    if preds.is_empty() {
        return Err(dilseg::Error::Manifest {
            path: dataset.join(data::MANIFEST_NAME),
            message: format!("no slice has a prediction in {}", predictions.display()),
        }
        .into());
    }
    let report = eval::dsc_report(&preds, &truths)?;
    create_dir(out)?;
    write_table(out, "report", &ReportTable::new().column("predictions", report.clone())?)?;
    Ok((report, preds.len()))
}
