use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dilseg::eval::MetricsReport;
use dilseg_cli::{CliError, CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "dilseg", version, about = "Standard vs dilated FCN segmentation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic phantom dataset.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Output directory (also accepted as --out).
        dir: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Train both architectures on one split and tabulate DSC.
    Compare(Common),
    /// Train the dilated network on a sparse split and label the rest.
    Propagate(Common),
    /// Score a saved model on another dataset without training.
    Generalize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
    },
    /// Label one PPM image.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Centre-crop images whose extents are not multiples of 8.
        #[arg(long)]
        crop: bool,
    },
    /// Score a directory of `<slice_id>.pgm` predictions against a dataset.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Flags that override keys of the config file.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    slices: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    base_channels: Option<usize>,
    /// Training fraction of the split.
    #[arg(long)]
    split: Option<f64>,
    /// Dataset directory; a phantom is generated in memory when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Generate the phantom with the distribution shift.
    #[arg(long)]
    shift: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.data.seed = Some(seed);
        }
        if let Some(v) = self.size {
            cfg.data.image_size = v;
        }
        if let Some(v) = self.slices {
            cfg.data.slices = v;
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = Some(v);
        }
        if let Some(v) = self.lr {
            cfg.train.learning_rate = v;
        }
        if let Some(v) = self.base_channels {
            cfg.model.base_channels = v;
        }
        if let Some(v) = self.split {
            cfg.split.train_fraction = Some(v);
        }
        if let Some(v) = &self.data {
            cfg.data.path = Some(v.clone());
        }
        if self.shift {
            cfg.data.shift = true;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        Ok(cfg)
    }
}

fn summary(label: &str, r: &MetricsReport) {
    println!("{label}: mean DSC {:.4} (min {:.4}, max {:.4})", r.mean, r.min, r.max);
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { common, dir, force } => {
            let cfg = common.resolve()?;
            let out = dir.or(common.out).ok_or_else(|| CliError::Config("missing output directory".into()))?;
            let slices = dilseg_cli::cmd_generate(&cfg.phantom(), &out, force)?;
            println!("wrote {} slices to {}", slices.len(), out.display());
        }
        Command::Compare(common) => {
            let cfg = common.resolve()?;
            let o = dilseg_cli::cmd_compare(&cfg)?;
            summary("standard-fcn test", &o.standard.test);
            summary("dilated-fcn test", &o.dilated.test);
            println!("mean delta {:.4}; report in {}", o.delta.mean_delta, cfg.out.display());
        }
        Command::Propagate(common) => {
            let cfg = common.resolve()?;
            let o = dilseg_cli::cmd_propagate(&cfg)?;
            summary("dilated-fcn test", &o.test);
        }
        Command::Generalize { common, model } => {
            let cfg = common.resolve()?;
            let r = dilseg_cli::cmd_generalize(&model, &cfg)?;
            summary("eval", &r);
        }
        Command::Predict {
            model,
            image,
            out,
            crop,
        } => {
            let p = dilseg_cli::cmd_predict(&model, &image, &out, crop)?;
            println!("wrote {} and {}", p.label_path.display(), p.overlay_path.display());
        }
        Command::Evaluate { predictions, data, out } => {
            let (r, n) = dilseg_cli::cmd_evaluate(&predictions, &data, &out)?;
            summary(&format!("{n} slices"), &r);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
