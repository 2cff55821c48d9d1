//! Dice scores, per-class reports and paired comparisons between models.

mod table;
mod wilcoxon;

use crate::error::{Error, Result};
use crate::labels::{LabelMap, CLASS_NAMES, NUM_CLASSES};

pub use table::ReportTable;
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult, EXACT_LIMIT};

/// `2·|P∩T| / (|P|+|T|)` for the binary masks of `class_id`; 1.0 when the
/// class is absent from both maps.
pub fn dice(pred: &LabelMap, truth: &LabelMap, class_id: u8) -> Result<f64> {
    let c = ClassCounts::of(pred, truth, class_id)?;
    Ok(c.dice().unwrap_or(1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct ClassCounts {
    intersection: u64,
    predicted: u64,
    truth: u64,
}

impl ClassCounts {
    fn of(pred: &LabelMap, truth: &LabelMap, class_id: u8) -> Result<Self> {
        if (pred.height(), pred.width()) != (truth.height(), truth.width()) {
            return Err(Error::Shape(format!(
                "prediction {}x{} vs ground truth {}x{}",
                pred.height(),
                pred.width(),
                truth.height(),
                truth.width()
            )));
        }
        let mut c = Self::default();
        for (&p, &t) in pred.values().iter().zip(truth.values()) {
            let (p, t) = (p == class_id, t == class_id);
            c.predicted += p as u64;
            c.truth += t as u64;
            c.intersection += (p && t) as u64;
        }
        Ok(c)
    }

    fn add(&mut self, other: Self) {
        self.intersection += other.intersection;
        self.predicted += other.predicted;
        self.truth += other.truth;
    }

    fn dice(&self) -> Option<f64> {
        let denom = self.predicted + self.truth;
        (denom > 0).then(|| 2.0 * self.intersection as f64 / denom as f64)
    }
}

/// How to score a class that appears in neither predictions nor truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbsentPolicy {
    /// Both agree the class is absent: DSC = 1.
    #[default]
    ScoreAsOne,
    /// Leave the class unscored and out of the summary rows.
    Exclude,
}

/// Per-class DSC with summary rows. `std_dev` uses the sample (`n - 1`)
/// denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    pub dsc: Vec<Option<f64>>,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

/// Denominator used for `std_dev`, printed with every text report.
pub const STD_DENOMINATOR: &str = "n-1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

/// Mean, sample standard deviation (`n - 1`), min and max.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let std_dev = if values.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    Ok(Summary {
        mean,
        std_dev,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

impl MetricsReport {
    /// Builds a report from per-class scores; `None` marks an unscored class.
    pub fn from_scores(class_names: Vec<String>, dsc: Vec<Option<f64>>) -> Result<Self> {
        if class_names.len() != dsc.len() {
            return Err(Error::Schema(format!(
                "{} class names for {} scores",
                class_names.len(),
                dsc.len()
            )));
        }
        if let Some(bad) = dsc.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Parameter(format!("DSC {bad} outside [0, 1]")));
        }
        let scored: Vec<f64> = dsc.iter().flatten().copied().collect();
        let s = summarize(&scored)?;
        Ok(Self {
            class_names,
            dsc,
            mean: s.mean,
            std_dev: s.std_dev,
            min: s.min,
            max: s.max,
        })
    }

    /// Report over the fixed 8-class label set from plain scores.
    pub fn for_classes(dsc: [f64; NUM_CLASSES]) -> Result<Self> {
        Self::from_scores(
            CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
            dsc.iter().map(|&v| Some(v)).collect(),
        )
    }

    pub fn scored(&self) -> Vec<f64> {
        self.dsc.iter().flatten().copied().collect()
    }
}

pub fn dsc_report(preds: &[LabelMap], truths: &[LabelMap]) -> Result<MetricsReport> {
    dsc_report_with(preds, truths, AbsentPolicy::ScoreAsOne)
}

/// Pooled DSC per class: intersections and mask sizes are summed over all
/// slices before the ratio is taken.
pub fn dsc_report_with(preds: &[LabelMap], truths: &[LabelMap], policy: AbsentPolicy) -> Result<MetricsReport> {
    if preds.len() != truths.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} ground-truth maps",
            preds.len(),
            truths.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut totals = [ClassCounts::default(); NUM_CLASSES];
    for (p, t) in preds.iter().zip(truths) {
        for (class, total) in totals.iter_mut().enumerate() {
            total.add(ClassCounts::of(p, t, class as u8)?);
        }
    }
    let dsc = totals
        .iter()
        .map(|c| match (c.dice(), policy) {
            (Some(d), _) => Some(d),
            (None, AbsentPolicy::ScoreAsOne) => Some(1.0),
            (None, AbsentPolicy::Exclude) => None,
        })
        .collect();
    MetricsReport::from_scores(CLASS_NAMES.iter().map(|s| s.to_string()).collect(), dsc)
}

#[derive(Debug, Clone, PartialEq)]
pub enum WilcoxonOutcome {
    Test(WilcoxonResult),
    Degenerate(String),
}

/// Per-class differences `b - a` and a paired Wilcoxon test over them.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaReport {
    pub class_names: Vec<String>,
    pub delta: Vec<f64>,
    /// `b.mean - a.mean`.
    pub mean_delta: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    pub wilcoxon: WilcoxonOutcome,
}

pub fn compare_reports(a: &MetricsReport, b: &MetricsReport) -> Result<DeltaReport> {
    if a.class_names != b.class_names {
        return Err(Error::Schema(format!(
            "class sets differ: {:?} vs {:?}",
            a.class_names, b.class_names
        )));
    }
    let (av, bv): (Vec<f64>, Vec<f64>) = a
        .dsc
        .iter()
        .zip(&b.dsc)
        .map(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => Ok((*x, *y)),
            _ => Err(Error::Schema("every class must be scored in both reports".into())),
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let delta: Vec<f64> = av.iter().zip(&bv).map(|(x, y)| y - x).collect();
    let s = summarize(&delta)?;
    let wilcoxon = match wilcoxon_signed_rank(&bv, &av) {
        Ok(r) => WilcoxonOutcome::Test(r),
        Err(Error::Degenerate(msg)) => WilcoxonOutcome::Degenerate(msg),
        Err(e) => return Err(e),
    };
    Ok(DeltaReport {
        class_names: a.class_names.clone(),
        delta,
        mean_delta: b.mean - a.mean,
        std_dev: s.std_dev,
        min: s.min,
        max: s.max,
        wilcoxon,
    })
}
