use std::fmt::Write as _;

use super::{DeltaReport, MetricsReport, WilcoxonOutcome};
use crate::error::{Error, Result};

/// Classes as rows, one column per report plus an optional delta column.
/// Values are printed as percentages.
#[derive(Debug, Clone, Default)]
pub struct ReportTable {
    columns: Vec<(String, MetricsReport)>,
    delta: Option<(String, DeltaReport)>,
}

const SUMMARY_ROWS: [&str; 4] = ["Mean", "Std. dev.", "Min", "Max"];

impl ReportTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn column(mut self, header: impl Into<String>, report: MetricsReport) -> Result<Self> {
        if let Some((_, first)) = self.columns.first() {
            if first.class_names != report.class_names {
                return Err(Error::Schema("report columns cover different classes".into()));
            }
        }
        self.columns.push((header.into(), report));
        Ok(self)
    }

    pub fn delta(mut self, header: impl Into<String>, delta: DeltaReport) -> Result<Self> {
        if let Some((_, first)) = self.columns.first() {
            if first.class_names != delta.class_names {
                return Err(Error::Schema("delta column covers different classes".into()));
            }
        }
        self.delta = Some((header.into(), delta));
        Ok(self)
    }

    fn class_names(&self) -> Vec<String> {
        self.columns
            .first()
            .map(|(_, r)| r.class_names.clone())
            .or_else(|| self.delta.as_ref().map(|(_, d)| d.class_names.clone()))
            .unwrap_or_default()
    }

    fn headers(&self) -> Vec<String> {
        let mut h = vec!["class".to_string()];
        h.extend(self.columns.iter().map(|(name, _)| name.clone()));
        h.extend(self.delta.iter().map(|(name, _)| name.clone()));
        h
    }

    /// Rows of fractions in [0, 1]; `None` for unscored cells.
    fn rows(&self) -> Vec<(String, Vec<Option<f64>>)> {
        let mut rows: Vec<(String, Vec<Option<f64>>)> = self
            .class_names()
            .into_iter()
            .enumerate()
            .map(|(i, name)| {
                let mut cells: Vec<Option<f64>> = self.columns.iter().map(|(_, r)| r.dsc[i]).collect();
                cells.extend(self.delta.iter().map(|(_, d)| Some(d.delta[i])));
                (name, cells)
            })
            .collect();
        for (k, label) in SUMMARY_ROWS.iter().enumerate() {
            let mut cells: Vec<Option<f64>> = self
                .columns
                .iter()
                .map(|(_, r)| Some([r.mean, r.std_dev, r.min, r.max][k]))
                .collect();
            cells.extend(
                self.delta
                    .iter()
                    .map(|(_, d)| Some([d.mean_delta, d.std_dev, d.min, d.max][k])),
            );
            rows.push((label.to_string(), cells));
        }
        rows
    }

    fn footer(&self) -> Option<String> {
        let (_, d) = self.delta.as_ref()?;
        Some(match &d.wilcoxon {
            WilcoxonOutcome::Test(w) => format!(
                "Wilcoxon signed-rank: W = {}, n = {}, p = {:.6} ({})",
                w.statistic,
                w.n,
                w.p_two_sided,
                if w.exact { "exact" } else { "normal approximation" }
            ),
            WilcoxonOutcome::Degenerate(msg) => format!("Wilcoxon signed-rank: not computed ({msg})"),
        })
    }

    /// CSV with values in percent, six decimals.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let schema = |e: csv::Error| Error::Schema(e.to_string());
        w.write_record(self.headers()).map_err(schema)?;
        for (name, cells) in self.rows() {
            let mut record = vec![name];
            record.extend(cells.iter().map(|c| c.map(|v| format!("{:.6}", 100.0 * v)).unwrap_or_default()));
            w.write_record(record).map_err(schema)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Aligned plain-text table with one decimal, plus the test footer.
    pub fn to_text(&self) -> String {
        let headers = self.headers();
        let rows: Vec<Vec<String>> = self
            .rows()
            .into_iter()
            .map(|(name, cells)| {
                let mut r = vec![name];
                r.extend(cells.iter().map(|c| c.map(|v| format!("{:.1}", 100.0 * v)).unwrap_or_else(|| "-".into())));
                r
            })
            .collect();
        let widths: Vec<usize> = (0..headers.len())
            .map(|i| rows.iter().map(|r| r[i].len()).chain([headers[i].len()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let line = |out: &mut String, cells: &[String]| {
            for (i, c) in cells.iter().enumerate() {
                if i == 0 {
                    let _ = write!(out, "{c:<w$}", w = widths[0]);
                } else {
                    let _ = write!(out, "  {c:>w$}", w = widths[i]);
                }
            }
            out.push('\n');
        };
        line(&mut out, &headers);
        let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
        out.push_str(&"-".repeat(total));
        out.push('\n');
        let n_classes = rows.len() - SUMMARY_ROWS.len();
        for (i, r) in rows.iter().enumerate() {
            if i == n_classes {
                out.push_str(&"-".repeat(total));
                out.push('\n');
            }
            line(&mut out, r);
        }
        out.push_str(&format!("\nStd. dev. uses the {} denominator.\n", super::STD_DENOMINATOR));
        if let Some(f) = self.footer() {
            out.push_str(&f);
            out.push('\n');
        }
        out
    }
}
