//! Evaluation extras and the comparison tables (CSV and Markdown).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Labeler, Sample, Split};
use crate::error::{PicoreError, Result};
use crate::operator_net::{evaluate_nrmse, FnoParams};
use crate::pipeline::ExperimentReport;

/// Mean test NRMSE of a trained operator on samples at any resolution the
/// network supports (zero-shot super-resolution when finer than training).
pub fn evaluate_super_resolution(params: &FnoParams<f64>, samples: &[Sample<f64>]) -> Result<f64> {
    let first = samples
        .first()
        .ok_or_else(|| PicoreError::InvalidArgument("no evaluation samples".into()))?;
    let n = first.instance.grid.n_points;
    if n < params.config.min_resolution() {
        return Err(PicoreError::ResolutionTooLow {
            resolution: n,
            modes: params.config.modes,
        });
    }
    evaluate_nrmse(params, samples)
}

/// Simulates the test split at `resolution` and evaluates on it.
pub fn evaluate_at_resolution(
    params: &FnoParams<f64>,
    dataset: &Dataset,
    resolution: usize,
    labeler: &dyn Labeler,
) -> Result<f64> {
    if resolution < params.config.min_resolution() {
        return Err(PicoreError::ResolutionTooLow {
            resolution,
            modes: params.config.modes,
        });
    }
    evaluate_super_resolution(params, &dataset.samples_at(Split::Test, resolution, labeler)?)
}

/// Mean Euclidean distance of the vectors to their centroid.
pub fn centroid_spread(vectors: &[Vec<f64>]) -> Result<f64> {
    let d = vectors
        .first()
        .ok_or_else(|| PicoreError::InvalidArgument("centroid of an empty set".into()))?
        .len();
    if vectors.iter().any(|v| v.len() != d) {
        return Err(PicoreError::InvalidArgument("vectors differ in length".into()));
    }
    let n = vectors.len() as f64;
    let mut c = vec![0.0; d];
    for v in vectors {
        for (ci, x) in c.iter_mut().zip(v) {
            *ci += x;
        }
    }
    c.iter_mut().for_each(|x| *x /= n);
    let total: f64 = vectors
        .iter()
        .map(|v| v.iter().zip(&c).map(|(x, m)| (x - m) * (x - m)).sum::<f64>().sqrt())
        .sum();
    Ok(total / n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Nrmse,
    Acceleration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub method: String,
    pub metric: Metric,
    /// One cell per column of [`ReportTable::betas`].
    pub cells: Vec<Option<f64>>,
}

/// Methods by budget fraction; columns in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportTable {
    pub betas: Vec<f64>,
    pub rows: Vec<TableRow>,
}

impl ReportTable {
    pub fn from_reports(reports: &[ExperimentReport]) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| PicoreError::InvalidArgument("no reports to render".into()))?;
        let key = first.dataset_key();
        for r in reports {
            let k = r.dataset_key();
            if k != key {
                return Err(PicoreError::MixedDatasets(key, k));
            }
        }
        let beta_of = ExperimentReport::beta;
        let mut betas: Vec<f64> = reports.iter().map(beta_of).collect();
        betas.sort_by(f64::total_cmp);
        betas.dedup();
        let col = |b: f64| betas.iter().position(|&x| x == b).expect("collected above");

        let mut methods: Vec<String> = Vec::new();
        for r in reports {
            let m = r.method_label();
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
        let mut rows = Vec::new();
        for m in &methods {
            let mut nrmse = vec![None; betas.len()];
            let mut accel = vec![None; betas.len()];
            let mut seen = BTreeSet::new();
            for r in reports.iter().filter(|r| &r.method_label() == m) {
                let c = col(beta_of(r));
                if !seen.insert(c) {
                    return Err(PicoreError::InvalidArgument(format!(
                        "two reports for {m} at beta {}",
                        betas[c]
                    )));
                }
                nrmse[c] = Some(r.test_nrmse.mean);
                accel[c] = r.acceleration;
            }
            rows.push(TableRow {
                method: m.clone(),
                metric: Metric::Nrmse,
                cells: nrmse,
            });
            if accel.iter().any(Option::is_some) {
                rows.push(TableRow {
                    method: m.clone(),
                    metric: Metric::Acceleration,
                    cells: accel,
                });
            }
        }
        Ok(Self { betas, rows })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method".to_string(), "metric".to_string()];
        header.extend(self.betas.iter().map(|b| b.to_string()));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.method.clone(), metric_name(row.metric).to_string()];
            rec.extend(row.cells.iter().map(|c| c.map_or(String::new(), |v| v.to_string())));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| PicoreError::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| PicoreError::Format(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.clone();
        if header.len() < 2 || &header[0] != "method" || &header[1] != "metric" {
            return Err(PicoreError::Format("table header must start with method,metric".into()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| PicoreError::Format(format!("{s:?}: {e}")));
        let betas = header.iter().skip(2).map(num).collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let metric = match &rec[1] {
                "nrmse" => Metric::Nrmse,
                "acceleration" => Metric::Acceleration,
                other => return Err(PicoreError::Format(format!("unknown metric {other:?}"))),
            };
            let cells = rec
                .iter()
                .skip(2)
                .map(|s| if s.is_empty() { Ok(None) } else { num(s).map(Some) })
                .collect::<Result<Vec<_>>>()?;
            rows.push(TableRow {
                method: rec[0].to_string(),
                metric,
                cells,
            });
        }
        Ok(Self { betas, rows })
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Method |");
        for b in &self.betas {
            let _ = write!(out, " {}% |", trim_pct(b * 100.0));
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(self.betas.len()));
        out.push('\n');
        for row in &self.rows {
            let label = match row.metric {
                Metric::Nrmse => row.method.clone(),
                Metric::Acceleration => format!("{} (acceleration)", row.method),
            };
            let _ = write!(out, "| {label} |");
            for c in &row.cells {
                match (c, row.metric) {
                    (None, _) => out.push_str(" – |"),
                    (Some(v), Metric::Nrmse) => {
                        let _ = write!(out, " {v:.3e} |");
                    }
                    (Some(v), Metric::Acceleration) => {
                        let _ = write!(out, " {v:.2}x |");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Nrmse => "nrmse",
        Metric::Acceleration => "acceleration",
    }
}

fn trim_pct(p: f64) -> String {
    let s = format!("{p:.1}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

/// Rendered comparison: the table plus its CSV and Markdown forms.
#[derive(Clone, Debug)]
pub struct RenderedReport {
    pub table: ReportTable,
    pub csv: String,
    pub markdown: String,
}

pub fn render_report(reports: &[ExperimentReport]) -> Result<RenderedReport> {
    let table = ReportTable::from_reports(reports)?;
    Ok(RenderedReport {
        csv: table.to_csv()?,
        markdown: table.to_markdown(),
        table,
    })
}
