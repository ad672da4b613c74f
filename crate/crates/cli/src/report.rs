//! Aggregation of per-run metrics into plot-ready tables.

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cli::ReportArgs;
use crate::commands::RECOVERY_COLUMNS;
use crate::error::{CliError, Result};
use crate::io;
use crate::table::Table;

const SUMMARIZED: [&str; 5] = [
    "mean_cosine",
    "rand_index",
    "alignment_cost",
    "bow_log_likelihood_nats",
    "qa_log_likelihood_nats",
];
const CALIBRATION_COLUMNS: [&str; 5] = [
    "bin_lower",
    "bin_upper",
    "count",
    "mean_confidence",
    "accuracy",
];
const CE_COLUMNS: [&str; 3] = ["documents", "questions", "cross_entropy_nats"];

/// Mean and 95% Student-t half-width; the half-width is `None` below two
/// samples.
pub fn mean_ci95(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, Some(t * (var / n).sqrt()))
}

fn label(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn parse(path: &Path, line: usize, v: &str) -> Result<Option<f64>> {
    if v.is_empty() {
        return Ok(None);
    }
    v.parse().map(Some).map_err(|_| CliError::Format {
        path: path.into(),
        line,
        message: format!("`{v}` is not a number"),
    })
}

type GroupKey = (String, String, String);

pub fn report(args: &ReportArgs) -> Result<()> {
    let mut groups: BTreeMap<GroupKey, BTreeMap<&'static str, Vec<f64>>> = BTreeMap::new();
    let mut series = Table::new(&[
        "model",
        "bin_lower",
        "bin_upper",
        "count",
        "mean_confidence",
        "accuracy",
    ]);
    let mut ce = Table::new(&["model", "documents", "questions", "cross_entropy_nats"]);
    let mut found = false;

    for dir in &args.inputs {
        let metrics_path = dir.join("metrics.csv");
        if metrics_path.exists() {
            found = true;
            let t = Table::read(&metrics_path)?;
            if t.has_columns(&RECOVERY_COLUMNS) {
                let col = |n: &str| t.column(n).expect("checked");
                for (i, row) in t.rows.iter().enumerate() {
                    let key = (
                        row[col("alpha")].clone(),
                        row[col("beta")].clone(),
                        row[col("k_est")].clone(),
                    );
                    let g = groups.entry(key).or_default();
                    for m in SUMMARIZED {
                        if let Some(v) = parse(&metrics_path, i + 2, &row[col(m)])? {
                            g.entry(m).or_default().push(v);
                        }
                    }
                }
            } else if t.has_columns(&CE_COLUMNS) {
                for row in &t.rows {
                    let mut out = vec![label(dir)];
                    out.extend(
                        CE_COLUMNS
                            .iter()
                            .map(|c| row[t.column(c).expect("checked")].clone()),
                    );
                    ce.row(out);
                }
            } else {
                return Err(CliError::Format {
                    path: metrics_path,
                    line: 1,
                    message: "unrecognized metrics columns".into(),
                });
            }
        }
        let cal_path = dir.join("calibration.csv");
        if cal_path.exists() {
            found = true;
            let t = Table::read(&cal_path)?;
            if !t.has_columns(&CALIBRATION_COLUMNS) {
                return Err(CliError::Format {
                    path: cal_path,
                    line: 1,
                    message: "unrecognized calibration columns".into(),
                });
            }
            for row in &t.rows {
                let mut out = vec![label(dir)];
                out.extend(
                    CALIBRATION_COLUMNS
                        .iter()
                        .map(|c| row[t.column(c).expect("checked")].clone()),
                );
                series.row(out);
            }
        }
        if !dir.join("metrics.csv").exists() && !cal_path.exists() {
            warn!(
                "{} holds neither metrics.csv nor calibration.csv",
                dir.display()
            );
        }
    }
    if !found {
        return Err(CliError::Data(
            "no metrics found in the input directories".into(),
        ));
    }

    let mut summary = Table::new(&["alpha", "beta", "k_est", "metric", "n", "mean", "ci95"]);
    for ((alpha, beta, k), metrics) in &groups {
        for (m, xs) in metrics {
            let (mean, ci) = mean_ci95(xs);
            if ci.is_none() {
                warn!("one run for alpha={alpha} beta={beta} k_est={k}; no confidence interval for {m}");
            }
            summary.row(vec![
                alpha.clone(),
                beta.clone(),
                k.clone(),
                m.to_string(),
                xs.len().to_string(),
                mean.to_string(),
                ci.map(|c| c.to_string()).unwrap_or_default(),
            ]);
        }
    }
    io::create_dir(&args.out)?;
    summary.write(&args.out.join("recovery_summary.csv"))?;
    series.write(&args.out.join("calibration_series.csv"))?;
    ce.write(&args.out.join("cross_entropy.csv"))
}
