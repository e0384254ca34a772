//! CSV and plain-text renderings of evaluation results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{MetricSet, StatReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    /// Fold index as text, or `all` for pooled rows.
    pub fold: String,
    /// `raw` or `postprocessed`.
    pub stage: String,
    pub n_epochs: usize,
    pub metrics: MetricSet,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "NA".into())
}

pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["model", "fold", "stage", "n_epochs"];
    header.extend(MetricSet::NAMES);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.model.clone(), r.fold.clone(), r.stage.clone(), r.n_epochs.to_string()];
        rec.extend(MetricSet::NAMES.iter().map(|n| fmt_opt(r.metrics.get(n))));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stats_csv<W: Write>(out: W, report: &StatReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "comparison", "n", "mean_improvement", "p_raw", "p_adjusted", "cliffs_delta"])?;
    for r in &report.rows {
        w.write_record([
            r.metric.clone(),
            r.comparison.clone(),
            r.n.to_string(),
            format!("{:.6}", r.mean_improvement),
            format!("{:.6e}", r.p_raw),
            format!("{:.6e}", r.p_adjusted),
            format!("{:.6}", r.cliffs_delta),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `(model, fold, fpr, tpr)` rows for plotting ROC curves.
pub fn write_roc_csv<W: Write>(out: W, curves: &[(String, String, Vec<(f64, f64)>)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "fold", "fpr", "tpr"])?;
    for (model, fold, pts) in curves {
        for (fpr, tpr) in pts {
            w.write_record([model.clone(), fold.clone(), format!("{fpr:.6}"), format!("{tpr:.6}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

/// Five-number summary with linear-interpolated quartiles, plus mean and
/// sample standard deviation.
pub fn box_summary(values: &[f64]) -> Option<BoxSummary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(BoxSummary {
        n: v.len(),
        min: v[0],
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: v[v.len() - 1],
        mean,
        std,
    })
}

/// Per (model, stage, metric) summaries over the per-fold rows.
pub fn fold_summaries(rows: &[MetricRow]) -> BTreeMap<(String, String, String), BoxSummary> {
    let mut groups: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.fold != "all") {
        for name in MetricSet::NAMES {
            if let Some(v) = r.metrics.get(name) {
                groups
                    .entry((r.model.clone(), r.stage.clone(), name.to_string()))
                    .or_default()
                    .push(v);
            }
        }
    }
    groups
        .into_iter()
        .filter_map(|(k, v)| box_summary(&v).map(|b| (k, b)))
        .collect()
}

pub fn write_box_csv<W: Write>(out: W, rows: &[MetricRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "stage", "metric", "n", "min", "q1", "median", "q3", "max", "mean", "std"])?;
    for ((model, stage, metric), b) in fold_summaries(rows) {
        let mut rec = vec![model, stage, metric, b.n.to_string()];
        rec.extend([b.min, b.q1, b.median, b.q3, b.max, b.mean, b.std].iter().map(|v| format!("{v:.6}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable summary: mean ± std per model and metric, then the
/// significance table.
pub fn text_report(rows: &[MetricRow], stats: Option<&StatReport>) -> String {
    let mut s = String::new();
    let summaries = fold_summaries(rows);
    let mut keys: Vec<(String, String)> = summaries.keys().map(|(m, st, _)| (m.clone(), st.clone())).collect();
    keys.dedup();
    let _ = writeln!(s, "Per-fold performance (mean ± std)");
    let _ = write!(s, "{:<14}{:<15}", "model", "stage");
    for n in MetricSet::NAMES {
        let _ = write!(s, "{n:>18}");
    }
    let _ = writeln!(s);
    for (model, stage) in keys {
        let _ = write!(s, "{model:<14}{stage:<15}");
        for n in MetricSet::NAMES {
            let cell = summaries
                .get(&(model.clone(), stage.clone(), n.to_string()))
                .map(|b| format!("{:.4}±{:.4}", b.mean, b.std))
                .unwrap_or_else(|| "NA".into());
            let _ = write!(s, "{cell:>18}");
        }
        let _ = writeln!(s);
    }
    if let Some(st) = stats {
        let _ = writeln!(s, "\nPost-processing effect (Wilcoxon signed-rank, BH-adjusted)");
        let _ = writeln!(
            s,
            "{:<14}{:<20}{:>4}{:>14}{:>12}{:>12}{:>10}",
            "metric", "comparison", "n", "mean_impr", "p", "p_adj", "delta"
        );
        for r in &st.rows {
            let _ = writeln!(
                s,
                "{:<14}{:<20}{:>4}{:>14.6}{:>12.3e}{:>12.3e}{:>10.3}",
                r.metric, r.comparison, r.n, r.mean_improvement, r.p_raw, r.p_adjusted, r.cliffs_delta
            );
        }
    }
    s
}
