//! Cross-validation, metrics, significance statistics and reports.

pub mod cv;
pub mod metrics;
pub mod report;
pub mod stats;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cv::{subject_kfold_split, FoldPlan, PatientSummary};
pub use metrics::{average_precision, compute_metrics, roc_auc, AverageMode, MetricSet};
pub use stats::{bh_fdr, cliffs_delta, wilcoxon_signed_rank};

use crate::models::{ModelError, TrainedModel};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {a} labels vs {b} scores")]
    Length { a: usize, b: usize },
    #[error("no samples to evaluate")]
    Empty,
    #[error("label {0} is not 0 or 1")]
    Label(u8),
    #[error("{patients} patients cannot fill {k} folds")]
    Folds { patients: usize, k: usize },
    #[error("both classes are required")]
    SingleClass,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub metric: String,
    pub comparison: String,
    pub n: usize,
    pub mean_improvement: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub cliffs_delta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub rows: Vec<StatRow>,
}

/// One paired comparison: the same units measured before and after.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub metric: String,
    pub label: String,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
}

/// Wilcoxon p per comparison on `after − before`, BH-adjusted across all
/// comparisons, with Cliff's delta of `after` against `before`.
pub fn stat_report(comparisons: &[Comparison]) -> StatReport {
    let mut rows: Vec<StatRow> = comparisons
        .iter()
        .map(|c| {
            let diffs: Vec<f64> = c.after.iter().zip(&c.before).map(|(a, b)| a - b).collect();
            let n = diffs.len();
            StatRow {
                metric: c.metric.clone(),
                comparison: c.label.clone(),
                n,
                mean_improvement: if n == 0 { 0.0 } else { diffs.iter().sum::<f64>() / n as f64 },
                p_raw: wilcoxon_signed_rank(&diffs),
                p_adjusted: f64::NAN,
                cliffs_delta: if n == 0 { 0.0 } else { cliffs_delta(&c.after, &c.before) },
            }
        })
        .collect();
    let raw: Vec<f64> = rows.iter().map(|r| r.p_raw).collect();
    for (r, a) in rows.iter_mut().zip(bh_fdr(&raw)) {
        r.p_adjusted = a;
    }
    StatReport { rows }
}

/// Mean drop in ROC AUC when one column is shuffled, per feature.
pub fn permutation_importance(
    model: &TrainedModel,
    x: ArrayView2<f64>,
    features: &[String],
    y: &[u8],
    repeats: usize,
    seed: u64,
) -> Result<Vec<f64>, EvalError> {
    let base_p = model.predict_proba(x, features)?;
    let base = roc_auc(y, &base_p).ok_or(EvalError::SingleClass)?;
    let mut out = Vec::with_capacity(x.ncols());
    let mut work = x.to_owned();
    for j in 0..x.ncols() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        let original: Vec<f64> = x.column(j).to_vec();
        let mut col = original.clone();
        let mut drop = 0.0;
        for _ in 0..repeats {
            col.shuffle(&mut rng);
            work.column_mut(j).iter_mut().zip(&col).for_each(|(w, v)| *w = *v);
            let p = model.predict_proba(work.view(), features)?;
            drop += base - roc_auc(y, &p).expect("labels unchanged");
        }
        work.column_mut(j).iter_mut().zip(&original).for_each(|(w, v)| *w = *v);
        out.push(if repeats == 0 { 0.0 } else { drop / repeats as f64 });
    }
    Ok(out)
}
