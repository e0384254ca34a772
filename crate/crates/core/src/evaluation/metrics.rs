//! Ranking and threshold metrics for binary epoch classification.

use serde::{Deserialize, Serialize};

use super::EvalError;

/// How precision, sensitivity, specificity and F1 are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AverageMode {
    /// Positive class only.
    #[default]
    Binary,
    /// Support-weighted mean over both classes, each taken as positive in
    /// turn. Weighted sensitivity then equals accuracy.
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    /// `None` when only one class is present.
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub accuracy: f64,
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    pub mse: f64,
}

impl MetricSet {
    pub const NAMES: [&'static str; 8] = [
        "roc_auc",
        "pr_auc",
        "accuracy",
        "precision",
        "sensitivity",
        "specificity",
        "f1",
        "mse",
    ];

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "roc_auc" => self.roc_auc,
            "pr_auc" => self.pr_auc,
            "accuracy" => Some(self.accuracy),
            "precision" => Some(self.precision),
            "sensitivity" => Some(self.sensitivity),
            "specificity" => Some(self.specificity),
            "f1" => Some(self.f1),
            "mse" => Some(self.mse),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn new(y: &[u8], prob: &[f64], threshold: f64) -> Self {
        let mut c = Self::default();
        for (&t, &p) in y.iter().zip(prob) {
            match (t == 1, p >= threshold) {
                (true, true) => c.tp += 1,
                (true, false) => c.fn_ += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }
}

/// `a / b`, or 0 when `b` is 0.
fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Sorts indices by descending score and yields `(positives, negatives)`
/// per group of tied scores.
fn tie_groups(y: &[u8], score: &[f64]) -> Vec<(u64, u64)> {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]));
    let mut groups: Vec<(u64, u64)> = Vec::new();
    let mut prev: Option<f64> = None;
    for i in idx {
        if prev != Some(score[i]) {
            groups.push((0, 0));
            prev = Some(score[i]);
        }
        let g = groups.last_mut().expect("pushed");
        if y[i] == 1 {
            g.0 += 1;
        } else {
            g.1 += 1;
        }
    }
    groups
}

/// Mann–Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half.
pub fn roc_auc(y: &[u8], score: &[f64]) -> Option<f64> {
    let pos = y.iter().filter(|&&v| v == 1).count() as u64;
    let neg = y.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    // Twice the number of concordant pairs, walking from the lowest score.
    let mut twice = 0u64;
    let mut neg_below = 0u64;
    for (p, n) in tie_groups(y, score).into_iter().rev() {
        twice += p * (2 * neg_below + n);
        neg_below += n;
    }
    Some(twice as f64 / (2 * pos * neg) as f64)
}

/// Average precision: `Σ (R_k − R_{k−1}) · P_k` over descending distinct
/// score thresholds.
pub fn average_precision(y: &[u8], score: &[f64]) -> Option<f64> {
    let pos = y.iter().filter(|&&v| v == 1).count() as u64;
    if pos == 0 || pos == y.len() as u64 {
        return None;
    }
    let (mut tp, mut pp) = (0u64, 0u64);
    let mut ap = 0.0;
    for (p, n) in tie_groups(y, score) {
        tp += p;
        pp += p + n;
        if p > 0 {
            ap += (p as f64 / pos as f64) * (tp as f64 / pp as f64);
        }
    }
    Some(ap)
}

/// ROC curve points `(fpr, tpr)` from (0, 0) to (1, 1), one per distinct
/// score.
pub fn roc_points(y: &[u8], score: &[f64]) -> Vec<(f64, f64)> {
    let pos = y.iter().filter(|&&v| v == 1).count() as u64;
    let neg = y.len() as u64 - pos;
    let mut pts = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    for (p, n) in tie_groups(y, score) {
        tp += p;
        fp += n;
        pts.push((ratio(fp, neg), ratio(tp, pos)));
    }
    pts
}

pub fn compute_metrics(y: &[u8], prob: &[f64], threshold: f64, mode: AverageMode) -> Result<MetricSet, EvalError> {
    if y.len() != prob.len() {
        return Err(EvalError::Length { a: y.len(), b: prob.len() });
    }
    if y.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(v) = y.iter().find(|&&v| v > 1) {
        return Err(EvalError::Label(*v));
    }
    let c = Confusion::new(y, prob, threshold);
    let n = y.len() as u64;
    let accuracy = ratio(c.tp + c.tn, n);
    let mse = y
        .iter()
        .zip(prob)
        .map(|(&t, &p)| (p - f64::from(t)).powi(2))
        .sum::<f64>()
        / n as f64;
    let (precision, sensitivity, specificity, f1v) = match mode {
        AverageMode::Binary => {
            let precision = ratio(c.tp, c.tp + c.fp);
            let sensitivity = ratio(c.tp, c.tp + c.fn_);
            (precision, sensitivity, ratio(c.tn, c.tn + c.fp), f1(precision, sensitivity))
        }
        AverageMode::Weighted => {
            let pos = c.tp + c.fn_;
            let neg = c.tn + c.fp;
            let w1 = pos as f64 / n as f64;
            let w0 = neg as f64 / n as f64;
            let (p1, r1) = (ratio(c.tp, c.tp + c.fp), ratio(c.tp, pos));
            let (p0, r0) = (ratio(c.tn, c.tn + c.fn_), ratio(c.tn, neg));
            (
                w1 * p1 + w0 * p0,
                // Support-weighted recall reduces to the correct fraction.
                accuracy,
                w1 * r0 + w0 * r1,
                w1 * f1(p1, r1) + w0 * f1(p0, r0),
            )
        }
    };
    Ok(MetricSet {
        roc_auc: roc_auc(y, prob),
        pr_auc: average_precision(y, prob),
        accuracy,
        precision,
        sensitivity,
        specificity,
        f1: f1v,
        mse,
    })
}
