//! Boruta all-relevant feature selection.

pub mod forest;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete, DiscreteCDF};

pub use forest::{rf_importance, ForestConfig};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SelectionError {
    #[error("feature matrix has {rows} rows but {labels} labels")]
    Shape { rows: usize, labels: usize },
    #[error("feature matrix contains NaN")]
    NaN,
    #[error("labels contain a single class; both classes are required")]
    SingleClass,
    #[error("invalid Boruta setting: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BorutaConfig {
    pub n_iterations: usize,
    pub forest: ForestConfig,
    /// Family-wise significance level, Bonferroni-corrected over features.
    pub alpha: f64,
    /// Whether tentative features are kept for training.
    pub keep_tentative: bool,
}

impl Default for BorutaConfig {
    fn default() -> Self {
        Self {
            n_iterations: 20,
            forest: ForestConfig::default(),
            alpha: 0.05,
            keep_tentative: true,
        }
    }
}

impl BorutaConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.n_iterations == 0 {
            return Err(SelectionError::Config("n_iterations must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SelectionError::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.forest.n_trees == 0 || self.forest.max_depth == 0 {
            return Err(SelectionError::Config("forest needs at least one tree of depth 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub confirmed: Vec<String>,
    pub rejected: Vec<String>,
    pub tentative: Vec<String>,
    pub hits: Vec<usize>,
    /// Real-feature importances per iteration.
    pub history: Vec<Vec<f64>>,
    /// Largest shadow importance per iteration.
    pub shadow_max: Vec<f64>,
    pub keep_tentative: bool,
}

impl SelectionReport {
    /// Names used downstream, in the input order.
    pub fn selected(&self, all: &[String]) -> Vec<String> {
        all.iter()
            .filter(|n| self.confirmed.contains(n) || (self.keep_tentative && self.tentative.contains(n)))
            .cloned()
            .collect()
    }
}

/// Two-sided exact binomial test of `k` successes in `n` trials at `p = 0.5`.
pub fn binomial_two_sided(k: usize, n: usize) -> f64 {
    let dist = Binomial::new(0.5, n as u64).expect("valid binomial");
    let lower = dist.cdf(k as u64);
    let upper = if k == 0 { 1.0 } else { 1.0 - dist.cdf(k as u64 - 1) };
    // Guard against cdf rounding at the extremes.
    let upper = upper.max(dist.pmf(k as u64));
    (2.0 * lower.min(upper)).min(1.0)
}

/// Boruta: each iteration appends an independently shuffled copy of every
/// feature, fits a forest, and scores a hit for every real feature whose
/// importance exceeds the best shadow. Hit counts are then tested against
/// chance with a Bonferroni-corrected two-sided binomial test.
pub fn boruta_select(
    x: ArrayView2<f64>,
    y: &[u8],
    names: &[String],
    cfg: &BorutaConfig,
    seed: u64,
) -> Result<SelectionReport, SelectionError> {
    cfg.validate()?;
    let (n, p) = x.dim();
    if names.len() != p {
        return Err(SelectionError::Config(format!("{} names for {p} features", names.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0usize; p];
    let mut history = Vec::with_capacity(cfg.n_iterations);
    let mut shadow_max = Vec::with_capacity(cfg.n_iterations);
    for it in 0..cfg.n_iterations {
        let mut shadow = Array2::<f64>::zeros((n, p));
        let mut perm: Vec<usize> = (0..n).collect();
        for j in 0..p {
            perm.shuffle(&mut rng);
            for (i, &src) in perm.iter().enumerate() {
                shadow[[i, j]] = x[[src, j]];
            }
        }
        let full = concatenate(Axis(1), &[x, shadow.view()]).expect("same row count");
        let imp = rf_importance(full.view(), y, &cfg.forest, seed ^ ((it as u64 + 1) << 32))?;
        let best_shadow = imp[p..].iter().copied().fold(0.0, f64::max);
        for j in 0..p {
            if imp[j] > best_shadow {
                hits[j] += 1;
            }
        }
        history.push(imp[..p].to_vec());
        shadow_max.push(best_shadow);
    }
    let alpha = cfg.alpha / p.max(1) as f64;
    let half = cfg.n_iterations as f64 / 2.0;
    let mut report = SelectionReport {
        confirmed: Vec::new(),
        rejected: Vec::new(),
        tentative: Vec::new(),
        hits: hits.clone(),
        history,
        shadow_max,
        keep_tentative: cfg.keep_tentative,
    };
    for (j, &h) in hits.iter().enumerate() {
        let pval = binomial_two_sided(h, cfg.n_iterations);
        let bucket = if pval < alpha && h as f64 > half {
            &mut report.confirmed
        } else if pval < alpha && (h as f64) < half {
            &mut report.rejected
        } else {
            &mut report.tentative
        };
        bucket.push(names[j].clone());
    }
    Ok(report)
}
