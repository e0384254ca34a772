//! Random hyper-parameter search over discrete grids.

use ndarray::{ArrayView2, Axis};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, ModelKind, OptimiserKind, TrainConfig, HIDDEN1, HIDDEN2, HIDDEN3};
use crate::evaluation::metrics::roc_auc;

/// Candidate values for each tunable field. Empty lists leave the base
/// config's value untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpace {
    pub learning_rate: Vec<f64>,
    pub weight_decay: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub optimiser: Vec<OptimiserKind>,
    pub hidden1: Vec<usize>,
    pub hidden2: Vec<usize>,
    pub hidden3: Vec<usize>,
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_child_weight: Vec<f64>,
    pub subsample: Vec<f64>,
    pub colsample: Vec<f64>,
    pub reg_alpha: Vec<f64>,
    pub reg_lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub max_delta_step: Vec<f64>,
    pub num_parallel_tree: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: Vec::new(),
            weight_decay: Vec::new(),
            batch_size: Vec::new(),
            optimiser: Vec::new(),
            hidden1: Vec::new(),
            hidden2: Vec::new(),
            hidden3: Vec::new(),
            n_estimators: Vec::new(),
            max_depth: Vec::new(),
            min_child_weight: Vec::new(),
            subsample: Vec::new(),
            colsample: Vec::new(),
            reg_alpha: Vec::new(),
            reg_lambda: Vec::new(),
            gamma: Vec::new(),
            max_delta_step: Vec::new(),
            num_parallel_tree: Vec::new(),
        }
    }
}

/// `steps` points from `lo` to `hi`, evenly spaced in log space.
pub fn geomspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..steps)
        .map(|k| (a + (b - a) * k as f64 / (steps - 1) as f64).exp())
        .collect()
}

/// `10^e` for `steps` exponents evenly spaced from `lo` to `hi`.
pub fn logspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (steps - 1) as f64))
        .collect()
}

fn step_range(lo: usize, hi: usize, step: usize) -> Vec<usize> {
    (lo..=hi).step_by(step).collect()
}

impl SearchSpace {
    /// The published search space for one model family.
    pub fn published(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Logreg | ModelKind::Mlp => {
                let mut s = Self {
                    learning_rate: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2],
                    weight_decay: vec![1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
                    batch_size: step_range(32, 128, 32),
                    optimiser: vec![OptimiserKind::Adam, OptimiserKind::Adamw, OptimiserKind::Sgd],
                    ..Default::default()
                };
                if kind == ModelKind::Mlp {
                    s.hidden1 = HIDDEN1.to_vec();
                    s.hidden2 = HIDDEN2.to_vec();
                    s.hidden3 = HIDDEN3.to_vec();
                }
                s
            }
            ModelKind::Gbt => Self {
                learning_rate: vec![0.001, 0.01, 0.05, 0.1, 0.2, 0.3],
                batch_size: step_range(32, 256, 32),
                max_depth: logspace(0.7, 1.6, 10).into_iter().map(|v| v.round() as usize).collect(),
                min_child_weight: logspace(0.5, 4.0, 10),
                reg_alpha: geomspace(0.001, 10.0, 10),
                reg_lambda: geomspace(0.001, 10.0, 10),
                gamma: geomspace(1e-6, 0.2, 10),
                max_delta_step: geomspace(0.1, 10.0, 10),
                colsample: geomspace(0.3, 10.0, 10).into_iter().map(|v| v.min(1.0)).collect(),
                num_parallel_tree: step_range(100, 900, 100),
                n_estimators: step_range(200, 1000, 100),
                subsample: vec![0.55, 0.6, 0.70, 0.85],
                ..Default::default()
            },
        }
    }

    /// Draws one config: every non-empty grid contributes a uniform choice,
    /// in field declaration order.
    pub fn sample(&self, base: &TrainConfig, rng: &mut ChaCha8Rng) -> TrainConfig {
        fn pick<T: Copy>(grid: &[T], slot: &mut T, rng: &mut ChaCha8Rng) {
            if let Some(v) = grid.choose(rng) {
                *slot = *v;
            }
        }
        let mut c = base.clone();
        pick(&self.learning_rate, &mut c.learning_rate, rng);
        pick(&self.weight_decay, &mut c.weight_decay, rng);
        pick(&self.batch_size, &mut c.batch_size, rng);
        pick(&self.optimiser, &mut c.optimiser, rng);
        pick(&self.hidden1, &mut c.hidden[0], rng);
        pick(&self.hidden2, &mut c.hidden[1], rng);
        pick(&self.hidden3, &mut c.hidden[2], rng);
        let g = &mut c.gbt;
        pick(&self.n_estimators, &mut g.n_estimators, rng);
        pick(&self.max_depth, &mut g.max_depth, rng);
        pick(&self.min_child_weight, &mut g.min_child_weight, rng);
        pick(&self.subsample, &mut g.subsample, rng);
        pick(&self.colsample, &mut g.colsample, rng);
        pick(&self.reg_alpha, &mut g.reg_alpha, rng);
        pick(&self.reg_lambda, &mut g.reg_lambda, rng);
        pick(&self.gamma, &mut g.gamma, rng);
        pick(&self.max_delta_step, &mut g.max_delta_step, rng);
        pick(&self.num_parallel_tree, &mut g.num_parallel_tree, rng);
        c
    }

    /// Whether every tuned field of `cfg` is one of this space's values.
    pub fn contains(&self, cfg: &TrainConfig) -> bool {
        fn has<T: PartialEq>(grid: &[T], v: &T) -> bool {
            grid.is_empty() || grid.contains(v)
        }
        let g = &cfg.gbt;
        has(&self.learning_rate, &cfg.learning_rate)
            && has(&self.weight_decay, &cfg.weight_decay)
            && has(&self.batch_size, &cfg.batch_size)
            && has(&self.optimiser, &cfg.optimiser)
            && has(&self.hidden1, &cfg.hidden[0])
            && has(&self.hidden2, &cfg.hidden[1])
            && has(&self.hidden3, &cfg.hidden[2])
            && has(&self.n_estimators, &g.n_estimators)
            && has(&self.max_depth, &g.max_depth)
            && has(&self.min_child_weight, &g.min_child_weight)
            && has(&self.subsample, &g.subsample)
            && has(&self.colsample, &g.colsample)
            && has(&self.reg_alpha, &g.reg_alpha)
            && has(&self.reg_lambda, &g.reg_lambda)
            && has(&self.gamma, &g.gamma)
            && has(&self.max_delta_step, &g.max_delta_step)
            && has(&self.num_parallel_tree, &g.num_parallel_tree)
    }

    pub fn is_subset_of(&self, other: &SearchSpace) -> bool {
        fn sub<T: PartialEq>(a: &[T], b: &[T]) -> bool {
            b.is_empty() || a.iter().all(|v| b.contains(v))
        }
        sub(&self.learning_rate, &other.learning_rate)
            && sub(&self.weight_decay, &other.weight_decay)
            && sub(&self.batch_size, &other.batch_size)
            && sub(&self.optimiser, &other.optimiser)
            && sub(&self.hidden1, &other.hidden1)
            && sub(&self.hidden2, &other.hidden2)
            && sub(&self.hidden3, &other.hidden3)
            && sub(&self.n_estimators, &other.n_estimators)
            && sub(&self.max_depth, &other.max_depth)
            && sub(&self.min_child_weight, &other.min_child_weight)
            && sub(&self.subsample, &other.subsample)
            && sub(&self.colsample, &other.colsample)
            && sub(&self.reg_alpha, &other.reg_alpha)
            && sub(&self.reg_lambda, &other.reg_lambda)
            && sub(&self.gamma, &other.gamma)
            && sub(&self.max_delta_step, &other.max_delta_step)
            && sub(&self.num_parallel_tree, &other.num_parallel_tree)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub config: TrainConfig,
    /// Mean validation AUC over folds where it is defined.
    pub mean_auc: Option<f64>,
    pub size: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: TrainConfig,
    pub trials: Vec<Trial>,
}

/// Samples the full trial sequence; trial `t` trains with seed `seed + t`.
pub fn sample_trials(space: &SearchSpace, base: &TrainConfig, budget: usize, seed: u64) -> Vec<TrainConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..budget)
        .map(|t| TrainConfig {
            seed: seed.wrapping_add(t as u64),
            ..space.sample(base, &mut rng)
        })
        .collect()
}

/// Seeded random search. Each trial is fitted on every fold's training rows
/// and scored by validation AUC. The best mean AUC wins; ties go to the
/// smaller model, then to the lexicographically smaller config JSON.
pub fn tune(
    base: &TrainConfig,
    space: &SearchSpace,
    budget: usize,
    x: ArrayView2<f64>,
    y: &[u8],
    features: &[String],
    folds: &[(Vec<usize>, Vec<usize>)],
    seed: u64,
) -> TuneResult {
    let budget = budget.max(1);
    let configs = sample_trials(space, base, budget, seed);
    let trials: Vec<Trial> = configs
        .into_par_iter()
        .map(|config| {
            let size = config.model_size(x.ncols());
            let mut aucs = Vec::new();
            let mut error = None;
            for (train, val) in folds {
                let xt = x.select(Axis(0), train);
                let yt: Vec<u8> = train.iter().map(|&i| y[i]).collect();
                let xv = x.select(Axis(0), val);
                let yv: Vec<u8> = val.iter().map(|&i| y[i]).collect();
                match fit(xt.view(), &yt, features, &config, Some((xv.view(), &yv))) {
                    Ok(m) => {
                        let p = m.predict_proba(xv.view(), features).expect("same manifest");
                        if let Some(a) = roc_auc(&yv, &p) {
                            aucs.push(a);
                        }
                    }
                    Err(e) => {
                        error = Some(e.to_string());
                        break;
                    }
                }
            }
            let mean_auc = (error.is_none() && !aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);
            Trial {
                config,
                mean_auc,
                size,
                error,
            }
        })
        .collect();
    let key = |t: &Trial| serde_json::to_string(&t.config).expect("config serialises");
    let best = trials
        .iter()
        .min_by(|a, b| {
            let (sa, sb) = (a.mean_auc.unwrap_or(f64::NEG_INFINITY), b.mean_auc.unwrap_or(f64::NEG_INFINITY));
            sb.total_cmp(&sa).then(a.size.cmp(&b.size)).then_with(|| key(a).cmp(&key(b)))
        })
        .expect("budget at least one")
        .config
        .clone();
    TuneResult { best, trials }
}
