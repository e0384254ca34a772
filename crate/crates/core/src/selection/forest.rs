//! Random-forest classifier used as the importance oracle.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SelectionError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` uses `floor(sqrt(p))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            max_features: None,
            bootstrap: true,
        }
    }
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

struct TreeBuilder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [u8],
    mtry: usize,
    max_depth: usize,
    rng: ChaCha8Rng,
    importance: Vec<f64>,
    splits: usize,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) {
        let n = rows.len() as f64;
        let pos = rows.iter().filter(|&&r| self.y[r] == 1).count() as f64;
        if depth >= self.max_depth || pos == 0.0 || pos == n || rows.len() < 2 {
            return;
        }
        let parent = n * gini(pos, n);
        let p = self.x.ncols();
        let candidates = sample(&mut self.rng, p, self.mtry.min(p));
        // (decrease, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
        for f in candidates.iter() {
            order.clear();
            order.extend(rows.iter().map(|&r| (self.x[[r, f]], self.y[r])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0.0;
            for i in 0..order.len() - 1 {
                left_pos += f64::from(order[i].1);
                if order[i].0 == order[i + 1].0 {
                    continue;
                }
                let nl = (i + 1) as f64;
                let nr = n - nl;
                let dec = parent - nl * gini(left_pos, nl) - nr * gini(pos - left_pos, nr);
                if dec > 1e-12 && best.is_none_or(|b| dec > b.0) {
                    best = Some((dec, f, 0.5 * (order[i].0 + order[i + 1].0)));
                }
            }
        }
        let Some((dec, f, thr)) = best else {
            return;
        };
        self.importance[f] += dec;
        self.splits += 1;
        let mut k = 0;
        for i in 0..rows.len() {
            if self.x[[rows[i], f]] <= thr {
                rows.swap(i, k);
                k += 1;
            }
        }
        let (left, right) = rows.split_at_mut(k);
        self.grow(left, depth + 1);
        self.grow(right, depth + 1);
    }
}

/// Mean-decrease-in-impurity importances from a bagged Gini forest.
///
/// Each tree's importances are normalised to sum to one; trees without any
/// split are left out of the average. The result sums to one.
pub fn rf_importance(x: ArrayView2<f64>, y: &[u8], cfg: &ForestConfig, seed: u64) -> Result<Vec<f64>, SelectionError> {
    let (n, p) = x.dim();
    if n != y.len() {
        return Err(SelectionError::Shape { rows: n, labels: y.len() });
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(SelectionError::NaN);
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == n {
        return Err(SelectionError::SingleClass);
    }
    let mtry = cfg
        .max_features
        .unwrap_or_else(|| (p as f64).sqrt().floor() as usize)
        .clamp(1, p.max(1));
    let trees: Vec<Option<Vec<f64>>> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64 + 1);
            let mut rows: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = TreeBuilder {
                x,
                y,
                mtry,
                max_depth: cfg.max_depth,
                rng,
                importance: vec![0.0; p],
                splits: 0,
            };
            b.grow(&mut rows, 0);
            let total: f64 = b.importance.iter().sum();
            (b.splits > 0 && total > 0.0).then(|| b.importance.iter().map(|v| v / total).collect())
        })
        .collect();
    let mut acc = vec![0.0; p];
    let mut used = 0usize;
    for imp in trees.into_iter().flatten() {
        used += 1;
        acc.iter_mut().zip(imp).for_each(|(a, v)| *a += v);
    }
    let total: f64 = acc.iter().sum();
    if used == 0 || total <= 0.0 {
        return Ok(vec![1.0 / p as f64; p]);
    }
    Ok(acc.into_iter().map(|v| v / total).collect())
}
