//! Second-order gradient-boosted trees on logistic loss.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{bce_logit, sigmoid};
use super::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbtParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub subsample: f64,
    /// Fraction of columns per tree; values above 1 are clipped.
    pub colsample: f64,
    pub reg_alpha: f64,
    pub reg_lambda: f64,
    pub gamma: f64,
    /// Maximum absolute leaf weight before shrinkage; 0 disables the clip.
    pub max_delta_step: f64,
    pub num_parallel_tree: usize,
    pub max_bins: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_estimators: 200,
            max_depth: 6,
            min_child_weight: 1.0,
            subsample: 0.85,
            colsample: 1.0,
            reg_alpha: 0.0,
            reg_lambda: 1.0,
            gamma: 0.0,
            max_delta_step: 0.0,
            num_parallel_tree: 1,
            max_bins: 64,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |field: &str, reason: &str| Err(ModelError::Config(format!("{field}: {reason}")));
        if self.n_estimators == 0 {
            return bad("n_estimators", "must be at least 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth", "must be at least 1");
        }
        if self.num_parallel_tree == 0 {
            return bad("num_parallel_tree", "must be at least 1");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample", "must lie in (0, 1]");
        }
        if !(self.colsample > 0.0) {
            return bad("colsample", "must be positive");
        }
        for (name, v) in [
            ("min_child_weight", self.min_child_weight),
            ("reg_alpha", self.reg_alpha),
            ("reg_lambda", self.reg_lambda),
            ("gamma", self.gamma),
            ("max_delta_step", self.max_delta_step),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(name, "must be finite and non-negative");
            }
        }
        if self.max_bins < 2 {
            return bad("max_bins", "must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub base_margin: f64,
    pub trees: Vec<Tree>,
    pub n_features: usize,
}

impl GbtModel {
    pub fn margins(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|r| self.base_margin + self.trees.iter().map(|t| t.predict_row(r)).sum::<f64>())
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.trees.iter().map(Tree::n_leaves).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GbtTrace {
    /// Training loss before any tree, then after each kept round.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_round: usize,
}

/// Per-feature cut points; bin `b` holds values in `(cuts[b-1], cuts[b]]`.
struct Binned {
    cuts: Vec<Vec<f64>>,
    /// Row-major bin indices.
    bins: Vec<u16>,
    p: usize,
}

impl Binned {
    fn new(x: ArrayView2<f64>, max_bins: usize) -> Self {
        let (n, p) = x.dim();
        let mut cuts = Vec::with_capacity(p);
        for col in x.columns() {
            let mut v: Vec<f64> = col.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            let c: Vec<f64> = if v.len() <= max_bins {
                v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            } else {
                let mut c: Vec<f64> = (1..max_bins).map(|k| v[k * (v.len() - 1) / max_bins]).collect();
                c.dedup();
                c
            };
            cuts.push(c);
        }
        let mut bins = vec![0u16; n * p];
        for (i, row) in x.rows().into_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                bins[i * p + j] = cuts[j].partition_point(|&c| c < v) as u16;
            }
        }
        Self { cuts, bins, p }
    }
}

struct Grower<'a> {
    data: &'a Binned,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbtParams,
    cols: Vec<usize>,
    scale: f64,
    nodes: Vec<Node>,
}

fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

impl Grower<'_> {
    fn weight(&self, g: f64, h: f64) -> f64 {
        let w = -soft_threshold(g, self.params.reg_alpha) / (h + self.params.reg_lambda);
        let mds = self.params.max_delta_step;
        if mds > 0.0 {
            w.clamp(-mds, mds)
        } else {
            w
        }
    }

    /// Reduction in regularised loss achieved by the optimal leaf, doubled.
    fn score(&self, g: f64, h: f64) -> f64 {
        if self.params.max_delta_step > 0.0 {
            let w = self.weight(g, h);
            -(2.0 * (g * w + self.params.reg_alpha * w.abs()) + (h + self.params.reg_lambda) * w * w)
        } else {
            let t = soft_threshold(g, self.params.reg_alpha);
            t * t / (h + self.params.reg_lambda)
        }
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.scale * self.weight(g, h),
        });
        if depth >= self.params.max_depth || rows.len() < 2 {
            return id;
        }
        let parent = self.score(g, h);
        let p = self.data.p;
        // (gain, feature, bin)
        let mut best: Option<(f64, usize, usize)> = None;
        for &f in &self.cols {
            let nb = self.data.cuts[f].len() + 1;
            if nb < 2 {
                continue;
            }
            let mut hg = vec![0.0; nb];
            let mut hh = vec![0.0; nb];
            for &r in rows.iter() {
                let b = self.data.bins[r * p + f] as usize;
                hg[b] += self.grad[r];
                hh[b] += self.hess[r];
            }
            let (mut gl, mut hl) = (0.0, 0.0);
            for b in 0..nb - 1 {
                gl += hg[b];
                hl += hh[b];
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent) - self.params.gamma;
                if gain > 1e-12 && best.is_none_or(|bb| gain > bb.0) {
                    best = Some((gain, f, b));
                }
            }
        }
        let Some((_, f, b)) = best else {
            return id;
        };
        let mut k = 0;
        for i in 0..rows.len() {
            if (self.data.bins[rows[i] * p + f] as usize) <= b {
                rows.swap(i, k);
                k += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(k);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: f,
            threshold: self.data.cuts[f][b],
            left,
            right,
        };
        id
    }
}

fn mean_loss(margin: &[f64], y: &[f64], w: &[f64]) -> f64 {
    margin
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&m, &y), &w)| w * bce_logit(m, y))
        .sum::<f64>()
        / margin.len().max(1) as f64
}

/// Fits a boosted ensemble. Each round grows `num_parallel_tree` trees on
/// the same gradients and adds their average, scaled by `learning_rate`.
/// If a round would raise the training loss its step is halved until it
/// does not; a round that cannot improve ends training.
pub fn fit_gbt(
    x: ArrayView2<f64>,
    y: &[f64],
    weight: &[f64],
    params: &GbtParams,
    learning_rate: f64,
    patience: usize,
    validation: Option<(ArrayView2<f64>, &[f64])>,
    seed: u64,
) -> Result<(GbtModel, GbtTrace), ModelError> {
    params.validate()?;
    let (n, p) = x.dim();
    let data = Binned::new(x, params.max_bins.min(u16::MAX as usize));
    let wsum: f64 = weight.iter().sum();
    let prior = (y.iter().zip(weight).map(|(y, w)| y * w).sum::<f64>() / wsum).clamp(1e-6, 1.0 - 1e-6);
    let base_margin = (prior / (1.0 - prior)).ln();
    let mut margin = vec![base_margin; n];
    let mut model = GbtModel {
        base_margin,
        trees: Vec::new(),
        n_features: p,
    };
    let mut trace = GbtTrace {
        train_loss: vec![mean_loss(&margin, y, weight)],
        ..Default::default()
    };
    let val_ones;
    let mut val_margin = Vec::new();
    if let Some((vx, _)) = validation {
        val_ones = vec![1.0; vx.nrows()];
        val_margin = vec![base_margin; vx.nrows()];
        trace.val_loss.push(mean_loss(&val_margin, validation.unwrap().1, &val_ones));
    } else {
        val_ones = Vec::new();
    }
    let mut best = (trace.val_loss.first().copied().unwrap_or(f64::INFINITY), 0usize, 0usize);
    let n_rows = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let n_cols = ((params.colsample.min(1.0) * p as f64).round() as usize).clamp(1, p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for round in 0..params.n_estimators {
        for i in 0..n {
            let pr = sigmoid(margin[i]);
            grad[i] = weight[i] * (pr - y[i]);
            hess[i] = (weight[i] * pr * (1.0 - pr)).max(1e-16);
        }
        let mut round_trees = Vec::with_capacity(params.num_parallel_tree);
        for _ in 0..params.num_parallel_tree {
            let mut rows = sample(&mut rng, n, n_rows).into_vec();
            rows.sort_unstable();
            let mut cols = sample(&mut rng, p, n_cols).into_vec();
            cols.sort_unstable();
            let mut grower = Grower {
                data: &data,
                grad: &grad,
                hess: &hess,
                params,
                cols,
                scale: learning_rate / params.num_parallel_tree as f64,
                nodes: Vec::new(),
            };
            grower.grow(&mut rows, 0);
            round_trees.push(Tree { nodes: grower.nodes });
        }
        let step: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| round_trees.iter().map(|t| t.predict_row(r)).sum())
            .collect();
        let before = *trace.train_loss.last().unwrap();
        let mut factor = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = margin.iter().zip(&step).map(|(m, s)| m + factor * s).collect();
            let loss = mean_loss(&trial, y, weight);
            if !loss.is_finite() {
                return Err(ModelError::Divergence {
                    last_finite: Some(before),
                    at: format!("boosting round {round}"),
                });
            }
            if loss <= before {
                accepted = Some((trial, loss));
                break;
            }
            factor *= 0.5;
        }
        let Some((trial, loss)) = accepted else {
            break;
        };
        if step.iter().all(|&s| s == 0.0) {
            break;
        }
        if factor != 1.0 {
            for t in &mut round_trees {
                for node in &mut t.nodes {
                    if let Node::Leaf { value } = node {
                        *value *= factor;
                    }
                }
            }
        }
        margin = trial;
        trace.train_loss.push(loss);
        if let Some((vx, vy)) = validation {
            for (m, r) in val_margin.iter_mut().zip(vx.rows()) {
                *m += round_trees.iter().map(|t| t.predict_row(r)).sum::<f64>();
            }
            let vl = mean_loss(&val_margin, vy, &val_ones);
            trace.val_loss.push(vl);
            model.trees.extend(round_trees);
            if vl < best.0 {
                best = (vl, round + 1, model.trees.len());
            } else if round + 1 - best.1 >= patience.max(1) {
                break;
            }
        } else {
            model.trees.extend(round_trees);
            best = (f64::INFINITY, round + 1, model.trees.len());
        }
    }
    if validation.is_some() {
        model.trees.truncate(best.2);
    }
    trace.best_round = best.1;
    Ok((model, trace))
}
