//! Per-epoch classifiers on feature vectors: logistic regression, a
//! batch-normalised MLP and gradient-boosted trees.

pub mod gbt;
pub mod net;
pub mod optim;
pub mod search;
pub mod standardize;
pub mod stream;

use std::io::{Read, Write};

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gbt::{GbtModel, GbtParams, GbtTrace};
pub use net::Network;
pub use optim::OptimiserKind;
pub use search::{tune, SearchSpace, Trial, TuneResult};
pub use standardize::Standardizer;
pub use stream::{read_streams_csv, write_streams_csv, PredictionStream};

use crate::features::manifest_version;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("training diverged at {at}; last finite loss {last_finite:?}")]
    Divergence { last_finite: Option<f64>, at: String },
    #[error("training labels contain a single class; both classes are required")]
    SingleClass,
    #[error("input contains NaN at row {row}, column {col}")]
    NaN { row: usize, col: usize },
    #[error("{rows} rows but {labels} labels")]
    Shape { rows: usize, labels: usize },
    #[error("feature manifest mismatch at position {position}: model expects {expected:?}, input has {found:?}")]
    Manifest {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("prediction stream: {0}")]
    Stream(String),
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logreg,
    Mlp,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Logreg, ModelKind::Mlp, ModelKind::Gbt];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logreg => "logreg",
            ModelKind::Mlp => "mlp",
            ModelKind::Gbt => "gbt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

pub const HIDDEN1: [usize; 3] = [256, 512, 1024];
pub const HIDDEN2: [usize; 2] = [128, 256];
pub const HIDDEN3: [usize; 2] = [64, 128];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub kind: ModelKind,
    /// Optimiser step size; for `gbt` the shrinkage factor.
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub optimiser: OptimiserKind,
    /// Passes over the training data (networks only).
    pub epochs: usize,
    /// Epochs (networks) or rounds (`gbt`) without validation improvement
    /// before stopping.
    pub patience: usize,
    pub seed: u64,
    pub hidden: [usize; 3],
    pub gbt: GbtParams,
    /// Loss weights for background and ictal samples.
    pub class_weights: Option<[f64; 2]>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_kind(ModelKind::Logreg)
    }
}

impl TrainConfig {
    pub fn for_kind(kind: ModelKind) -> Self {
        Self {
            kind,
            learning_rate: if kind == ModelKind::Gbt { 0.1 } else { 0.01 },
            weight_decay: 1e-5,
            batch_size: 64,
            optimiser: OptimiserKind::Adam,
            epochs: 50,
            patience: 5,
            seed: 0,
            hidden: [512, 256, 128],
            gbt: GbtParams::default(),
            class_weights: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay {} must be non-negative", self.weight_decay));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.kind == ModelKind::Mlp
            && !(HIDDEN1.contains(&self.hidden[0]) && HIDDEN2.contains(&self.hidden[1]) && HIDDEN3.contains(&self.hidden[2]))
        {
            return bad(format!(
                "hidden {:?}: accepted values are {HIDDEN1:?}, {HIDDEN2:?}, {HIDDEN3:?}",
                self.hidden
            ));
        }
        if let Some(w) = self.class_weights {
            if !w.iter().all(|v| *v > 0.0 && v.is_finite()) {
                return bad(format!("class_weights {w:?} must be positive"));
            }
        }
        if self.kind == ModelKind::Gbt {
            self.gbt.validate()?;
        }
        Ok(())
    }

    /// Parameter count for networks, tree count for boosted trees.
    pub fn model_size(&self, n_features: usize) -> usize {
        match self.kind {
            ModelKind::Logreg => n_features + 1,
            ModelKind::Mlp => {
                let d = [n_features, self.hidden[0], self.hidden[1], self.hidden[2]];
                (0..3).map(|l| d[l] * d[l + 1] + 2 * d[l + 1]).sum::<usize>() + d[3] + 1
            }
            ModelKind::Gbt => self.gbt.n_estimators * self.gbt.num_parallel_tree,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Network(Network),
    Gbt(GbtModel),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub fold: Option<usize>,
    pub config: TrainConfig,
    pub trace: TrainingTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub features: Vec<String>,
    pub manifest_version: String,
    pub standardizer: Standardizer,
    pub params: ModelParams,
    pub meta: TrainingMeta,
}

const MAGIC: &[u8; 8] = b"SZMODEL\0";
const FORMAT_VERSION: u32 = 1;

fn check_inputs(x: ArrayView2<f64>, y: &[u8]) -> Result<(), ModelError> {
    if x.nrows() != y.len() {
        return Err(ModelError::Shape { rows: x.nrows(), labels: y.len() });
    }
    if let Some(((row, col), _)) = x.indexed_iter().find(|(_, v)| v.is_nan()) {
        return Err(ModelError::NaN { row, col });
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(ModelError::SingleClass);
    }
    Ok(())
}

fn sample_weights(y: &[u8], cw: Option<[f64; 2]>) -> Vec<f64> {
    match cw {
        Some(w) => y.iter().map(|&v| w[v as usize]).collect(),
        None => vec![1.0; y.len()],
    }
}

fn train_network(
    net: &mut Network,
    x: ArrayView2<f64>,
    y: &[f64],
    w: &[f64],
    val: Option<(ArrayView2<f64>, &[f64])>,
    cfg: &TrainConfig,
) -> Result<TrainingTrace, ModelError> {
    let mut opt = optim::Optimiser::new(cfg.optimiser, cfg.learning_rate, cfg.weight_decay, net.params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let min_batch = if net.dims.len() > 2 { 2 } else { 1 };
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut trace = TrainingTrace::default();
    let val_ones = val.map(|(vx, _)| vec![1.0; vx.nrows()]).unwrap_or_default();
    let mut best: Option<(f64, Network)> = None;
    if let Some((vx, vy)) = val {
        let vl = net.eval_loss(vx, vy, &val_ones);
        trace.val_loss.push(vl);
        best = Some((vl, net.clone()));
    }
    let mut last_finite = None;
    let mut since_best = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut count) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < min_batch {
                continue;
            }
            let xb = x.select(Axis(0), chunk);
            let yb: Vec<f64> = chunk.iter().map(|&i| y[i]).collect();
            let wb: Vec<f64> = chunk.iter().map(|&i| w[i]).collect();
            let pass = net.loss_and_grad(xb.view(), &yb, &wb);
            if !pass.loss.is_finite() || pass.grad.iter().any(|g| !g.is_finite()) {
                return Err(ModelError::Divergence {
                    last_finite,
                    at: format!("epoch {epoch}"),
                });
            }
            last_finite = Some(pass.loss);
            total += pass.loss * chunk.len() as f64;
            count += chunk.len();
            opt.step(&mut net.params, &pass.grad);
            net.update_running(&pass.batch_stats);
        }
        if net.params.iter().any(|p| !p.is_finite()) {
            return Err(ModelError::Divergence {
                last_finite,
                at: format!("epoch {epoch}"),
            });
        }
        trace.train_loss.push(if count > 0 { total / count as f64 } else { f64::NAN });
        if let Some((vx, vy)) = val {
            let vl = net.eval_loss(vx, vy, &val_ones);
            if !vl.is_finite() {
                return Err(ModelError::Divergence {
                    last_finite,
                    at: format!("validation after epoch {epoch}"),
                });
            }
            trace.val_loss.push(vl);
            let (best_loss, _) = best.as_ref().expect("set with validation");
            if vl < *best_loss {
                best = Some((vl, net.clone()));
                trace.best_epoch = epoch + 1;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience.max(1) {
                    break;
                }
            }
        } else {
            trace.best_epoch = epoch + 1;
        }
    }
    if let Some((_, b)) = best {
        *net = b;
    }
    Ok(trace)
}

/// Fits a model on standardised training rows. `features` names the
/// columns of `x`; validation rows (if any) drive early stopping only.
pub fn fit(
    x: ArrayView2<f64>,
    y: &[u8],
    features: &[String],
    cfg: &TrainConfig,
    validation: Option<(ArrayView2<f64>, &[u8])>,
) -> Result<TrainedModel, ModelError> {
    cfg.validate()?;
    check_inputs(x, y)?;
    if features.len() != x.ncols() {
        return Err(ModelError::Config(format!("{} feature names for {} columns", features.len(), x.ncols())));
    }
    if let Some((vx, vy)) = validation {
        if vx.nrows() != vy.len() {
            return Err(ModelError::Shape { rows: vx.nrows(), labels: vy.len() });
        }
        if vx.ncols() != x.ncols() {
            return Err(ModelError::Config("validation column count differs from training".into()));
        }
    }
    let standardizer = Standardizer::fit(x);
    let xs = standardizer.transform(x);
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let w = sample_weights(y, cfg.class_weights);
    let val = validation.map(|(vx, vy)| (standardizer.transform(vx), vy.iter().map(|&v| f64::from(v)).collect::<Vec<f64>>()));
    let val_view = val.as_ref().map(|(vx, vy)| (vx.view(), vy.as_slice()));
    let p = x.ncols();
    let (params, trace) = match cfg.kind {
        ModelKind::Logreg | ModelKind::Mlp => {
            let dims = if cfg.kind == ModelKind::Logreg {
                vec![p, 1]
            } else {
                vec![p, cfg.hidden[0], cfg.hidden[1], cfg.hidden[2], 1]
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(1);
            let init = if cfg.kind == ModelKind::Logreg { net::Init::Zero } else { net::Init::KaimingNormal };
            let mut network = Network::new(dims, init, &mut rng);
            let trace = train_network(&mut network, xs.view(), &yf, &w, val_view, cfg)?;
            (ModelParams::Network(network), trace)
        }
        ModelKind::Gbt => {
            let (m, t) = gbt::fit_gbt(xs.view(), &yf, &w, &cfg.gbt, cfg.learning_rate, cfg.patience, val_view, cfg.seed)?;
            let trace = TrainingTrace {
                train_loss: t.train_loss,
                val_loss: t.val_loss,
                best_epoch: t.best_round,
            };
            (ModelParams::Gbt(m), trace)
        }
    };
    Ok(TrainedModel {
        kind: cfg.kind,
        features: features.to_vec(),
        manifest_version: manifest_version(features),
        standardizer,
        params,
        meta: TrainingMeta {
            fold: None,
            config: cfg.clone(),
            trace,
        },
    })
}

/// Copies the named columns of `x` in the requested order.
pub fn project_columns(x: ArrayView2<f64>, names: &[String], wanted: &[String]) -> Result<Array2<f64>, ModelError> {
    let idx = wanted
        .iter()
        .map(|w| {
            names.iter().position(|n| n == w).ok_or_else(|| ModelError::Manifest {
                position: 0,
                expected: w.clone(),
                found: "<absent>".into(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(x.select(Axis(1), &idx))
}

impl TrainedModel {
    pub fn check_manifest(&self, features: &[String]) -> Result<(), ModelError> {
        for i in 0..self.features.len().max(features.len()) {
            let expected = self.features.get(i).map(String::as_str).unwrap_or("<end>");
            let found = features.get(i).map(String::as_str).unwrap_or("<end>");
            if expected != found {
                return Err(ModelError::Manifest {
                    position: i,
                    expected: expected.into(),
                    found: found.into(),
                });
            }
        }
        Ok(())
    }

    /// Per-row probabilities, deterministic (inference mode).
    pub fn predict_proba(&self, x: ArrayView2<f64>, features: &[String]) -> Result<Vec<f64>, ModelError> {
        self.check_manifest(features)?;
        if x.ncols() != features.len() {
            return Err(ModelError::Config(format!("{} feature names for {} columns", features.len(), x.ncols())));
        }
        let xs = self.standardizer.transform(x);
        let logits = match &self.params {
            ModelParams::Network(n) => n.logits(xs.view()),
            ModelParams::Gbt(g) => g.margins(xs.view()),
        };
        Ok(logits.into_iter().map(net::sigmoid).collect())
    }

    pub fn predict_stream(
        &self,
        recording_id: &str,
        first_index: usize,
        x: ArrayView2<f64>,
        features: &[String],
        model_id: &str,
    ) -> Result<PredictionStream, ModelError> {
        PredictionStream::new(recording_id, model_id, first_index, self.predict_proba(x, features)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend(bincode::serialize(self).expect("model serialises"));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(ModelError::Format("not a model file".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(ModelError::Format(format!("unsupported format version {version}")));
        }
        bincode::deserialize(&bytes[12..]).map_err(|e| ModelError::Format(e.to_string()))
    }

    pub fn save<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&self.to_bytes())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self, ModelError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| ModelError::Format(e.to_string()))?;
        Self::from_bytes(&buf)
    }
}
