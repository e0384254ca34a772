//! Per-epoch feature extraction with a stable, self-describing catalogue.
//!
//! Names are `CH/feature` for temporal features, `CH/feature_band` for
//! spectral ones, `A|B/feature` for channel pairs (labels in lexicographic
//! order) and `graph/feature` for graph summaries.

pub mod connectivity;
pub mod graph;
pub mod spectral;
pub mod temporal;

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::spectrum::{segment_len, Segments};
use crate::epoching::EpochRecord;
pub use connectivity::ConnectivityMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl BandDefinition {
    pub fn new(name: &str, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            lo,
            hi,
        }
    }
}

pub fn default_bands() -> Vec<BandDefinition> {
    vec![
        BandDefinition::new("delta", 0.5, 4.0),
        BandDefinition::new("theta", 4.0, 8.0),
        BandDefinition::new("alpha", 8.0, 13.0),
        BandDefinition::new("beta", 13.0, 30.0),
        BandDefinition::new("gamma", 30.0, 80.0),
    ]
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FeatureError {
    #[error("band {name}: {reason}")]
    Band { name: String, reason: String },
    #[error("invalid feature setting {field}: {reason}")]
    Setting { field: &'static str, reason: String },
    #[error("epoch channels {found:?} do not match the catalogue channels {expected:?}")]
    Channels { expected: Vec<String>, found: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub bands: Vec<BandDefinition>,
    /// Welch segment length, seconds (50 % overlap, Hann window).
    pub welch_segment: f64,
    pub psi_band: (f64, f64),
    /// Quantile of off-diagonal coherence above which graph edges are kept.
    pub graph_quantile: f64,
    pub spike_k: f64,
    pub spike_refractory: f64,
    pub intermittency_window: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            bands: default_bands(),
            welch_segment: 0.5,
            psi_band: (4.0, 30.0),
            graph_quantile: 0.75,
            spike_k: 3.0,
            spike_refractory: 0.05,
            intermittency_window: 0.1,
        }
    }
}

impl FeatureConfig {
    /// Checks band ordering and that every band fits below Nyquist at `fs`.
    pub fn validate(&self, fs: f64) -> Result<(), FeatureError> {
        let mut prev_hi = 0.0;
        for b in &self.bands {
            let err = |reason: String| FeatureError::Band {
                name: b.name.clone(),
                reason,
            };
            if !(b.lo > 0.0 && b.lo < b.hi) {
                return Err(err(format!("needs 0 < lo < hi, got {}..{}", b.lo, b.hi)));
            }
            if b.hi > fs / 2.0 {
                return Err(err(format!("upper edge {} Hz exceeds Nyquist {} Hz", b.hi, fs / 2.0)));
            }
            if b.lo < prev_hi {
                return Err(err("bands must be ordered and non-overlapping".into()));
            }
            prev_hi = b.hi;
        }
        if !(self.welch_segment > 0.0) {
            return Err(FeatureError::Setting {
                field: "welch_segment",
                reason: "must be positive".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.graph_quantile) {
            return Err(FeatureError::Setting {
                field: "graph_quantile",
                reason: format!("{} is outside [0, 1]", self.graph_quantile),
            });
        }
        Ok(())
    }

    fn temporal_params(&self) -> temporal::TemporalParams {
        temporal::TemporalParams {
            spike_k: self.spike_k,
            spike_refractory: self.spike_refractory,
            intermittency_window: self.intermittency_window,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Temporal,
    Band,
    Pair,
    Graph,
}

impl FeatureKind {
    pub fn tag(self) -> &'static str {
        match self {
            FeatureKind::Temporal => "T",
            FeatureKind::Band => "band",
            FeatureKind::Pair => "rho",
            FeatureKind::Graph => "G",
        }
    }
}

/// Ordered feature names for one channel set and configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalogue {
    pub channels: Vec<String>,
    pub names: Arc<[String]>,
    pub kinds: Vec<FeatureKind>,
    pub scopes: Vec<String>,
}

fn canonical_pair<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str, bool) {
    if a <= b {
        (a, b, false)
    } else {
        (b, a, true)
    }
}

impl Catalogue {
    pub fn new(channels: &[String], cfg: &FeatureConfig) -> Self {
        let mut names = Vec::new();
        let mut kinds = Vec::new();
        let mut scopes = Vec::new();
        for ch in channels {
            for f in temporal::NAMES {
                names.push(format!("{ch}/{f}"));
                kinds.push(FeatureKind::Temporal);
                scopes.push(ch.clone());
            }
            for b in &cfg.bands {
                for f in spectral::NAMES {
                    names.push(format!("{ch}/{f}_{}", b.name));
                    kinds.push(FeatureKind::Band);
                    scopes.push(ch.clone());
                }
            }
        }
        let pair_names = connectivity::pair_names(&cfg.bands);
        for i in 0..channels.len() {
            for j in i + 1..channels.len() {
                let (a, b, _) = canonical_pair(&channels[i], &channels[j]);
                for f in &pair_names {
                    names.push(format!("{a}|{b}/{f}"));
                    kinds.push(FeatureKind::Pair);
                    scopes.push(format!("{a}|{b}"));
                }
            }
        }
        for f in graph::NAMES {
            names.push(format!("graph/{f}"));
            kinds.push(FeatureKind::Graph);
            scopes.push("global".into());
        }
        Self {
            channels: channels.to_vec(),
            names: names.into(),
            kinds,
            scopes,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Tab-separated `name, type tag, scope` lines.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for ((n, k), s) in self.names.iter().zip(&self.kinds).zip(&self.scopes) {
            let _ = writeln!(out, "{n}\t{}\t{s}", k.tag());
        }
        out
    }

    /// Short content hash of the ordered names.
    pub fn version(&self) -> String {
        manifest_version(&self.names)
    }
}

pub fn manifest_version(names: &[String]) -> String {
    let mut h = Sha256::new();
    for n in names {
        h.update(n.as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub names: Arc<[String]>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Band-averaged magnitude-squared coherence between all channels.
pub fn coherence_matrix(segments: &[Segments], samples: &[Vec<f64>], cfg: &FeatureConfig) -> ConnectivityMatrix {
    let n = segments.len();
    let mut values = vec![vec![0.0; n]; n];
    let nyquist = segments.first().map(|s| s.fs / 2.0).unwrap_or(0.0);
    let psd: Vec<Vec<f64>> = segments.iter().map(|s| s.psd()).collect();
    for i in 0..n {
        values[i][i] = 1.0;
        for j in i + 1..n {
            let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
            let c = if samples[i].is_empty() || constant(&samples[i]) || constant(&samples[j]) {
                0.0
            } else {
                let freqs = segments[i].freqs();
                let csd = segments[i].csd(&segments[j]);
                let sum: f64 = cfg
                    .bands
                    .iter()
                    .map(|b| connectivity::band_coherence(&csd, &psd[i], &psd[j], &freqs, b, nyquist).0)
                    .sum();
                sum / cfg.bands.len().max(1) as f64
            };
            values[i][j] = c;
            values[j][i] = c;
        }
    }
    ConnectivityMatrix {
        measure: "coherence".into(),
        values,
    }
}

/// Computes every catalogue feature for one epoch. Any non-finite value
/// (only reachable through overflow on extreme inputs) is replaced by 0.
pub fn extract_feature_vector(ep: &EpochRecord, cat: &Catalogue, cfg: &FeatureConfig) -> Result<FeatureVector, FeatureError> {
    if ep.channels != cat.channels {
        return Err(FeatureError::Channels {
            expected: cat.channels.clone(),
            found: ep.channels.clone(),
        });
    }
    let fs = ep.fs;
    let tp = cfg.temporal_params();
    let segments: Vec<Segments> = ep
        .samples
        .iter()
        .map(|x| Segments::new(x, fs, segment_len(x.len(), fs, cfg.welch_segment)))
        .collect();
    let mut values = Vec::with_capacity(cat.len());
    for (x, seg) in ep.samples.iter().zip(&segments) {
        values.extend(temporal::temporal_features(x, fs, &tp));
        values.extend(spectral::spectral_band_features(x, fs, &cfg.bands, seg));
    }
    let n = ep.samples.len();
    for i in 0..n {
        for j in i + 1..n {
            let (_, _, swap) = canonical_pair(&ep.channels[i], &ep.channels[j]);
            let (a, b) = if swap { (j, i) } else { (i, j) };
            values.extend(connectivity::pair_features(
                &ep.samples[a],
                &ep.samples[b],
                &segments[a],
                &segments[b],
                &cfg.bands,
                cfg.psi_band,
            ));
        }
    }
    let g = graph::binarise(&coherence_matrix(&segments, &ep.samples, cfg), cfg.graph_quantile);
    values.extend(graph::graph_features(&g));
    debug_assert_eq!(values.len(), cat.len());
    for v in values.iter_mut() {
        if !v.is_finite() {
            *v = 0.0;
        }
    }
    Ok(FeatureVector {
        names: cat.names.clone(),
        values,
    })
}
