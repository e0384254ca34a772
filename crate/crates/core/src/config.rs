//! Declarative pipeline configuration. Every field has a default, so an
//! empty JSON object is a complete config; unknown keys are rejected with
//! the list of accepted ones.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::edf::SeizureLabels;
use crate::epoching::ArtifactSpec;
use crate::evaluation::metrics::AverageMode;
use crate::features::FeatureConfig;
use crate::models::search::SearchSpace;
use crate::models::{ModelKind, TrainConfig};
use crate::postprocess::PostprocessConfig;
use crate::preprocess::{FilterSpec, MontageMap, SmoothingSpec};
use crate::selection::BorutaConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config value {key}: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    /// Channel allow-list applied before anything else; empty keeps all.
    pub channels: Vec<String>,
    pub seizure_labels: SeizureLabels,
    /// Sibling files `<stem>.<ext>` searched, in order, for external labels.
    pub annotation_extensions: Vec<String>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            channels: Vec::new(),
            seizure_labels: SeizureLabels::default(),
            annotation_extensions: vec!["csv_bi".into(), "csv".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub filters: FilterSpec,
    pub smoothing: SmoothingSpec,
    pub similarity_threshold: f64,
    pub similarity_window: f64,
    pub target_fs: f64,
    pub rereference: bool,
    pub montage: MontageMap,
    pub epoch_length: f64,
    pub artifacts: ArtifactSpec,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            filters: FilterSpec::default(),
            smoothing: SmoothingSpec::default(),
            similarity_threshold: 0.95,
            similarity_window: 1.0,
            target_fs: 256.0,
            rereference: true,
            montage: MontageMap::double_banana(),
            epoch_length: 1.0,
            artifacts: ArtifactSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub enabled: bool,
    pub boruta: BorutaConfig,
    /// Training rows are subsampled to at most this many before Boruta.
    pub max_rows: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            boruta: BorutaConfig::default(),
            max_rows: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvConfig {
    pub folds: usize,
    /// Drop artifact-flagged epochs from training rows.
    pub exclude_artifacts: bool,
    /// Undersample background epochs to the seizure count in training rows.
    pub balance: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 3,
            exclude_artifacts: true,
            balance: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneConfig {
    pub enabled: bool,
    /// Random-search trials per model kind and outer fold.
    pub budget: usize,
    /// Subject-wise inner folds scoring each trial.
    pub inner_folds: usize,
    pub logreg: SearchSpace,
    pub mlp: SearchSpace,
    pub gbt: SearchSpace,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            budget: 10,
            inner_folds: 2,
            logreg: SearchSpace::published(ModelKind::Logreg),
            mlp: SearchSpace::published(ModelKind::Mlp),
            gbt: SearchSpace::published(ModelKind::Gbt),
        }
    }
}

impl TuneConfig {
    pub fn space(&self, kind: ModelKind) -> &SearchSpace {
        match kind {
            ModelKind::Logreg => &self.logreg,
            ModelKind::Mlp => &self.mlp,
            ModelKind::Gbt => &self.gbt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainStageConfig {
    pub models: Vec<ModelKind>,
    /// Training patients are split into this many groups and one group is
    /// held out for early stopping; 0 trains on everything without it.
    pub validation_groups: usize,
    /// Adds sign-flipped, time-reversed and doubly transformed copies of
    /// every fitted epoch (after class balancing).
    pub augment: bool,
    pub logreg: TrainConfig,
    pub mlp: TrainConfig,
    pub gbt: TrainConfig,
}

impl Default for TrainStageConfig {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            validation_groups: 4,
            augment: true,
            logreg: TrainConfig::for_kind(ModelKind::Logreg),
            mlp: TrainConfig::for_kind(ModelKind::Mlp),
            gbt: TrainConfig::for_kind(ModelKind::Gbt),
        }
    }
}

impl TrainStageConfig {
    pub fn base(&self, kind: ModelKind) -> &TrainConfig {
        match kind {
            ModelKind::Logreg => &self.logreg,
            ModelKind::Mlp => &self.mlp,
            ModelKind::Gbt => &self.gbt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    /// Model ids combined by voting; empty means every base model present.
    pub members: Vec<String>,
    pub threshold: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            members: Vec::new(),
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub threshold: f64,
    pub average: AverageMode,
    /// Shuffles per feature for permutation importance; 0 skips it.
    pub importance_repeats: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            average: AverageMode::Binary,
            importance_repeats: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub ingest: IngestConfig,
    pub preprocess: PreprocessConfig,
    pub features: FeatureConfig,
    pub selection: SelectionConfig,
    pub cv: CvConfig,
    pub tune: TuneConfig,
    pub train: TrainStageConfig,
    pub ensemble: EnsembleConfig,
    pub postprocess: PostprocessConfig,
    pub evaluation: EvaluationConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            output_dir: PathBuf::from("out"),
            ingest: IngestConfig::default(),
            preprocess: PreprocessConfig::default(),
            features: FeatureConfig::default(),
            selection: SelectionConfig::default(),
            cv: CvConfig::default(),
            tune: TuneConfig::default(),
            train: TrainStageConfig::default(),
            ensemble: EnsembleConfig::default(),
            postprocess: PostprocessConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.preprocess;
        p.filters.validate().map_err(|e| invalid("preprocess.filters", e.to_string()))?;
        if !(p.smoothing.k_std > 0.0 && p.smoothing.envelope_window > 0.0) {
            return Err(invalid("preprocess.smoothing", "k_std and envelope_window must be positive"));
        }
        if !(p.similarity_threshold > 0.0 && p.similarity_threshold <= 1.0) {
            return Err(invalid("preprocess.similarity_threshold", "must lie in (0, 1]"));
        }
        if !(p.similarity_window > 0.0) {
            return Err(invalid("preprocess.similarity_window", "must be positive"));
        }
        if !(p.target_fs > 0.0) {
            return Err(invalid("preprocess.target_fs", "must be positive"));
        }
        if !(p.epoch_length > 0.0) {
            return Err(invalid("preprocess.epoch_length", "must be positive"));
        }
        if p.rereference {
            p.montage.validate().map_err(|e| invalid("preprocess.montage", e.to_string()))?;
        }
        self.features
            .validate(p.target_fs)
            .map_err(|e| invalid("features", e.to_string()))?;
        self.selection
            .boruta
            .validate()
            .map_err(|e| invalid("selection.boruta", e.to_string()))?;
        if self.cv.folds < 2 {
            return Err(invalid("cv.folds", "at least 2 folds are required"));
        }
        if self.tune.inner_folds < 2 {
            return Err(invalid("tune.inner_folds", "at least 2 inner folds are required"));
        }
        if self.train.models.is_empty() {
            return Err(invalid("train.models", "accepted values are logreg, mlp, gbt; at least one is required"));
        }
        for kind in ModelKind::ALL {
            let base = self.train.base(kind);
            let key = format!("train.{}", kind.as_str());
            if base.kind != kind {
                return Err(invalid(&format!("{key}.kind"), format!("must be {}", kind.as_str())));
            }
            base.validate().map_err(|e| invalid(&key, e.to_string()))?;
        }
        if !(self.ensemble.threshold > 0.0 && self.ensemble.threshold < 1.0) {
            return Err(invalid("ensemble.threshold", "must lie in (0, 1)"));
        }
        if !(self.evaluation.threshold > 0.0 && self.evaluation.threshold < 1.0) {
            return Err(invalid("evaluation.threshold", "must lie in (0, 1)"));
        }
        self.postprocess
            .validate()
            .map_err(|e| invalid(&format!("postprocess.{}", e.field), e.reason))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let cfg = PipelineConfig::from_json("{}", Path::new("c.json")).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn round_trip() {
        let cfg = PipelineConfig::default();
        let back = PipelineConfig::from_json(&cfg.to_json(), Path::new("c.json")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_names_key_and_choices() {
        let err = PipelineConfig::from_json(r#"{"cv": {"fold": 3}}"#, Path::new("c.json"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("`fold`"), "{err}");
        assert!(err.contains("folds") && err.contains("balance"), "{err}");
    }

    #[test]
    fn bad_model_kind_lists_kinds() {
        let err = PipelineConfig::from_json(r#"{"train": {"models": ["svm"]}}"#, Path::new("c.json"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("svm") && err.contains("gbt"), "{err}");
    }

    #[test]
    fn invalid_value_is_named() {
        let err = PipelineConfig::from_json(r#"{"cv": {"folds": 1}}"#, Path::new("c.json")).unwrap_err();
        assert!(err.to_string().contains("cv.folds"));
    }
}
