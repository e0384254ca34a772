//! Stage orchestration. Each stage reads its inputs from the [`Store`],
//! writes its outputs back, and marks itself complete; re-running a stage
//! discards its own outputs and those of every later stage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::edf::{
    build_label_table_with, extract_annotations, parse_edf, AnnotationEvent, Channel, ChannelScope, EdfError,
    LabelSource, LabelTable, Recording, SeizureLabels, SignalHeader,
};
use crate::ensemble::{vote_by_recording, EnsembleError, VoteKind};
use crate::epoching::{attach_similarity_flags, balance_indices, flag_artifacts, segment_epochs, EpochError};
use crate::evaluation::metrics::roc_points;
use crate::evaluation::report::{text_report, write_box_csv, write_metrics_csv, write_roc_csv, write_stats_csv, MetricRow};
use crate::evaluation::{
    compute_metrics, permutation_importance, stat_report, subject_kfold_split, Comparison, EvalError, FoldPlan,
    PatientSummary, StatReport,
};
use crate::features::{extract_feature_vector, Catalogue, FeatureError};
use crate::models::{
    fit, project_columns, read_streams_csv, tune, write_streams_csv, ModelError, ModelKind, PredictionStream,
    TrainConfig, TrainedModel, TuneResult,
};
use crate::postprocess::{refine_predictions, write_diff_csv, Adjustment};
use crate::preprocess::{
    amplitude_smooth, apply_filters, mark_similarity_artifacts, resample_recording, rereference_bipolar,
    PreprocessError,
};
use crate::selection::{boruta_select, SelectionError, SelectionReport};
use crate::store::{EpochRow, FeatureRow, KeyRange, Record, RecordingRow, StoreError, StoredChannel, Store};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Preprocess,
    Featurize,
    Select,
    Tune,
    Train,
    Predict,
    Vote,
    Postprocess,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Ingest,
        Stage::Preprocess,
        Stage::Featurize,
        Stage::Select,
        Stage::Tune,
        Stage::Train,
        Stage::Predict,
        Stage::Vote,
        Stage::Postprocess,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Preprocess => "preprocess",
            Stage::Featurize => "featurize",
            Stage::Select => "select",
            Stage::Tune => "tune",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Vote => "vote",
            Stage::Postprocess => "postprocess",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.name() == s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("missing stage: {0}")]
    MissingStage(&'static str),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{path}: {source}")]
    Edf {
        path: PathBuf,
        #[source]
        source: EdfError,
    },
    #[error("preprocessing {recording}: {source}")]
    Preprocess {
        recording: String,
        #[source]
        source: PreprocessError,
    },
    #[error("epoching {recording}: {source}")]
    Epoch {
        recording: String,
        #[source]
        source: EpochError,
    },
    #[error("features for {recording}: {source}")]
    Feature {
        recording: String,
        #[source]
        source: FeatureError,
    },
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
}

type Result<T, E = PipelineError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serialisable")
}

fn from_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| PipelineError::Data(format!("stored {what} is unreadable: {e}")))
}

/// Signal channel with a physical range wide enough for its samples.
fn raw_channel(c: StoredChannel) -> Channel {
    let (lo, hi) = c
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (-1.0, 1.0) };
    Channel {
        header: SignalHeader {
            label: c.label,
            transducer: String::new(),
            physical_dim: "uV".into(),
            physical_min: lo,
            physical_max: hi,
            digital_min: -32768,
            digital_max: 32767,
            prefiltering: String::new(),
            samples_per_record: c.fs.round() as usize,
            reserved: String::new(),
        },
        sample_rate: c.fs,
        samples: c.samples,
    }
}

fn rebuild(row: &RecordingRow, channels: Vec<StoredChannel>) -> Recording {
    Recording {
        patient_id: row.patient_id.clone(),
        recording_id: row.recording_id.clone(),
        start_time: Default::default(),
        record_duration: row.duration,
        n_records: 1,
        reserved: String::new(),
        channels: channels.into_iter().map(raw_channel).collect(),
    }
}

fn stored(rec: &Recording) -> Vec<StoredChannel> {
    rec.signal_channels()
        .map(|c| StoredChannel {
            label: c.header.label.clone(),
            fs: c.sample_rate,
            samples: c.samples.clone(),
        })
        .collect()
}

/// Every epoch with its feature vector, in `(recording_id, epoch_index)` order.
struct Dataset {
    names: Vec<String>,
    x: Array2<f64>,
    y: Vec<u8>,
    clean: Vec<bool>,
    recs: Vec<RecordingRow>,
    spans: Vec<Range<usize>>,
    row_rec: Vec<usize>,
}

impl Dataset {
    fn patient(&self, row: usize) -> &str {
        &self.recs[self.row_rec[row]].patient_id
    }

    fn patients(&self) -> Vec<PatientSummary> {
        let mut by: BTreeMap<&str, PatientSummary> = BTreeMap::new();
        for (i, r) in self.recs.iter().enumerate() {
            let e = by.entry(&r.patient_id).or_insert_with(|| PatientSummary {
                patient_id: r.patient_id.clone(),
                recordings: Vec::new(),
                seizure_epochs: 0,
            });
            e.recordings.push(r.recording_id.clone());
            e.seizure_epochs += self.spans[i].clone().filter(|&k| self.y[k] == 1).count();
        }
        by.into_values().collect()
    }

    fn select(&self, rows: &[usize], cols: &[String]) -> Result<Array2<f64>> {
        let x = self.x.select(Axis(0), rows);
        Ok(project_columns(x.view(), &self.names, cols)?)
    }

    fn labels(&self, rows: &[usize]) -> Vec<u8> {
        rows.iter().map(|&r| self.y[r]).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestSummary {
    pub recordings: usize,
    pub diagnostics: Vec<String>,
}

/// Configuration-only helpers, shareable across worker threads.
#[derive(Clone, Copy)]
struct Ctx<'a> {
    cfg: &'a PipelineConfig,
}

impl Ctx<'_> {
    fn seed(&self, salt: u64) -> u64 {
        self.cfg.seed.wrapping_mul(1_000_003).wrapping_add(salt)
    }

    fn preprocess_one(&self, row: &RecordingRow, raw: Vec<StoredChannel>, intervals: &[(f64, f64)]) -> Result<(Recording, Vec<EpochRow>)> {
        let p = &self.cfg.preprocess;
        let id = &row.recording_id;
        let pre_err = |source| PipelineError::Preprocess {
            recording: id.clone(),
            source,
        };
        let rec = rebuild(row, raw);
        let mut rec = apply_filters(&rec, &p.filters).map_err(pre_err)?;
        if p.smoothing.enabled {
            for c in rec.channels.iter_mut() {
                c.samples = amplitude_smooth(&c.samples, c.sample_rate, &p.smoothing);
            }
        }
        let similar = mark_similarity_artifacts(&rec, p.similarity_window, p.similarity_threshold);
        let mut rec = resample_recording(&rec, p.target_fs);
        if p.rereference {
            rec = rereference_bipolar(&rec, &p.montage).map_err(pre_err)?;
        }
        let events: Vec<AnnotationEvent> = intervals
            .iter()
            .map(|&(s, e)| AnnotationEvent {
                onset: s,
                duration: e - s,
                label: "seiz".into(),
                channel_scope: ChannelScope::All,
                source: LabelSource::Embedded,
            })
            .collect();
        let labels = build_label_table_with(&events, row.duration, p.epoch_length, &SeizureLabels::default()).map_err(
            |e| PipelineError::Data(format!("labels for {id}: {e}")),
        )?;
        let epoch_err = |source| PipelineError::Epoch {
            recording: id.clone(),
            source,
        };
        let mut epochs: Vec<_> = segment_epochs(&rec, &labels, p.epoch_length)
            .map_err(epoch_err)?
            .iter()
            .map(|e| flag_artifacts(e, &p.artifacts))
            .collect();
        attach_similarity_flags(&mut epochs, &similar, p.epoch_length);
        let rows = epochs
            .iter()
            .map(|e| EpochRow {
                recording_id: id.clone(),
                epoch_index: e.epoch_index,
                label: e.label,
                flags: e.flags.bits(),
                split_tag: None,
            })
            .collect();
        Ok((rec, rows))
    }

    /// Training rows for one outer fold: other folds' patients, clean and
    /// class-balanced as configured.
    fn training_rows(&self, ds: &Dataset, plan: &FoldPlan, fold: usize, seed: u64) -> Result<Vec<usize>> {
        let rows: Vec<usize> = (0..ds.y.len())
            .filter(|&r| plan.fold_of(ds.patient(r)) != Some(fold))
            .filter(|&r| !self.cfg.cv.exclude_artifacts || ds.clean[r])
            .collect();
        if !rows.iter().any(|&r| ds.y[r] == 1) {
            return Err(PipelineError::Data(format!("fold {fold}: no seizure epochs in training data")));
        }
        if !self.cfg.cv.balance {
            return Ok(rows);
        }
        let labels = ds.labels(&rows);
        let keep = balance_indices(&labels, &vec![true; rows.len()], seed)
            .map_err(|e| PipelineError::Data(format!("fold {fold}: {e}")))?;
        Ok(keep.into_iter().map(|i| rows[i]).collect())
    }

    /// Subject-wise `(train, val)` position lists over `rows`.
    fn inner_splits(&self, ds: &Dataset, rows: &[usize], k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
        let members: BTreeSet<&str> = rows.iter().map(|&r| ds.patient(r)).collect();
        let patients: Vec<PatientSummary> = ds.patients().into_iter().filter(|p| members.contains(p.patient_id.as_str())).collect();
        let plan = subject_kfold_split(&patients, k, seed)?;
        Ok((0..k)
            .map(|f| {
                let (mut tr, mut va) = (Vec::new(), Vec::new());
                for (pos, &r) in rows.iter().enumerate() {
                    if plan.fold_of(ds.patient(r)) == Some(f) {
                        va.push(pos);
                    } else {
                        tr.push(pos);
                    }
                }
                (tr, va)
            })
            .collect())
    }
}

pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub store: Store,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, store: Store) -> Self {
        Self { cfg, store }
    }

    pub fn output_dir(&self) -> &Path {
        &self.cfg.output_dir
    }

    fn write_output(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let dir = self.output_dir();
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
        Ok(path)
    }

    fn ctx(&self) -> Ctx<'_> {
        Ctx { cfg: &self.cfg }
    }

    fn seed(&self, salt: u64) -> u64 {
        self.ctx().seed(salt)
    }

    /// Stages that must have completed before `stage` may run, in order.
    pub fn prerequisites(&self, stage: Stage) -> Vec<Stage> {
        use Stage::*;
        let chain: &[Stage] = match stage {
            Ingest => &[],
            Preprocess => &[Ingest],
            Featurize => &[Ingest, Preprocess],
            Select => &[Ingest, Preprocess, Featurize],
            Tune => &[Ingest, Preprocess, Featurize, Select],
            Train | Predict | Vote | Postprocess | Evaluate | Report => &[Ingest, Preprocess, Featurize, Select, Tune, Train],
        };
        let mut out: Vec<Stage> = chain
            .iter()
            .copied()
            .filter(|&s| s != Tune || (self.cfg.tune.enabled && stage != Tune))
            .filter(|&s| s != Train || stage != Train)
            .collect();
        match stage {
            Vote | Evaluate => out.push(Predict),
            Postprocess => out.extend([Predict, Vote]),
            Report => out.extend([Predict, Evaluate]),
            _ => {}
        }
        out
    }

    pub fn check_ready(&self, stage: Stage) -> Result<()> {
        for s in self.prerequisites(stage) {
            if !self.store.has_stage(s.name())? {
                return Err(PipelineError::MissingStage(s.name()));
            }
        }
        Ok(())
    }

    fn begin(&mut self, stage: Stage) -> Result<()> {
        self.check_ready(stage)?;
        let later: Vec<&str> = Stage::ALL.iter().filter(|s| **s >= stage).map(|s| s.name()).collect();
        self.store.unmark_stages(&later)?;
        for s in Stage::ALL.iter().rev().filter(|s| **s >= stage) {
            self.clear_outputs(*s)?;
        }
        let text = self.cfg.to_json();
        self.write_output("effective_config.json", text.as_bytes())?;
        self.store.put_report("config", "effective", &text)?;
        log::info!("stage {}", stage.name());
        Ok(())
    }

    fn clear_outputs(&mut self, stage: Stage) -> Result<()> {
        let s = &mut self.store;
        match stage {
            Stage::Ingest => s.clear(&[
                "features",
                "epochs",
                "manifests",
                "predictions",
                "models",
                "reports",
                "signals",
                "seizure_intervals",
                "recordings",
            ])?,
            Stage::Preprocess => {
                s.clear(&["features", "epochs"])?;
                s.delete_signals("preprocessed")?;
            }
            Stage::Featurize => {
                s.clear(&["features", "manifests"])?;
                s.delete_reports("features")?;
            }
            Stage::Select => {
                s.delete_reports("plan")?;
                s.delete_reports("selection")?;
            }
            Stage::Tune => s.delete_reports("tune")?,
            Stage::Train => s.clear(&["models"])?,
            Stage::Predict => s.clear(&["predictions"])?,
            Stage::Vote => s.delete_predictions_like("%_vote%")?,
            Stage::Postprocess => {
                s.delete_predictions_like("%+pp")?;
                s.delete_reports("postprocess")?;
            }
            Stage::Evaluate => s.delete_reports("evaluation")?,
            Stage::Report => s.delete_reports("report")?,
        }
        Ok(())
    }

    fn finish(&mut self, stage: Stage) -> Result<()> {
        self.store.mark_stage(stage.name())?;
        Ok(())
    }

    /// Human-readable execution plan for `stages`.
    pub fn plan(&self, stages: &[Stage]) -> String {
        let c = &self.cfg;
        let p = &c.preprocess;
        let mut s = String::new();
        for (i, st) in stages.iter().enumerate() {
            let what = match st {
                Stage::Ingest => format!(
                    "read EDF/EDF+ files; channels: {}; external labels: {}",
                    if c.ingest.channels.is_empty() { "all".to_string() } else { c.ingest.channels.join(",") },
                    c.ingest.annotation_extensions.join(",")
                ),
                Stage::Preprocess => format!(
                    "high-pass {} Hz, notch {:?} Hz, smoothing {} (k={}), similarity > {}, resample to {} Hz, {}, {} s epochs",
                    p.filters.highpass_cutoff,
                    p.filters.notch_freqs,
                    if p.smoothing.enabled { "on" } else { "off" },
                    p.smoothing.k_std,
                    p.similarity_threshold,
                    p.target_fs,
                    if p.rereference {
                        format!("bipolar montage ({} pairs)", p.montage.pairs.len())
                    } else {
                        "no re-referencing".into()
                    },
                    p.epoch_length
                ),
                Stage::Featurize => format!(
                    "feature catalogue over bands {}",
                    c.features.bands.iter().map(|b| b.name.as_str()).collect::<Vec<_>>().join(",")
                ),
                Stage::Select => format!(
                    "subject-wise {}-fold plan (seed {}); {}",
                    c.cv.folds,
                    c.seed,
                    if c.selection.enabled {
                        format!(
                            "Boruta {} iterations on at most {} training rows per fold",
                            c.selection.boruta.n_iterations, c.selection.max_rows
                        )
                    } else {
                        "selection disabled, all features kept".into()
                    }
                ),
                Stage::Tune => {
                    if c.tune.enabled {
                        format!(
                            "random search, {} trials per model and fold, {} inner folds",
                            c.tune.budget, c.tune.inner_folds
                        )
                    } else {
                        "disabled; base configs used".into()
                    }
                }
                Stage::Train => format!(
                    "models {} per fold",
                    c.train.models.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(",")
                ),
                Stage::Predict => "per-epoch probabilities for held-out recordings".into(),
                Stage::Vote => format!("binary and mean voting, threshold {}", c.ensemble.threshold),
                Stage::Postprocess => format!(
                    "refine streams ({})",
                    if c.postprocess.enabled { "enabled" } else { "disabled, copies unchanged" }
                ),
                Stage::Evaluate => format!(
                    "metrics at threshold {}, {:?} averaging, permutation importance x{}",
                    c.evaluation.threshold, c.evaluation.average, c.evaluation.importance_repeats
                ),
                Stage::Report => "text summary".into(),
            };
            let _ = writeln!(s, "{}. {}: {}", i + 1, st.name(), what);
        }
        let _ = writeln!(s, "outputs: {}", self.output_dir().display());
        s
    }

    /// Ingests `.edf` files; directories are searched (non-recursively).
    pub fn ingest(&mut self, inputs: &[PathBuf]) -> Result<IngestSummary> {
        self.begin(Stage::Ingest)?;
        let mut files = Vec::new();
        for input in inputs {
            if input.is_dir() {
                let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                    .map_err(io_err(input))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("edf")))
                    .collect();
                found.sort();
                files.extend(found);
            } else {
                files.push(input.clone());
            }
        }
        if files.is_empty() {
            return Err(PipelineError::Data("no EDF files found in the inputs".into()));
        }
        let cfg = &self.cfg.ingest;
        let parsed: Vec<(RecordingRow, Recording, Vec<(f64, f64)>, Vec<String>)> = files
            .par_iter()
            .map(|path| {
                let edf_err = |source| PipelineError::Edf {
                    path: path.clone(),
                    source,
                };
                let mut diagnostics = Vec::new();
                let rec = match parse_edf(path) {
                    Ok(r) => r,
                    Err(EdfError::Truncated {
                        complete_records,
                        expected_records,
                        recovered,
                    }) => {
                        diagnostics.push(format!(
                            "{}: truncated, kept {complete_records} of {expected_records} records",
                            path.display()
                        ));
                        *recovered
                    }
                    Err(e) => return Err(edf_err(e)),
                };
                let external = cfg
                    .annotation_extensions
                    .iter()
                    .map(|ext| path.with_extension(ext))
                    .find(|p| p.is_file());
                let ann = extract_annotations(&rec, external.as_deref()).map_err(edf_err)?;
                diagnostics.extend(ann.diagnostics.iter().map(|d| format!("{}: {d}", path.display())));
                let intervals = ann
                    .events
                    .iter()
                    .filter(|e| e.duration > 0.0 && cfg.seizure_labels.matches(&e.label))
                    .map(|e| (e.onset, e.end()))
                    .collect();
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let patient = rec
                    .patient_id
                    .split_whitespace()
                    .next()
                    .filter(|p| *p != "X")
                    .map(str::to_string)
                    .unwrap_or_else(|| stem.clone());
                let rec = rec.select_channels(&cfg.channels);
                let row = RecordingRow {
                    recording_id: stem,
                    patient_id: patient,
                    fs: rec.signal_channels().map(|c| c.sample_rate).fold(0.0, f64::max),
                    n_channels: rec.signal_channels().count(),
                    duration: rec.duration(),
                };
                if row.n_channels == 0 {
                    return Err(PipelineError::Data(format!("{}: no signal channels left", path.display())));
                }
                Ok((row, rec, intervals, diagnostics))
            })
            .collect::<Result<_>>()?;
        let mut summary = IngestSummary::default();
        for (row, rec, intervals, diagnostics) in parsed {
            for d in &diagnostics {
                log::warn!("{d}");
            }
            summary.diagnostics.extend(diagnostics);
            let id = row.recording_id.clone();
            self.store.write_records(&[Record::Recording(row)])?;
            self.store.put_signals(&id, "raw", &stored(&rec))?;
            self.store.put_intervals(&id, &intervals)?;
            summary.recordings += 1;
        }
        self.finish(Stage::Ingest)?;
        Ok(summary)
    }

    pub fn preprocess(&mut self) -> Result<()> {
        self.begin(Stage::Preprocess)?;
        let ctx = Ctx { cfg: &self.cfg };
        let recs = self.store.recordings()?;
        let inputs: Vec<_> = recs
            .iter()
            .map(|r| Ok((self.store.get_signals(&r.recording_id, "raw")?, self.store.get_intervals(&r.recording_id)?)))
            .collect::<Result<_>>()?;
        let outputs: Vec<(Recording, Vec<EpochRow>)> = recs
            .par_iter()
            .zip(inputs)
            .map(|(r, (raw, iv))| ctx.preprocess_one(r, raw, &iv))
            .collect::<Result<_>>()?;
        for (r, (rec, rows)) in recs.iter().zip(outputs) {
            self.store.put_signals(&r.recording_id, "preprocessed", &stored(&rec))?;
            let batch: Vec<Record> = rows.into_iter().map(Record::Epoch).collect();
            self.store.write_records(&batch)?;
        }
        self.finish(Stage::Preprocess)
    }

    pub fn featurize(&mut self) -> Result<()> {
        self.begin(Stage::Featurize)?;
        let recs = self.store.recordings()?;
        let epoch_length = self.cfg.preprocess.epoch_length;
        let mut catalogue: Option<Catalogue> = None;
        for r in &recs {
            let id = &r.recording_id;
            let chans = self.store.get_signals(id, "preprocessed")?;
            let rows: Vec<EpochRow> = self
                .store
                .read_records("epochs", KeyRange::recording(id))?
                .filter_map(|rec| match rec {
                    Ok(Record::Epoch(e)) => Some(Ok(e)),
                    Ok(_) => None,
                    Err(e) => Some(Err(e)),
                })
                .collect::<Result<_, _>>()?;
            let rec = rebuild(r, chans);
            let labels = LabelTable {
                epoch_length,
                rows: Vec::new(),
            };
            let epochs = segment_epochs(&rec, &labels, epoch_length).map_err(|source| PipelineError::Epoch {
                recording: id.clone(),
                source,
            })?;
            if epochs.len() != rows.len() {
                return Err(PipelineError::Data(format!(
                    "{id}: {} stored epochs but {} segmented",
                    rows.len(),
                    epochs.len()
                )));
            }
            let names: Vec<String> = rec.signal_channels().map(|c| c.header.label.clone()).collect();
            let cat = catalogue.get_or_insert_with(|| Catalogue::new(&names, &self.cfg.features));
            if cat.channels != names {
                return Err(PipelineError::Data(format!(
                    "{id}: channels {names:?} differ from {:?}; one feature manifest per run is required",
                    cat.channels
                )));
            }
            let cat = &*cat;
            let version = cat.version();
            let fcfg = &self.cfg.features;
            let batch: Vec<Record> = epochs
                .par_iter()
                .map(|ep| {
                    let v = extract_feature_vector(ep, cat, fcfg).map_err(|source| PipelineError::Feature {
                        recording: id.clone(),
                        source,
                    })?;
                    Ok(Record::Feature(FeatureRow {
                        recording_id: id.clone(),
                        epoch_index: ep.epoch_index,
                        manifest_version: version.clone(),
                        values: v.values,
                    }))
                })
                .collect::<Result<_>>()?;
            if self.store.get_manifest(&version)?.is_none() {
                self.store.put_manifest(&version, &cat.names)?;
            }
            self.store.write_records(&batch)?;
        }
        let cat = catalogue.ok_or_else(|| PipelineError::Data("no recordings to featurize".into()))?;
        self.store.put_report("features", "manifest_version", &cat.version())?;
        self.write_output("feature_manifest.tsv", cat.manifest().as_bytes())?;
        self.finish(Stage::Featurize)
    }

    fn load_dataset(&self) -> Result<Dataset> {
        let version = self
            .store
            .get_report("features", "manifest_version")?
            .ok_or(PipelineError::MissingStage("featurize"))?;
        let names = self
            .store
            .get_manifest(&version)?
            .ok_or_else(|| PipelineError::Data(format!("manifest {version} missing")))?;
        let recs = self.store.recordings()?;
        let index: BTreeMap<&str, usize> = recs.iter().enumerate().map(|(i, r)| (r.recording_id.as_str(), i)).collect();
        let mut flat = Vec::new();
        let (mut y, mut clean, mut row_rec) = (Vec::new(), Vec::new(), Vec::new());
        let epochs = self.store.read_records("epochs", KeyRange::all())?;
        let mut feats = self.store.read_filtered("features", KeyRange::all(), Some(&version))?;
        for e in epochs {
            let Record::Epoch(e) = e? else { continue };
            let f = match feats.next() {
                Some(Ok(Record::Feature(f))) => f,
                Some(Err(err)) => return Err(err.into()),
                _ => {
                    return Err(PipelineError::Data(format!(
                        "no features for epoch ({}, {})",
                        e.recording_id, e.epoch_index
                    )))
                }
            };
            if (&f.recording_id, f.epoch_index) != (&e.recording_id, e.epoch_index) || f.values.len() != names.len() {
                return Err(PipelineError::Data(format!(
                    "feature row ({}, {}) does not match epoch ({}, {})",
                    f.recording_id, f.epoch_index, e.recording_id, e.epoch_index
                )));
            }
            flat.extend_from_slice(&f.values);
            y.push(e.label);
            clean.push(e.flags == 0);
            row_rec.push(index[e.recording_id.as_str()]);
        }
        let n = y.len();
        let x = Array2::from_shape_vec((n, names.len()), flat).map_err(|e| PipelineError::Data(e.to_string()))?;
        let mut spans = vec![0..0; recs.len()];
        let mut start = 0;
        for i in 0..recs.len() {
            let mut end = start;
            while end < n && row_rec[end] == i {
                end += 1;
            }
            spans[i] = start..end;
            start = end;
        }
        Ok(Dataset {
            names,
            x,
            y,
            clean,
            recs,
            spans,
            row_rec,
        })
    }

    fn fold_plan(&self) -> Result<FoldPlan> {
        let text = self.store.get_report("plan", "folds")?.ok_or(PipelineError::MissingStage("select"))?;
        from_json(&text, "fold plan")
    }

    fn selected(&self, fold: usize) -> Result<Vec<String>> {
        let text = self
            .store
            .get_report("selection", &format!("fold{fold}"))?
            .ok_or(PipelineError::MissingStage("select"))?;
        let (_, names): (Option<SelectionReport>, Vec<String>) = from_json(&text, "selection")?;
        Ok(names)
    }

    pub fn select(&mut self) -> Result<()> {
        self.begin(Stage::Select)?;
        let ctx = Ctx { cfg: &self.cfg };
        let ds = self.load_dataset()?;
        let plan = subject_kfold_split(&ds.patients(), self.cfg.cv.folds, self.cfg.seed)?;
        let plan_json = serde_json::to_string_pretty(&plan).expect("serialisable");
        self.store.put_report("plan", "folds", &plan_json)?;
        self.write_output("folds.json", plan_json.as_bytes())?;
        let sel = &self.cfg.selection;
        let best_p = 2.0 * 0.5f64.powi(sel.boruta.n_iterations as i32);
        if sel.enabled && best_p >= sel.boruta.alpha / ds.names.len().max(1) as f64 {
            log::warn!(
                "{} Boruta iterations cannot confirm any of {} features at alpha {}",
                sel.boruta.n_iterations,
                ds.names.len(),
                sel.boruta.alpha
            );
        }
        let results: Vec<(Option<SelectionReport>, Vec<String>)> = (0..plan.k)
            .into_par_iter()
            .map(|fold| {
                if !sel.enabled {
                    return Ok((None, ds.names.clone()));
                }
                let mut rows = ctx.training_rows(&ds, &plan, fold, ctx.seed(fold as u64))?;
                if rows.len() > sel.max_rows {
                    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed(100 + fold as u64));
                    let mut keep = sample(&mut rng, rows.len(), sel.max_rows).into_vec();
                    keep.sort_unstable();
                    rows = keep.into_iter().map(|i| rows[i]).collect();
                }
                let x = ds.x.select(Axis(0), &rows);
                let report = boruta_select(x.view(), &ds.labels(&rows), &ds.names, &sel.boruta, ctx.seed(200 + fold as u64))?;
                let mut chosen = report.selected(&ds.names);
                if chosen.is_empty() {
                    log::warn!("fold {fold}: no feature confirmed; keeping all");
                    chosen = ds.names.clone();
                }
                Ok((Some(report), chosen))
            })
            .collect::<Result<_>>()?;
        let mut summary = String::from("fold,n_selected,features\n");
        for (fold, r) in results.iter().enumerate() {
            self.store.put_report("selection", &format!("fold{fold}"), &json(r))?;
            let _ = writeln!(summary, "{fold},{},\"{}\"", r.1.len(), r.1.join(";"));
        }
        self.write_output("selection.csv", summary.as_bytes())?;
        self.finish(Stage::Select)
    }

    pub fn tune(&mut self) -> Result<()> {
        self.begin(Stage::Tune)?;
        let ctx = Ctx { cfg: &self.cfg };
        if !self.cfg.tune.enabled {
            log::warn!("tuning disabled in config; base configs will be used");
            return self.finish(Stage::Tune);
        }
        let ds = self.load_dataset()?;
        let plan = self.fold_plan()?;
        let mut trials_csv = String::from("model,fold,trial,mean_auc,size,error,config\n");
        for fold in 0..plan.k {
            let rows = ctx.training_rows(&ds, &plan, fold, ctx.seed(fold as u64))?;
            let names = self.selected(fold)?;
            let x = ds.select(&rows, &names)?;
            let y = ds.labels(&rows);
            let splits = ctx.inner_splits(&ds, &rows, self.cfg.tune.inner_folds, ctx.seed(300 + fold as u64))?;
            for &kind in &self.cfg.train.models {
                let base = self.cfg.train.base(kind);
                let seed = ctx.seed(1000 * fold as u64 + kind as u64);
                let result = tune(base, self.cfg.tune.space(kind), self.cfg.tune.budget, x.view(), &y, &names, &splits, seed);
                for (t, trial) in result.trials.iter().enumerate() {
                    let _ = writeln!(
                        trials_csv,
                        "{},{fold},{t},{},{},{},\"{}\"",
                        kind.as_str(),
                        trial.mean_auc.map_or("NA".into(), |v| format!("{v:.6}")),
                        trial.size,
                        trial.error.as_deref().unwrap_or(""),
                        json(&trial.config).replace('"', "\"\"")
                    );
                }
                self.store
                    .put_report("tune", &format!("{}_fold{fold}", kind.as_str()), &json(&result))?;
            }
        }
        self.write_output("tuning.csv", trials_csv.as_bytes())?;
        self.finish(Stage::Tune)
    }

    fn train_config(&self, kind: ModelKind, fold: usize) -> Result<TrainConfig> {
        let mut cfg = if self.cfg.tune.enabled {
            let text = self
                .store
                .get_report("tune", &format!("{}_fold{fold}", kind.as_str()))?
                .ok_or(PipelineError::MissingStage("tune"))?;
            from_json::<TuneResult>(&text, "tuning result")?.best
        } else {
            self.cfg.train.base(kind).clone()
        };
        cfg.seed = self.seed(2000 + 1000 * fold as u64 + kind as u64);
        Ok(cfg)
    }

    /// Feature vectors of the three transformed variants of each epoch in
    /// `rows`, over the full manifest.
    fn augmented_features(&self, ds: &Dataset, rows: &BTreeSet<usize>) -> Result<BTreeMap<usize, [Vec<f64>; 3]>> {
        let epoch_length = self.cfg.preprocess.epoch_length;
        let mut out = BTreeMap::new();
        for (i, r) in ds.recs.iter().enumerate() {
            let wanted: Vec<usize> = ds.spans[i].clone().filter(|k| rows.contains(k)).collect();
            if wanted.is_empty() {
                continue;
            }
            let id = &r.recording_id;
            let rec = rebuild(r, self.store.get_signals(id, "preprocessed")?);
            let labels = LabelTable {
                epoch_length,
                rows: Vec::new(),
            };
            let epochs = segment_epochs(&rec, &labels, epoch_length).map_err(|source| PipelineError::Epoch {
                recording: id.clone(),
                source,
            })?;
            let cat = Catalogue::new(&epochs[0].channels, &self.cfg.features);
            if *cat.names != *ds.names {
                return Err(PipelineError::Data(format!("{id}: channels differ from the stored feature manifest")));
            }
            let start = ds.spans[i].start;
            let fcfg = &self.cfg.features;
            let computed: Vec<(usize, [Vec<f64>; 3])> = wanted
                .par_iter()
                .map(|&row| {
                    let [_, a, b, c] = epochs[row - start].augmented();
                    let f = |e: &crate::epoching::EpochRecord| {
                        extract_feature_vector(e, &cat, fcfg)
                            .map(|v| v.values)
                            .map_err(|source| PipelineError::Feature {
                                recording: id.clone(),
                                source,
                            })
                    };
                    Ok((row, [f(&a)?, f(&b)?, f(&c)?]))
                })
                .collect::<Result<_>>()?;
            out.extend(computed);
        }
        Ok(out)
    }

    pub fn train(&mut self) -> Result<()> {
        self.begin(Stage::Train)?;
        let ctx = Ctx { cfg: &self.cfg };
        let ds = self.load_dataset()?;
        let plan = self.fold_plan()?;
        let groups = self.cfg.train.validation_groups;
        // Per fold: rows fitted and rows held out for early stopping.
        let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..plan.k)
            .map(|fold| {
                let rows = ctx.training_rows(&ds, &plan, fold, ctx.seed(fold as u64))?;
                let n_patients = rows.iter().map(|&r| ds.patient(r)).collect::<BTreeSet<_>>().len();
                Ok(if groups >= 2 && n_patients >= groups {
                    let (tr, va) = ctx
                        .inner_splits(&ds, &rows, groups, ctx.seed(400 + fold as u64))?
                        .swap_remove(0);
                    (tr.iter().map(|&p| rows[p]).collect(), va.iter().map(|&p| rows[p]).collect())
                } else {
                    (rows, Vec::new())
                })
            })
            .collect::<Result<_>>()?;
        let augmented = if self.cfg.train.augment {
            let all: BTreeSet<usize> = splits.iter().flat_map(|(fit, _)| fit.iter().copied()).collect();
            self.augmented_features(&ds, &all)?
        } else {
            BTreeMap::new()
        };
        let jobs: Vec<(usize, ModelKind)> = (0..plan.k)
            .flat_map(|f| self.cfg.train.models.iter().map(move |&k| (f, k)))
            .collect();
        let prepared: Vec<(usize, TrainConfig, Vec<String>)> = jobs
            .iter()
            .map(|&(f, k)| Ok((f, self.train_config(k, f)?, self.selected(f)?)))
            .collect::<Result<_>>()?;
        let models: Vec<TrainedModel> = prepared
            .par_iter()
            .map(|(fold, cfg, names)| {
                let (fit_rows, val_rows) = &splits[*fold];
                let mut x = ds.select(fit_rows, names)?;
                let mut y = ds.labels(fit_rows);
                if !augmented.is_empty() {
                    let p = ds.names.len();
                    let mut flat = Vec::with_capacity(fit_rows.len() * 3 * p);
                    for r in fit_rows {
                        for v in &augmented[r] {
                            flat.extend_from_slice(v);
                        }
                        y.extend([ds.y[*r]; 3]);
                    }
                    let extra = Array2::from_shape_vec((fit_rows.len() * 3, p), flat)
                        .map_err(|e| PipelineError::Data(e.to_string()))?;
                    let extra = project_columns(extra.view(), &ds.names, names)?;
                    x = ndarray::concatenate(Axis(0), &[x.view(), extra.view()]).expect("same width");
                }
                let xv = ds.select(val_rows, names)?;
                let yv = ds.labels(val_rows);
                let validation = (!val_rows.is_empty()).then(|| (xv.view(), yv.as_slice()));
                let mut model = fit(x.view(), &y, names, cfg, validation)?;
                model.meta.fold = Some(*fold);
                Ok(model)
            })
            .collect::<Result<_>>()?;
        let mut summary = String::from("model_id,kind,fold,n_features,best_epoch\n");
        for m in &models {
            let fold = m.meta.fold.unwrap_or(0);
            let id = format!("{}_fold{fold}", m.kind.as_str());
            self.store.put_model(&id, m.kind.as_str(), m.meta.fold, &m.to_bytes())?;
            let _ = writeln!(summary, "{id},{},{fold},{},{}", m.kind.as_str(), m.features.len(), m.meta.trace.best_epoch);
        }
        self.write_output("models.csv", summary.as_bytes())?;
        self.finish(Stage::Train)
    }

    fn load_models(&self) -> Result<Vec<TrainedModel>> {
        self.store
            .list_models()?
            .iter()
            .map(|(id, _, _)| {
                let bytes = self
                    .store
                    .get_model(id)?
                    .ok_or_else(|| PipelineError::Data(format!("model {id} vanished")))?;
                Ok(TrainedModel::from_bytes(&bytes)?)
            })
            .collect()
    }

    fn test_recordings(ds: &Dataset, plan: &FoldPlan, fold: usize) -> Vec<usize> {
        (0..ds.recs.len())
            .filter(|&i| plan.fold_of(&ds.recs[i].patient_id) == Some(fold))
            .collect()
    }

    /// Predicts every held-out recording with its fold's models, and adds
    /// streams from `import` (a prediction-stream CSV) if given.
    pub fn predict(&mut self, import: Option<&Path>) -> Result<()> {
        self.begin(Stage::Predict)?;
        let ds = self.load_dataset()?;
        let plan = self.fold_plan()?;
        let models = self.load_models()?;
        let streams: Vec<Vec<PredictionStream>> = models
            .par_iter()
            .map(|m| {
                let fold = m.meta.fold.unwrap_or(0);
                Self::test_recordings(&ds, &plan, fold)
                    .into_iter()
                    .map(|i| {
                        let rows: Vec<usize> = ds.spans[i].clone().collect();
                        let x = ds.select(&rows, &m.features)?;
                        Ok(m.predict_stream(&ds.recs[i].recording_id, 0, x.view(), &m.features, m.kind.as_str())?)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut all: Vec<PredictionStream> = streams.into_iter().flatten().collect();
        if let Some(path) = import {
            let file = std::fs::File::open(path).map_err(io_err(path))?;
            let imported = read_streams_csv(file)?;
            for s in &imported {
                let i = ds
                    .recs
                    .iter()
                    .position(|r| r.recording_id == s.recording_id)
                    .ok_or_else(|| PipelineError::Data(format!("imported stream for unknown recording {}", s.recording_id)))?;
                if s.first_index != 0 || s.len() != ds.spans[i].len() {
                    return Err(PipelineError::Data(format!(
                        "imported stream {} for {} covers epochs {:?}, expected 0..{}",
                        s.model_id,
                        s.recording_id,
                        s.indices(),
                        ds.spans[i].len()
                    )));
                }
            }
            all.extend(imported);
        }
        self.store.write_streams(&all)?;
        self.finish(Stage::Predict)
    }

    fn is_base(id: &str) -> bool {
        !id.ends_with("+pp") && !id.ends_with("_vote")
    }

    pub fn vote(&mut self) -> Result<()> {
        self.begin(Stage::Vote)?;
        let mut members: Vec<String> = self
            .store
            .model_ids_in_predictions()?
            .into_iter()
            .filter(|id| Self::is_base(id))
            .collect();
        if !self.cfg.ensemble.members.is_empty() {
            if let Some(m) = self.cfg.ensemble.members.iter().find(|m| !members.contains(m)) {
                return Err(PipelineError::Data(format!(
                    "ensemble member {m} has no predictions; available: {}",
                    members.join(", ")
                )));
            }
            members = self.cfg.ensemble.members.clone();
        }
        let mut streams = Vec::new();
        for m in &members {
            streams.extend(self.store.read_streams(m)?);
        }
        let mut per_rec: BTreeMap<&str, usize> = BTreeMap::new();
        for s in &streams {
            *per_rec.entry(&s.recording_id).or_default() += 1;
        }
        if let Some((r, n)) = per_rec.iter().find(|(_, &n)| n != members.len()) {
            return Err(PipelineError::Data(format!(
                "recording {r} has {n} of {} member streams",
                members.len()
            )));
        }
        let mut out = vote_by_recording(&streams, VoteKind::Binary, self.cfg.ensemble.threshold)?;
        out.extend(vote_by_recording(&streams, VoteKind::Mean, self.cfg.ensemble.threshold)?);
        self.store.write_streams(&out)?;
        self.finish(Stage::Vote)
    }

    pub fn postprocess(&mut self) -> Result<()> {
        self.begin(Stage::Postprocess)?;
        if !self.cfg.postprocess.enabled {
            log::warn!("post-processing disabled in config; streams are copied unchanged");
        }
        let ids: Vec<String> = self
            .store
            .model_ids_in_predictions()?
            .into_iter()
            .filter(|id| !id.ends_with("+pp"))
            .collect();
        let mut refined = Vec::new();
        let mut adjustments: Vec<(String, Adjustment)> = Vec::new();
        for id in &ids {
            for s in self.store.read_streams(id)? {
                let (mut out, adj) = refine_predictions(&s, &self.cfg.postprocess);
                out.model_id = format!("{id}+pp");
                adjustments.extend(adj.into_iter().map(|a| (id.clone(), a)));
                refined.push(out);
            }
        }
        self.store.write_streams(&refined)?;
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for (id, _) in &adjustments {
            *counts.entry(id).or_default() += 1;
        }
        self.store.put_report("postprocess", "adjustments", &json(&counts))?;
        let mut buf = Vec::new();
        for id in &ids {
            let adj: Vec<Adjustment> = adjustments.iter().filter(|(m, _)| m == id).map(|(_, a)| a.clone()).collect();
            let mut part = Vec::new();
            write_diff_csv(&mut part, &adj)?;
            let text = String::from_utf8(part).expect("utf8");
            for (i, line) in text.lines().enumerate() {
                if i == 0 && buf.is_empty() {
                    buf.extend_from_slice(b"model_id,");
                    buf.extend_from_slice(line.as_bytes());
                    buf.push(b'\n');
                } else if i > 0 {
                    buf.extend_from_slice(format!("{id},{line}\n").as_bytes());
                }
            }
        }
        self.write_output("postprocess_diff.csv", &buf)?;
        self.finish(Stage::Postprocess)
    }

    pub fn evaluate(&mut self) -> Result<()> {
        self.begin(Stage::Evaluate)?;
        let ctx = Ctx { cfg: &self.cfg };
        let ds = self.load_dataset()?;
        let plan = self.fold_plan()?;
        let ev = &self.cfg.evaluation;
        let rec_index: BTreeMap<&str, usize> = ds
            .recs
            .iter()
            .enumerate()
            .map(|(i, r)| (r.recording_id.as_str(), i))
            .collect();
        let ids = self.store.model_ids_in_predictions()?;
        let mut rows = Vec::new();
        let mut curves = Vec::new();
        let mut all_streams: BTreeMap<String, Vec<PredictionStream>> = BTreeMap::new();
        for id in &ids {
            let streams = self.store.read_streams(id)?;
            let (model, stage) = match id.strip_suffix("+pp") {
                Some(base) => (base.to_string(), "postprocessed"),
                None => (id.clone(), "raw"),
            };
            let mut per_fold: BTreeMap<usize, (Vec<u8>, Vec<f64>)> = BTreeMap::new();
            for s in &streams {
                let i = *rec_index
                    .get(s.recording_id.as_str())
                    .ok_or_else(|| PipelineError::Data(format!("predictions for unknown recording {}", s.recording_id)))?;
                let span = ds.spans[i].clone();
                let y: Vec<u8> = s.indices().map(|e| ds.y[span.start + e]).collect();
                let fold = plan.fold_of(&ds.recs[i].patient_id).unwrap_or(0);
                let entry = per_fold.entry(fold).or_default();
                entry.0.extend(y);
                entry.1.extend_from_slice(&s.probabilities);
            }
            let (mut py, mut pp) = (Vec::new(), Vec::new());
            for (fold, (y, p)) in &per_fold {
                rows.push(MetricRow {
                    model: model.clone(),
                    fold: fold.to_string(),
                    stage: stage.into(),
                    n_epochs: y.len(),
                    metrics: compute_metrics(y, p, ev.threshold, ev.average)?,
                });
                py.extend_from_slice(y);
                pp.extend_from_slice(p);
            }
            rows.push(MetricRow {
                model: model.clone(),
                fold: "all".into(),
                stage: stage.into(),
                n_epochs: py.len(),
                metrics: compute_metrics(&py, &pp, ev.threshold, ev.average)?,
            });
            curves.push((id.clone(), "all".to_string(), roc_points(&py, &pp)));
            all_streams.insert(id.clone(), streams);
        }

        let mut comparisons = Vec::new();
        for id in ids.iter().filter(|id| !id.ends_with("+pp")) {
            let Some(after) = all_streams.get(&format!("{id}+pp")) else { continue };
            let before = &all_streams[id];
            for metric in ["accuracy", "sensitivity", "specificity", "precision", "f1"] {
                let mut c = Comparison {
                    metric: metric.into(),
                    label: id.clone(),
                    before: Vec::new(),
                    after: Vec::new(),
                };
                for (b, a) in before.iter().zip(after) {
                    let i = rec_index[b.recording_id.as_str()];
                    let y: Vec<u8> = b.indices().map(|e| ds.y[ds.spans[i].start + e]).collect();
                    let mb = compute_metrics(&y, &b.probabilities, ev.threshold, ev.average)?;
                    let ma = compute_metrics(&y, &a.probabilities, ev.threshold, ev.average)?;
                    if let (Some(vb), Some(va)) = (mb.get(metric), ma.get(metric)) {
                        c.before.push(vb);
                        c.after.push(va);
                    }
                }
                comparisons.push(c);
            }
        }
        let stats = stat_report(&comparisons);

        let mut importance = String::from("model_id,feature,importance\n");
        if ev.importance_repeats > 0 {
            let models = self.load_models()?;
            let results: Vec<(String, Vec<String>, Vec<f64>)> = models
                .par_iter()
                .filter_map(|m| {
                    let fold = m.meta.fold.unwrap_or(0);
                    let rows: Vec<usize> = Self::test_recordings(&ds, &plan, fold)
                        .into_iter()
                        .flat_map(|i| ds.spans[i].clone())
                        .collect();
                    let x = match ds.select(&rows, &m.features) {
                        Ok(x) => x,
                        Err(e) => return Some(Err(e)),
                    };
                    let id = format!("{}_fold{fold}", m.kind.as_str());
                    let seed = ctx.seed(5000 + fold as u64);
                    match permutation_importance(m, x.view(), &m.features, &ds.labels(&rows), ev.importance_repeats, seed) {
                        Ok(v) => Some(Ok((id, m.features.clone(), v))),
                        Err(EvalError::SingleClass) => None,
                        Err(e) => Some(Err(e.into())),
                    }
                })
                .collect::<Result<_>>()?;
            for (id, names, values) in results {
                for (n, v) in names.iter().zip(values) {
                    let _ = writeln!(importance, "{id},{n},{v:.6}");
                }
            }
        }

        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &rows)?;
        self.write_output("metrics.csv", &buf)?;
        let mut sbuf = Vec::new();
        write_stats_csv(&mut sbuf, &stats)?;
        self.write_output("stats.csv", &sbuf)?;
        let mut rbuf = Vec::new();
        write_roc_csv(&mut rbuf, &curves)?;
        self.write_output("roc.csv", &rbuf)?;
        let mut bbuf = Vec::new();
        write_box_csv(&mut bbuf, &rows)?;
        self.write_output("box.csv", &bbuf)?;
        self.write_output("importance.csv", importance.as_bytes())?;
        let mut pbuf = Vec::new();
        let flat: Vec<PredictionStream> = all_streams.into_values().flatten().collect();
        write_streams_csv(&mut pbuf, &flat)?;
        self.write_output("predictions.csv", &pbuf)?;
        self.store.put_report("evaluation", "metrics", &json(&rows))?;
        self.store.put_report("evaluation", "stats", &json(&stats))?;
        self.finish(Stage::Evaluate)
    }

    /// Metric rows stored by the last `evaluate`.
    pub fn metric_rows(&self) -> Result<Vec<MetricRow>> {
        let text = self
            .store
            .get_report("evaluation", "metrics")?
            .ok_or(PipelineError::MissingStage("evaluate"))?;
        from_json(&text, "metrics")
    }

    pub fn report(&mut self) -> Result<String> {
        self.begin(Stage::Report)?;
        let rows = self.metric_rows()?;
        let stats: StatReport = from_json(
            &self.store.get_report("evaluation", "stats")?.unwrap_or_default(),
            "statistics",
        )?;
        let plan = self.fold_plan()?;
        let mut s = String::from("Seizure detection run\n\n");
        let _ = writeln!(s, "seed: {}", self.cfg.seed);
        for f in 0..plan.k {
            let n = self.selected(f).map(|v| v.len()).unwrap_or(0);
            let _ = writeln!(s, "fold {f}: patients {} | {n} features", plan.patients_in(f).join(", "));
        }
        s.push('\n');
        for r in rows.iter().filter(|r| r.fold == "all") {
            let _ = writeln!(
                s,
                "{:<16} {:<13} roc_auc {}  accuracy {:.4}  sensitivity {:.4}  specificity {:.4}",
                r.model,
                r.stage,
                r.metrics.roc_auc.map_or("NA".into(), |v| format!("{v:.4}")),
                r.metrics.accuracy,
                r.metrics.sensitivity,
                r.metrics.specificity
            );
        }
        s.push('\n');
        s.push_str(&text_report(&rows, Some(&stats)));
        self.write_output("report.txt", s.as_bytes())?;
        self.store.put_report("report", "text", &s)?;
        self.finish(Stage::Report)?;
        Ok(s)
    }

    /// Every stage in order.
    pub fn run_all(&mut self, inputs: &[PathBuf]) -> Result<String> {
        self.ingest(inputs)?;
        self.preprocess()?;
        self.featurize()?;
        self.select()?;
        self.tune()?;
        self.train()?;
        self.predict(None)?;
        self.vote()?;
        self.postprocess()?;
        self.evaluate()?;
        self.report()
    }
}

/// Pooled epoch-level ROC AUC of one model id from stored metrics.
pub fn pooled_auc(rows: &[MetricRow], model: &str, stage: &str) -> Option<f64> {
    rows.iter()
        .find(|r| r.model == model && r.stage == stage && r.fold == "all")
        .and_then(|r| r.metrics.roc_auc)
}
