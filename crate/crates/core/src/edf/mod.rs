//! EDF/EDF+ reading, annotation extraction and per-epoch label tables.
//!
//! A [`Recording`] is decoded entirely into memory: every channel holds its
//! samples in physical units. Annotation signals (`EDF Annotations`) are kept
//! as ordinary channels so that the file can be re-encoded losslessly; their
//! time-stamped annotation lists are decoded by [`extract_annotations`].

mod annotations;
mod header;
mod labels;
pub mod tal;
#[doc(hidden)]
pub mod writer;

use std::path::PathBuf;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

pub use annotations::{extract_annotations, AnnotationEvent, AnnotationSet, ChannelScope, LabelSource};
pub use header::{parse_edf, parse_edf_bytes};
pub(crate) use labels::epoch_count;
pub use labels::{build_label_table, build_label_table_with, LabelRow, LabelTable, SeizureLabels};

/// Label used by EDF+ for annotation signals.
pub const ANNOTATION_LABEL: &str = "EDF Annotations";

#[derive(Debug, thiserror::Error)]
pub enum EdfError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed EDF header at byte {offset}: {reason}")]
    Header { offset: usize, reason: String },
    #[error("truncated EDF data: recovered {complete_records} of {expected_records} data records")]
    Truncated {
        complete_records: usize,
        expected_records: usize,
        /// The complete records that could be decoded.
        recovered: Box<Recording>,
    },
    #[error("malformed TAL block in data record {record}: {reason}")]
    Tal { record: usize, reason: String },
    #[error("annotation file {path}: {reason}")]
    AnnotationFile { path: PathBuf, reason: String },
    #[error("epoch length must be positive, got {0}")]
    EpochLength(f64),
}

/// Per-signal header fields, decoded from the 256-byte-per-signal block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalHeader {
    pub label: String,
    pub transducer: String,
    /// Physical dimension, e.g. `uV`.
    pub physical_dim: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
    pub reserved: String,
}

impl SignalHeader {
    pub fn is_annotation(&self) -> bool {
        self.label.trim() == ANNOTATION_LABEL
    }

    /// Linear digital → physical map.
    #[inline]
    pub fn to_physical(&self, digital: i32) -> f64 {
        let scale = (self.physical_max - self.physical_min)
            / (self.digital_max as f64 - self.digital_min as f64);
        self.physical_min + (digital as f64 - self.digital_min as f64) * scale
    }

    /// Inverse of [`to_physical`](Self::to_physical), rounded and clamped to the digital range.
    #[inline]
    pub fn to_digital(&self, physical: f64) -> i32 {
        let scale = (self.digital_max as f64 - self.digital_min as f64)
            / (self.physical_max - self.physical_min);
        let d = (self.digital_min as f64 + (physical - self.physical_min) * scale).round();
        d.clamp(self.digital_min as f64, self.digital_max as f64) as i32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub header: SignalHeader,
    /// Sampling rate in Hz.
    pub sample_rate: f64,
    /// Samples in physical units.
    pub samples: Vec<f64>,
}

impl Channel {
    /// Digital values of the samples; exact for channels decoded from a file.
    pub fn digital_samples(&self) -> Vec<i32> {
        self.samples.iter().map(|&p| self.header.to_digital(p)).collect()
    }
}

/// One decoded recording. Immutable once built; processing steps return new values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub patient_id: String,
    pub recording_id: String,
    pub start_time: NaiveDateTime,
    /// Duration of one data record in seconds.
    pub record_duration: f64,
    pub n_records: usize,
    /// The 44-byte reserved header field (`EDF+C`, `EDF+D` or blank).
    pub reserved: String,
    pub channels: Vec<Channel>,
}

impl Recording {
    /// Total duration in seconds.
    pub fn duration(&self) -> f64 {
        self.n_records as f64 * self.record_duration
    }

    pub fn is_edf_plus(&self) -> bool {
        self.reserved.starts_with("EDF+")
    }

    /// Channels that carry signal data (annotation signals excluded).
    pub fn signal_channels(&self) -> impl Iterator<Item = &Channel> {
        self.channels.iter().filter(|c| !c.header.is_annotation())
    }

    pub fn channel(&self, label: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.header.label == label)
    }

    /// Keeps only signal channels whose normalised label is in `allow`
    /// (all signal channels when `allow` is empty). Annotation channels are dropped.
    pub fn select_channels(&self, allow: &[String]) -> Recording {
        let allow: Vec<String> = allow.iter().map(|s| normalize_label(s)).collect();
        let channels = self
            .signal_channels()
            .filter(|c| allow.is_empty() || allow.contains(&normalize_label(&c.header.label)))
            .cloned()
            .collect();
        Recording { channels, ..self.clone_meta() }
    }

    /// Copy of the metadata with no channels.
    pub fn clone_meta(&self) -> Recording {
        Recording {
            patient_id: self.patient_id.clone(),
            recording_id: self.recording_id.clone(),
            start_time: self.start_time,
            record_duration: self.record_duration,
            n_records: self.n_records,
            reserved: self.reserved.clone(),
            channels: Vec::new(),
        }
    }
}

/// Canonical electrode label: upper case, without `EEG ` prefix or
/// reference suffix (`-REF`, `-LE`, `-AVG`), legacy 10-20 names mapped to
/// the modern ones (T3→T7, T4→T8, T5→P7, T6→P8).
pub fn normalize_label(label: &str) -> String {
    let mut s = label.trim().to_ascii_uppercase();
    if let Some(rest) = s.strip_prefix("EEG ") {
        s = rest.trim().to_string();
    }
    for suffix in ["-REF", "-LE", "-AVG"] {
        if let Some(rest) = s.strip_suffix(suffix) {
            s = rest.to_string();
            break;
        }
    }
    s.split('-')
        .map(|part| match part.trim() {
            "T3" => "T7",
            "T4" => "T8",
            "T5" => "P7",
            "T6" => "P8",
            other => other,
        })
        .collect::<Vec<_>>()
        .join("-")
}
