use serde::{Deserialize, Serialize};

use super::{AnnotationEvent, EdfError, LabelSource};

/// Which annotation labels denote ictal activity. Matching is case-insensitive;
/// any label containing `seiz` also matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeizureLabels {
    pub labels: Vec<String>,
}

impl Default for SeizureLabels {
    fn default() -> Self {
        // TUSZ seizure types plus the generic term.
        let labels = [
            "seiz", "fnsz", "gnsz", "spsz", "cpsz", "absz", "tnsz", "cnsz", "tcsz", "atsz", "mysz", "nesz",
        ];
        Self {
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SeizureLabels {
    pub fn matches(&self, label: &str) -> bool {
        let l = label.trim().to_ascii_lowercase();
        l.contains("seiz") || self.labels.iter().any(|s| s.eq_ignore_ascii_case(&l))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub epoch_index: usize,
    /// 1 = seizure, 0 = background.
    pub label: u8,
    /// Source of the first seizure event overlapping the epoch, if any.
    pub source: Option<LabelSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelTable {
    pub epoch_length: f64,
    pub rows: Vec<LabelRow>,
}

impl LabelTable {
    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn label_of(&self, epoch_index: usize) -> Option<u8> {
        self.rows.get(epoch_index).filter(|r| r.epoch_index == epoch_index).map(|r| r.label)
    }
}

/// Number of whole epochs of `epoch_length` seconds in `duration` seconds.
pub(crate) fn epoch_count(duration: f64, epoch_length: f64) -> usize {
    // Tolerate representation error so that e.g. 3 × 0.1 s yields 3 epochs.
    ((duration / epoch_length) * (1.0 + 1e-12) + 1e-9).floor().max(0.0) as usize
}

/// Labels non-overlapping epochs with the default seizure label set.
pub fn build_label_table(
    events: &[AnnotationEvent],
    rec_duration: f64,
    epoch_length: f64,
) -> Result<LabelTable, EdfError> {
    build_label_table_with(events, rec_duration, epoch_length, &SeizureLabels::default())
}

/// An epoch is labelled 1 iff the union of seizure events covers at least
/// half of it. Per-channel events are treated as all-channel events.
pub fn build_label_table_with(
    events: &[AnnotationEvent],
    rec_duration: f64,
    epoch_length: f64,
    seizure: &SeizureLabels,
) -> Result<LabelTable, EdfError> {
    if !(epoch_length > 0.0) || !epoch_length.is_finite() {
        return Err(EdfError::EpochLength(epoch_length));
    }
    let mut ictal: Vec<&AnnotationEvent> = events
        .iter()
        .filter(|e| e.duration > 0.0 && seizure.matches(&e.label))
        .collect();
    ictal.sort_by(|a, b| a.onset.total_cmp(&b.onset));

    // Union of seizure intervals.
    let mut union: Vec<(f64, f64)> = Vec::new();
    for e in &ictal {
        match union.last_mut() {
            Some(last) if e.onset <= last.1 => last.1 = last.1.max(e.end()),
            _ => union.push((e.onset, e.end())),
        }
    }

    let n = epoch_count(rec_duration, epoch_length);
    let half = 0.5 * epoch_length * (1.0 - 1e-9);
    let mut rows = Vec::with_capacity(n);
    let mut first = 0;
    for i in 0..n {
        let (lo, hi) = (i as f64 * epoch_length, (i + 1) as f64 * epoch_length);
        while first < union.len() && union[first].1 <= lo {
            first += 1;
        }
        let overlap: f64 = union[first..]
            .iter()
            .take_while(|iv| iv.0 < hi)
            .map(|iv| (iv.1.min(hi) - iv.0.max(lo)).max(0.0))
            .sum();
        let source = ictal
            .iter()
            .find(|e| e.onset < hi && e.end() > lo)
            .map(|e| e.source);
        rows.push(LabelRow {
            epoch_index: i,
            label: u8::from(overlap >= half),
            source,
        });
    }
    Ok(LabelTable { epoch_length, rows })
}
