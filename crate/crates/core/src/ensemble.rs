//! Epoch-wise voting across model prediction streams.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::models::PredictionStream;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EnsembleError {
    #[error("no streams to combine")]
    Empty,
    #[error("streams cover different recordings: {0:?}")]
    Recordings(Vec<String>),
    #[error("stream {model_id} for {recording_id} is missing epochs {missing:?}")]
    Misaligned {
        recording_id: String,
        model_id: String,
        missing: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteKind {
    Binary,
    Mean,
}

impl VoteKind {
    pub fn model_id(self) -> &'static str {
        match self {
            VoteKind::Binary => "binary_vote",
            VoteKind::Mean => "mean_vote",
        }
    }
}

fn check_aligned(streams: &[PredictionStream]) -> Result<(), EnsembleError> {
    let first = streams.first().ok_or(EnsembleError::Empty)?;
    let mut recs: Vec<String> = streams.iter().map(|s| s.recording_id.clone()).collect();
    recs.sort();
    recs.dedup();
    if recs.len() > 1 {
        return Err(EnsembleError::Recordings(recs));
    }
    let lo = streams.iter().map(|s| s.first_index).min().unwrap_or(0);
    let hi = streams.iter().map(|s| s.indices().end).max().unwrap_or(0);
    for s in streams {
        let r = s.indices();
        let missing: Vec<usize> = (lo..hi).filter(|i| !r.contains(i)).collect();
        if !missing.is_empty() {
            return Err(EnsembleError::Misaligned {
                recording_id: first.recording_id.clone(),
                model_id: s.model_id.clone(),
                missing,
            });
        }
    }
    Ok(())
}

/// Mean of the values taken in sorted order, as a running mean: exact for
/// identical inputs and independent of input order.
fn order_free_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mut m = 0.0;
    for (i, v) in values.iter().enumerate() {
        m += (v - m) / (i + 1) as f64;
    }
    m.clamp(0.0, 1.0)
}

fn combine(streams: &[PredictionStream], kind: VoteKind, threshold: f64) -> Result<PredictionStream, EnsembleError> {
    check_aligned(streams)?;
    let first = &streams[0];
    let k = streams.len();
    let mut column = vec![0.0; k];
    let probs = (0..first.len())
        .map(|i| {
            for (c, s) in column.iter_mut().zip(streams) {
                *c = s.probabilities[i];
            }
            match kind {
                VoteKind::Binary => column.iter().filter(|&&p| p >= threshold).count() as f64 / k as f64,
                VoteKind::Mean => order_free_mean(&mut column),
            }
        })
        .collect();
    Ok(PredictionStream {
        recording_id: first.recording_id.clone(),
        model_id: kind.model_id().into(),
        first_index: first.first_index,
        probabilities: probs,
    })
}

/// Fraction of streams voting positive (`p >= threshold`) per epoch. An
/// even split yields exactly 0.5, which the `>= 0.5` rule counts as
/// positive.
pub fn binary_vote(streams: &[PredictionStream], threshold: f64) -> Result<PredictionStream, EnsembleError> {
    combine(streams, VoteKind::Binary, threshold)
}

/// Arithmetic mean of the stream probabilities per epoch.
pub fn mean_vote(streams: &[PredictionStream]) -> Result<PredictionStream, EnsembleError> {
    combine(streams, VoteKind::Mean, 0.5)
}

/// Groups streams by recording and votes within each group.
pub fn vote_by_recording(streams: &[PredictionStream], kind: VoteKind, threshold: f64) -> Result<Vec<PredictionStream>, EnsembleError> {
    let mut groups: BTreeMap<&str, Vec<PredictionStream>> = BTreeMap::new();
    for s in streams {
        groups.entry(&s.recording_id).or_default().push(s.clone());
    }
    groups.values().map(|g| combine(g, kind, threshold)).collect()
}
