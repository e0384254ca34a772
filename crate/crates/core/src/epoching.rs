//! Fixed-length epochs, slope/flatline artifact flags and class balancing.

use std::collections::VecDeque;

use bitflags::bitflags;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::edf::{LabelTable, Recording};
use crate::preprocess::augment;

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
    pub struct ArtifactFlags: u32 {
        const STEEP_SLOPE = 1;
        const FLATLINE = 1 << 1;
        const HIGH_SIMILARITY = 1 << 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    #[default]
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SplitTag::Train),
            "val" => Some(SplitTag::Val),
            "test" => Some(SplitTag::Test),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EpochError {
    #[error("channels {first} ({first_rate} Hz) and {other} ({other_rate} Hz) differ in sampling rate; resample first")]
    RateMismatch {
        first: String,
        first_rate: f64,
        other: String,
        other_rate: f64,
    },
    #[error("no seizure epochs available for balancing; skip this recording set")]
    NoSeizures,
    #[error("epoch length must be positive, got {0}")]
    EpochLength(f64),
}

/// One window across all signal channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub recording_id: String,
    pub epoch_index: usize,
    /// Start time in seconds.
    pub start: f64,
    pub fs: f64,
    pub channels: Vec<String>,
    /// `samples[c]` holds the samples of channel `c`, physical units.
    pub samples: Vec<Vec<f64>>,
    pub label: u8,
    pub flags: ArtifactFlags,
    pub split_tag: SplitTag,
}

impl EpochRecord {
    /// The four augmentation variants; all keep the label.
    pub fn augmented(&self) -> [EpochRecord; 4] {
        let per_channel: Vec<[Vec<f64>; 4]> = self.samples.iter().map(|s| augment(s)).collect();
        std::array::from_fn(|v| EpochRecord {
            samples: per_channel.iter().map(|vars| vars[v].clone()).collect(),
            ..self.clone()
        })
    }
}

/// Splits `rec` into non-overlapping windows of `epoch_length` seconds and
/// joins labels by index (missing labels count as background).
pub fn segment_epochs(rec: &Recording, labels: &LabelTable, epoch_length: f64) -> Result<Vec<EpochRecord>, EpochError> {
    if !(epoch_length > 0.0) {
        return Err(EpochError::EpochLength(epoch_length));
    }
    let chans: Vec<_> = rec.signal_channels().collect();
    let Some(first) = chans.first() else {
        return Ok(Vec::new());
    };
    if let Some(other) = chans.iter().find(|c| c.sample_rate != first.sample_rate) {
        return Err(EpochError::RateMismatch {
            first: first.header.label.clone(),
            first_rate: first.sample_rate,
            other: other.header.label.clone(),
            other_rate: other.sample_rate,
        });
    }
    let fs = first.sample_rate;
    let per = (epoch_length * fs).round() as usize;
    if per == 0 {
        return Ok(Vec::new());
    }
    let shortest = chans.iter().map(|c| c.samples.len()).min().unwrap_or(0);
    let count = shortest / per;
    let names: Vec<String> = chans.iter().map(|c| c.header.label.clone()).collect();
    Ok((0..count)
        .map(|i| EpochRecord {
            recording_id: rec.recording_id.clone(),
            epoch_index: i,
            start: i as f64 * epoch_length,
            fs,
            channels: names.clone(),
            samples: chans.iter().map(|c| c.samples[i * per..(i + 1) * per].to_vec()).collect(),
            label: labels.label_of(i).unwrap_or(0),
            flags: ArtifactFlags::empty(),
            split_tag: SplitTag::Train,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArtifactSpec {
    /// Largest allowed absolute first difference, units per sample.
    pub slope_limit: f64,
    /// Peak-to-peak below which a run counts as flat.
    pub flat_eps: f64,
    /// Minimum flat run length in samples.
    pub flat_run: usize,
}

impl Default for ArtifactSpec {
    fn default() -> Self {
        Self {
            slope_limit: 300.0,
            flat_eps: 0.5,
            flat_run: 64,
        }
    }
}

fn has_steep_slope(x: &[f64], limit: f64) -> bool {
    x.windows(2).any(|w| (w[1] - w[0]).abs() > limit)
}

/// Whether any window of `run` consecutive samples has peak-to-peak below `eps`.
fn has_flat_run(x: &[f64], eps: f64, run: usize) -> bool {
    let run = run.max(1);
    if x.len() < run {
        return false;
    }
    // Monotone deques of indices give window max/min in linear time.
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    for i in 0..x.len() {
        while maxq.back().is_some_and(|&j| x[j] <= x[i]) {
            maxq.pop_back();
        }
        maxq.push_back(i);
        while minq.back().is_some_and(|&j| x[j] >= x[i]) {
            minq.pop_back();
        }
        minq.push_back(i);
        if i + 1 >= run {
            let lo = i + 1 - run;
            while maxq.front().is_some_and(|&j| j < lo) {
                maxq.pop_front();
            }
            while minq.front().is_some_and(|&j| j < lo) {
                minq.pop_front();
            }
            if x[maxq[0]] - x[minq[0]] < eps {
                return true;
            }
        }
    }
    false
}

/// Adds slope and flatline flags. Existing flags are kept.
pub fn flag_artifacts(ep: &EpochRecord, spec: &ArtifactSpec) -> EpochRecord {
    let mut flags = ep.flags;
    for ch in &ep.samples {
        if has_steep_slope(ch, spec.slope_limit) {
            flags |= ArtifactFlags::STEEP_SLOPE;
        }
        if has_flat_run(ch, spec.flat_eps, spec.flat_run) {
            flags |= ArtifactFlags::FLATLINE;
        }
    }
    EpochRecord { flags, ..ep.clone() }
}

/// Sets `HIGH_SIMILARITY` on epochs overlapping any flagged interval.
pub fn attach_similarity_flags(epochs: &mut [EpochRecord], intervals: &[(f64, f64)], epoch_length: f64) {
    for ep in epochs.iter_mut() {
        let (lo, hi) = (ep.start, ep.start + epoch_length);
        if intervals.iter().any(|&(a, b)| a < hi && b > lo) {
            ep.flags |= ArtifactFlags::HIGH_SIMILARITY;
        }
    }
}

/// Indices of a class-balanced subset: every clean seizure row plus a seeded
/// uniform sample of equally many clean background rows (all of them if
/// there are fewer). Returned in ascending order.
pub fn balance_indices(labels: &[u8], clean: &[bool], seed: u64) -> Result<Vec<usize>, EpochError> {
    let seiz: Vec<usize> = (0..labels.len()).filter(|&i| clean[i] && labels[i] == 1).collect();
    if seiz.is_empty() {
        return Err(EpochError::NoSeizures);
    }
    let bckg: Vec<usize> = (0..labels.len()).filter(|&i| clean[i] && labels[i] == 0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = seiz.len().min(bckg.len());
    let mut out = seiz;
    out.extend(sample(&mut rng, bckg.len(), take).into_iter().map(|k| bckg[k]));
    out.sort_unstable();
    Ok(out)
}

/// Balanced training subset of artifact-free epochs.
pub fn balance_sample(epochs: &[EpochRecord], seed: u64) -> Result<Vec<EpochRecord>, EpochError> {
    let labels: Vec<u8> = epochs.iter().map(|e| e.label).collect();
    let clean: Vec<bool> = epochs.iter().map(|e| e.flags.is_empty()).collect();
    Ok(balance_indices(&labels, &clean, seed)?
        .into_iter()
        .map(|i| epochs[i].clone())
        .collect())
}
