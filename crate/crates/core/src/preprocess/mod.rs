//! Signal standardisation: filtering, amplitude smoothing, similarity
//! marking, resampling, bipolar re-referencing and augmentation.

mod montage;
mod smooth;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::fir::{bandstop, default_taps, highpass, ZeroPhaseKernel};
use crate::dsp::resample::Resampler;
use crate::edf::{Channel, Recording};

pub use montage::{rereference_bipolar, MontageMap};
pub use smooth::{amplitude_smooth, SmoothingSpec};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PreprocessError {
    #[error("channel {channel} sampled at {rate} Hz cannot carry a {required} Hz filter edge (Nyquist violation)")]
    Nyquist { channel: String, rate: f64, required: f64 },
    #[error("invalid {field}: {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("montage pairs reference missing electrodes: {}", .pairs.join(", "))]
    MissingElectrodes { pairs: Vec<String> },
    #[error("recording is already bipolar (channel {channel})")]
    AlreadyBipolar { channel: String },
    #[error("channels {a} and {b} have different sampling rates")]
    RateMismatch { a: String, b: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSpec {
    pub notch_freqs: Vec<f64>,
    pub highpass_cutoff: f64,
    pub fir_window: WindowKind,
    /// Taps per filter; `None` picks `ceil(4·fs/cutoff)` rounded up to odd.
    pub fir_order: Option<usize>,
    /// Total width of each notch in Hz.
    pub notch_width: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            notch_freqs: vec![50.0, 60.0],
            highpass_cutoff: 0.6,
            fir_window: WindowKind::Hann,
            fir_order: None,
            notch_width: 2.0,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if let Some(n) = self.fir_order {
            if n < 3 || n % 2 == 0 {
                return Err(PreprocessError::InvalidSpec {
                    field: "fir_order",
                    reason: format!("{n} must be odd and at least 3"),
                });
            }
        }
        if !(self.highpass_cutoff > 0.0) {
            return Err(PreprocessError::InvalidSpec {
                field: "highpass_cutoff",
                reason: format!("{} must be positive", self.highpass_cutoff),
            });
        }
        if let Some(f) = self.notch_freqs.iter().find(|f| !(**f > self.notch_width / 2.0)) {
            return Err(PreprocessError::InvalidSpec {
                field: "notch_freqs",
                reason: format!("{f} Hz must exceed half the notch width"),
            });
        }
        if !(self.notch_width > 0.0) {
            return Err(PreprocessError::InvalidSpec {
                field: "notch_width",
                reason: format!("{} must be positive", self.notch_width),
            });
        }
        Ok(())
    }

    fn highest_edge(&self) -> f64 {
        self.notch_freqs.iter().copied().fold(self.highpass_cutoff, f64::max)
    }

    /// The cascaded zero-phase kernel for sampling rate `fs`.
    pub fn kernel(&self, fs: f64) -> ZeroPhaseKernel {
        let taps = self
            .fir_order
            .unwrap_or_else(|| default_taps(fs, self.highpass_cutoff));
        let nyquist = fs / 2.0;
        let mut filters = vec![highpass(taps, self.highpass_cutoff, fs)];
        for &f in &self.notch_freqs {
            let lo = f - self.notch_width / 2.0;
            let hi = (f + self.notch_width / 2.0).min(nyquist);
            filters.push(bandstop(taps, lo, hi, fs));
        }
        ZeroPhaseKernel::cascade(&filters)
    }
}

/// Zero-phase high-pass plus notch filtering of every signal channel.
pub fn apply_filters(rec: &Recording, spec: &FilterSpec) -> Result<Recording, PreprocessError> {
    spec.validate()?;
    let required = spec.highest_edge();
    for ch in rec.signal_channels() {
        if ch.sample_rate <= 2.0 * required {
            return Err(PreprocessError::Nyquist {
                channel: ch.header.label.clone(),
                rate: ch.sample_rate,
                required,
            });
        }
    }
    let mut kernels: HashMap<u64, ZeroPhaseKernel> = HashMap::new();
    for ch in rec.signal_channels() {
        kernels
            .entry(ch.sample_rate.to_bits())
            .or_insert_with(|| spec.kernel(ch.sample_rate));
    }
    let channels = rec
        .channels
        .par_iter()
        .map(|ch| {
            if ch.header.is_annotation() {
                return ch.clone();
            }
            let samples = kernels[&ch.sample_rate.to_bits()].apply(&ch.samples);
            Channel { samples, ..ch.clone() }
        })
        .collect();
    Ok(Recording { channels, ..rec.clone_meta() })
}

/// Flags `window`-second intervals in which any pair of signal channels has
/// cosine similarity above `threshold`. Pairs where either side has zero
/// norm in the window are skipped. Samples are never modified.
pub fn mark_similarity_artifacts(rec: &Recording, window: f64, threshold: f64) -> Vec<(f64, f64)> {
    let chans: Vec<&Channel> = rec.signal_channels().collect();
    if chans.len() < 2 || !(window > 0.0) {
        return Vec::new();
    }
    let n_windows = crate::edf::epoch_count(rec.duration(), window);
    let mut flagged = Vec::new();
    for w in 0..n_windows {
        let slices: Vec<&[f64]> = chans
            .iter()
            .map(|c| {
                let per = (window * c.sample_rate).round() as usize;
                let lo = (w * per).min(c.samples.len());
                let hi = ((w + 1) * per).min(c.samples.len());
                &c.samples[lo..hi]
            })
            .collect();
        let norms: Vec<f64> = slices.iter().map(|s| s.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let mut hit = false;
        'pairs: for i in 0..slices.len() {
            for j in i + 1..slices.len() {
                if norms[i] == 0.0 || norms[j] == 0.0 || slices[i].len() != slices[j].len() {
                    continue;
                }
                let dot: f64 = slices[i].iter().zip(slices[j]).map(|(a, b)| a * b).sum();
                if dot / (norms[i] * norms[j]) > threshold {
                    hit = true;
                    break 'pairs;
                }
            }
        }
        if hit {
            flagged.push((w as f64 * window, (w + 1) as f64 * window));
        }
    }
    flagged
}

/// Resamples every signal channel to `to_hz`.
pub fn resample_recording(rec: &Recording, to_hz: f64) -> Recording {
    let mut designs: HashMap<u64, Resampler> = HashMap::new();
    for ch in rec.signal_channels() {
        designs
            .entry(ch.sample_rate.to_bits())
            .or_insert_with(|| Resampler::new(ch.sample_rate, to_hz));
    }
    let channels = rec
        .signal_channels()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|ch| {
            let samples = designs[&ch.sample_rate.to_bits()].process(&ch.samples);
            let mut header = ch.header.clone();
            header.samples_per_record = (rec.record_duration * to_hz).round().max(1.0) as usize;
            Channel {
                header,
                sample_rate: to_hz,
                samples,
            }
        })
        .collect();
    Recording { channels, ..rec.clone_meta() }
}

pub use crate::dsp::resample::resample;

/// The four training variants of a sequence: identity, sign flip, time
/// reversal, and both.
pub fn augment(x: &[f64]) -> [Vec<f64>; 4] {
    let flip: Vec<f64> = x.iter().map(|v| -v).collect();
    let rev: Vec<f64> = x.iter().rev().copied().collect();
    let both: Vec<f64> = rev.iter().map(|v| -v).collect();
    [x.to_vec(), flip, rev, both]
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;
    use std::f64::consts::PI;

    fn sine(f: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect()
    }

    /// Amplitude at `f` from an FFT of the interior (one-sided, peak-normalised).
    fn tone_amplitude(x: &[f64], f: f64, fs: f64) -> f64 {
        let spec = crate::dsp::fft_real(x);
        let k = (f * x.len() as f64 / fs).round() as usize;
        2.0 * spec[k].norm() / x.len() as f64
    }

    #[test]
    fn mains_tone_is_removed_and_alpha_passes() {
        let fs = 256.0;
        let n = 256 * 20;
        let rec = recording(vec![channel("A", fs, sine(60.0, fs, n)), channel("B", fs, sine(10.0, fs, n))]);
        let out = apply_filters(&rec, &FilterSpec::default()).unwrap();
        let mid = |x: &[f64]| x[256 * 5..256 * 15].to_vec();
        let a60 = tone_amplitude(&mid(&out.channels[0].samples), 60.0, fs);
        let a10 = tone_amplitude(&mid(&out.channels[1].samples), 10.0, fs);
        assert!(20.0 * a60.log10() <= -40.0, "{a60}");
        assert!((20.0 * a10.log10()).abs() <= 1.0, "{a10}");
        assert_eq!(out.channels[0].samples.len(), n);
    }

    #[test]
    fn zero_in_zero_out() {
        let rec = recording(vec![channel("A", 256.0, vec![0.0; 512])]);
        let out = apply_filters(&rec, &FilterSpec::default()).unwrap();
        assert!(out.channels[0].samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nyquist_violation_names_channel() {
        let rec = recording(vec![channel("LOW", 100.0, vec![0.0; 100])]);
        let err = apply_filters(&rec, &FilterSpec::default()).unwrap_err();
        assert!(err.to_string().contains("LOW"));
        assert!(err.to_string().contains("100"));
    }

    #[test]
    fn even_order_rejected() {
        let spec = FilterSpec { fir_order: Some(100), ..Default::default() };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn identical_channels_flag_every_window() {
        let s = sine(10.0, 256.0, 256 * 4);
        let rec = recording(vec![channel("A", 256.0, s.clone()), channel("B", 256.0, s)]);
        assert_eq!(mark_similarity_artifacts(&rec, 1.0, 0.95).len(), 4);
    }

    #[test]
    fn orthogonal_sines_are_not_flagged() {
        let a = sine(10.0, 256.0, 256 * 4);
        let b = sine(15.0, 256.0, 256 * 4);
        // Inner-product oracle per window.
        for w in 0..4 {
            let dot: f64 = (0..256).map(|i| a[w * 256 + i] * b[w * 256 + i]).sum();
            assert!(dot.abs() < 1e-9);
        }
        let rec = recording(vec![channel("A", 256.0, a), channel("B", 256.0, b)]);
        assert!(mark_similarity_artifacts(&rec, 1.0, 0.95).is_empty());
    }

    #[test]
    fn zero_channel_pair_is_skipped() {
        let rec = recording(vec![channel("A", 256.0, vec![0.0; 512]), channel("B", 256.0, vec![0.0; 512])]);
        assert!(mark_similarity_artifacts(&rec, 1.0, 0.95).is_empty());
    }

    #[test]
    fn augment_variants() {
        let v = augment(&[1.0, 2.0, 3.0]);
        assert_eq!(v[0], vec![1.0, 2.0, 3.0]);
        assert_eq!(v[1], vec![-1.0, -2.0, -3.0]);
        assert_eq!(v[2], vec![3.0, 2.0, 1.0]);
        assert_eq!(v[3], vec![-3.0, -2.0, -1.0]);
        assert_eq!(augment(&v[1])[1], v[0]);
    }

    #[test]
    fn resample_recording_updates_rate() {
        let rec = recording(vec![channel("A", 512.0, sine(10.0, 512.0, 5120))]);
        let out = resample_recording(&rec, 256.0);
        assert_eq!(out.channels[0].samples.len(), 2560);
        assert_eq!(out.channels[0].sample_rate, 256.0);
        assert_eq!(out.channels[0].header.samples_per_record, 256);
    }
}
