//! Welch spectral estimates (auto and cross) with a periodic Hann window.

use rustfft::num_complex::Complex64;

use super::fir::hann_periodic;
use super::forward_plan;

/// Windowed, mean-removed one-sided DFTs of the Welch segments of a signal.
#[derive(Debug, Clone)]
pub struct Segments {
    pub fs: f64,
    pub nperseg: usize,
    /// Density scale `1 / (fs · Σw²)`.
    pub scale: f64,
    /// `spectra[s][k]` for bins `0..=nperseg/2`.
    pub spectra: Vec<Vec<Complex64>>,
}

/// Segment length for `seconds`-long segments, capped at the signal length.
pub fn segment_len(n: usize, fs: f64, seconds: f64) -> usize {
    ((seconds * fs).round() as usize).clamp(1, n.max(1))
}

impl Segments {
    /// Splits `x` into `nperseg` segments with 50 % overlap.
    pub fn new(x: &[f64], fs: f64, nperseg: usize) -> Self {
        let nperseg = nperseg.clamp(1, x.len().max(1));
        let hop = (nperseg - nperseg / 2).max(1);
        let w = hann_periodic(nperseg);
        let wsum: f64 = w.iter().map(|v| v * v).sum();
        let scale = if wsum > 0.0 { 1.0 / (fs * wsum) } else { 0.0 };
        let fft = forward_plan(nperseg);
        let mut spectra = Vec::new();
        let mut start = 0;
        while start + nperseg <= x.len() {
            let seg = &x[start..start + nperseg];
            let mean = seg.iter().sum::<f64>() / nperseg as f64;
            let mut buf: Vec<Complex64> = seg
                .iter()
                .zip(&w)
                .map(|(v, wi)| Complex64::new((v - mean) * wi, 0.0))
                .collect();
            fft.process(&mut buf);
            buf.truncate(nperseg / 2 + 1);
            spectra.push(buf);
            start += hop;
        }
        Self {
            fs,
            nperseg,
            scale,
            spectra,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.nperseg / 2 + 1
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.n_bins())
            .map(|k| k as f64 * self.fs / self.nperseg as f64)
            .collect()
    }

    /// Resolution of the frequency grid.
    pub fn df(&self) -> f64 {
        self.fs / self.nperseg as f64
    }

    /// One-sided weight of bin `k`: 1 at DC and at an even-length Nyquist, 2 elsewhere.
    fn one_sided(&self, k: usize) -> f64 {
        if k == 0 || (self.nperseg % 2 == 0 && k == self.nperseg / 2) {
            1.0
        } else {
            2.0
        }
    }

    /// Per-segment cross-spectrum `conj(X)·Y` scaled to a one-sided density.
    pub fn cross_segment(&self, other: &Segments, s: usize) -> Vec<Complex64> {
        self.spectra[s]
            .iter()
            .zip(&other.spectra[s])
            .enumerate()
            .map(|(k, (a, b))| a.conj() * b * (self.scale * self.one_sided(k)))
            .collect()
    }

    /// Segment-averaged cross spectral density.
    pub fn csd(&self, other: &Segments) -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.n_bins()];
        let count = self.spectra.len().min(other.spectra.len());
        for s in 0..count {
            for (a, v) in acc.iter_mut().zip(self.cross_segment(other, s)) {
                *a += v;
            }
        }
        if count > 0 {
            acc.iter_mut().for_each(|a| *a /= count as f64);
        }
        acc
    }

    /// Segment-averaged power spectral density.
    pub fn psd(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_bins()];
        for spec in &self.spectra {
            for (k, (a, c)) in acc.iter_mut().zip(spec).enumerate() {
                *a += c.norm_sqr() * self.scale * self.one_sided(k);
            }
        }
        if !self.spectra.is_empty() {
            let n = self.spectra.len() as f64;
            acc.iter_mut().for_each(|a| *a /= n);
        }
        acc
    }
}

/// Welch PSD with `seconds`-long segments: `(freqs, psd)`.
pub fn welch(x: &[f64], fs: f64, seconds: f64) -> (Vec<f64>, Vec<f64>) {
    let seg = Segments::new(x, fs, segment_len(x.len(), fs, seconds));
    (seg.freqs(), seg.psd())
}

/// Whether frequency `f` lies in `[lo, hi)`, or `[lo, hi]` when `hi` reaches Nyquist.
pub fn in_band(f: f64, lo: f64, hi: f64, nyquist: f64) -> bool {
    f >= lo && (f < hi || (hi >= nyquist && f <= nyquist))
}

/// Rectangle-rule integral of `psd` over a band.
pub fn band_power(freqs: &[f64], psd: &[f64], lo: f64, hi: f64, nyquist: f64) -> f64 {
    let df = if freqs.len() > 1 { freqs[1] - freqs[0] } else { 0.0 };
    freqs
        .iter()
        .zip(psd)
        .filter(|(f, _)| in_band(**f, lo, hi, nyquist))
        .map(|(_, p)| p * df)
        .sum()
}

/// Total power excluding the DC bin.
pub fn total_power(freqs: &[f64], psd: &[f64]) -> f64 {
    let df = if freqs.len() > 1 { freqs[1] - freqs[0] } else { 0.0 };
    psd.iter().skip(1).map(|p| p * df).sum()
}
