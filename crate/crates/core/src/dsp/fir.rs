//! Hann-window FIR design and zero-phase (forward-backward) application.

use std::f64::consts::PI;

use super::fft_convolve;

/// Symmetric Hann window of `n` points (zero at both ends for `n > 1`).
pub fn hann_symmetric(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Periodic Hann window, the usual choice for spectral estimation.
pub fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Windowed-sinc low-pass with unit DC gain. `taps` should be odd.
pub fn lowpass(taps: usize, cutoff: f64, fs: f64) -> Vec<f64> {
    let w = hann_symmetric(taps);
    let mid = (taps as f64 - 1.0) / 2.0;
    let fc = cutoff / fs;
    let mut h: Vec<f64> = (0..taps)
        .map(|i| 2.0 * fc * sinc(2.0 * fc * (i as f64 - mid)) * w[i])
        .collect();
    let dc: f64 = h.iter().sum();
    if dc != 0.0 {
        h.iter_mut().for_each(|v| *v /= dc);
    }
    h
}

/// Spectral inversion of [`lowpass`]: exactly zero DC gain.
pub fn highpass(taps: usize, cutoff: f64, fs: f64) -> Vec<f64> {
    let mut h = lowpass(taps, cutoff, fs);
    h.iter_mut().for_each(|v| *v = -*v);
    h[taps / 2] += 1.0;
    h
}

/// Band-stop between `lo` and `hi` (unit DC gain).
pub fn bandstop(taps: usize, lo: f64, hi: f64, fs: f64) -> Vec<f64> {
    let upper = lowpass(taps, hi, fs);
    let lower = lowpass(taps, lo, fs);
    let mut h: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| l - u).collect();
    h[taps / 2] += 1.0;
    h
}

/// Default tap count for a high-pass at `cutoff`: `ceil(4·fs/cutoff)` made odd.
pub fn default_taps(fs: f64, cutoff: f64) -> usize {
    let n = (4.0 * fs / cutoff).ceil().max(3.0) as usize;
    n | 1
}

/// Magnitude response of `h` at frequency `f`.
pub fn gain_at(h: &[f64], f: f64, fs: f64) -> f64 {
    let w = 2.0 * PI * f / fs;
    let (re, im) = h.iter().enumerate().fold((0.0, 0.0), |(re, im), (k, &c)| {
        (re + c * (w * k as f64).cos(), im - c * (w * k as f64).sin())
    });
    (re * re + im * im).sqrt()
}

/// A linear-phase kernel prepared for zero-phase application.
///
/// Forward-backward filtering with `h` equals one centred convolution with
/// `h ⊛ reverse(h)`, which is what is stored.
#[derive(Debug, Clone)]
pub struct ZeroPhaseKernel {
    kernel: Vec<f64>,
}

impl ZeroPhaseKernel {
    /// Cascade of the given filters, each applied forward and backward.
    pub fn cascade(filters: &[Vec<f64>]) -> Self {
        let mut h = vec![1.0];
        for f in filters {
            h = fft_convolve(&h, f);
        }
        let rev: Vec<f64> = h.iter().rev().copied().collect();
        let mut kernel = fft_convolve(&h, &rev);
        // Force exact symmetry; the FFT leaves rounding-level asymmetry.
        let n = kernel.len();
        for i in 0..n / 2 {
            let m = 0.5 * (kernel[i] + kernel[n - 1 - i]);
            kernel[i] = m;
            kernel[n - 1 - i] = m;
        }
        Self { kernel }
    }

    pub fn len(&self) -> usize {
        self.kernel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernel.is_empty()
    }

    pub fn taps(&self) -> &[f64] {
        &self.kernel
    }

    /// Filters `x`, returning a sequence of the same length.
    ///
    /// Edges are extended by odd reflection about the end samples (up to
    /// `n − 1` samples), then held constant.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let half = (self.kernel.len() - 1) / 2;
        let reflect = half.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * half);
        let left_hold = if reflect > 0 { 2.0 * x[0] - x[reflect] } else { x[0] };
        ext.extend(std::iter::repeat_n(left_hold, half - reflect));
        ext.extend((1..=reflect).rev().map(|k| 2.0 * x[0] - x[k]));
        ext.extend_from_slice(x);
        ext.extend((1..=reflect).map(|k| 2.0 * x[n - 1] - x[n - 1 - k]));
        let right_hold = if reflect > 0 { 2.0 * x[n - 1] - x[n - 1 - reflect] } else { x[n - 1] };
        ext.extend(std::iter::repeat_n(right_hold, half - reflect));
        let full = fft_convolve(&ext, &self.kernel);
        full[2 * half..2 * half + n].to_vec()
    }
}
