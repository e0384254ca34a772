//! Numerical signal-processing primitives shared by preprocessing and features.

pub mod fir;
pub mod resample;
pub mod spectrum;
pub mod wavelet;

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub(crate) fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Full complex DFT of a real sequence.
pub fn fft_real(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if !buf.is_empty() {
        forward_plan(buf.len()).process(&mut buf);
    }
    buf
}

/// Inverse DFT (normalised by 1/n), real part.
pub fn ifft_real(spec: &[Complex64]) -> Vec<f64> {
    let n = spec.len();
    let mut buf = spec.to_vec();
    if n > 0 {
        inverse_plan(n).process(&mut buf);
    }
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Full linear convolution via FFT, output length `a.len() + b.len() - 1`.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let pad = |x: &[f64]| {
        let mut v: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        v.resize(n, Complex64::new(0.0, 0.0));
        v
    };
    let (mut fa, mut fb) = (pad(a), pad(b));
    let fwd = forward_plan(n);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inverse_plan(n).process(&mut fa);
    fa.truncate(out_len);
    fa.iter().map(|c| c.re / n as f64).collect()
}

/// Frequency of DFT bin `k` for an `n`-point transform, signed (negative above Nyquist).
pub fn bin_frequency(k: usize, n: usize, fs: f64) -> f64 {
    if k <= n / 2 {
        k as f64 * fs / n as f64
    } else {
        (k as f64 - n as f64) * fs / n as f64
    }
}

/// Zero-phase brick-wall band-pass: keeps DFT bins with `lo ≤ |f| < hi`
/// (`|f| ≤ hi` when `hi` reaches Nyquist).
pub fn fft_bandpass(x: &[f64], fs: f64, lo: f64, hi: f64) -> Vec<f64> {
    let n = x.len();
    let nyquist = fs / 2.0;
    let mut spec = fft_real(x);
    for (k, c) in spec.iter_mut().enumerate() {
        let f = bin_frequency(k, n, fs).abs();
        let keep = f >= lo && (f < hi || (hi >= nyquist && f <= hi));
        if !keep {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    ifft_real(&spec)
}
