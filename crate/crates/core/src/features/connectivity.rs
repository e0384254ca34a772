//! Pairwise channel coupling: cross-correlation, coherence, imaginary
//! coherence and the phase slope index.

use rustfft::num_complex::Complex64;

use super::BandDefinition;
use crate::dsp::fft_convolve;
use crate::dsp::spectrum::{in_band, Segments};

/// Per-pair feature layout: xcorr, coherence per band, imaginary coherence per band, psi.
pub fn pair_names(bands: &[BandDefinition]) -> Vec<String> {
    let mut out = vec!["xcorr_max".to_string()];
    out.extend(bands.iter().map(|b| format!("coherence_{}", b.name)));
    out.extend(bands.iter().map(|b| format!("imag_coherence_{}", b.name)));
    out.push("psi".into());
    out
}

/// Symmetric matrix of one coupling measure over all channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    pub measure: String,
    pub values: Vec<Vec<f64>>,
}

impl ConnectivityMatrix {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Upper-triangle values in row-major order.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.values[i][j])
            .collect()
    }
}

/// Largest absolute Pearson correlation between `x[t]` and `y[t + k]` over
/// their overlap, for `|k| ≤ max_lag`. Lags with a constant overlap are skipped.
pub fn xcorr_max(x: &[f64], y: &[f64], max_lag: usize) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let (x, y) = (&x[..n], &y[..n]);
    let xr: Vec<f64> = x.iter().rev().copied().collect();
    // r[k + n − 1] = Σ_t x[t]·y[t + k]
    let r = fft_convolve(y, &xr);
    let prefix = |v: &[f64], sq: bool| {
        let mut p = vec![0.0; n + 1];
        for i in 0..n {
            p[i + 1] = p[i] + if sq { v[i] * v[i] } else { v[i] };
        }
        p
    };
    let (px, pxx, py, pyy) = (prefix(x, false), prefix(x, true), prefix(y, false), prefix(y, true));
    let max_lag = max_lag.min(n - 2);
    let mut best: f64 = 0.0;
    for k in -(max_lag as i64)..=(max_lag as i64) {
        // Overlap: x[a..a+m], y[b..b+m].
        let m = n - k.unsigned_abs() as usize;
        let (a, b) = if k >= 0 { (0, k as usize) } else { ((-k) as usize, 0) };
        let mf = m as f64;
        let sx = px[a + m] - px[a];
        let sy = py[b + m] - py[b];
        let sxx = pxx[a + m] - pxx[a];
        let syy = pyy[b + m] - pyy[b];
        let sxy = r[(k + n as i64 - 1) as usize];
        let vx = sxx - sx * sx / mf;
        let vy = syy - sy * sy / mf;
        if vx <= 1e-12 * sxx.max(f64::MIN_POSITIVE) || vy <= 1e-12 * syy.max(f64::MIN_POSITIVE) {
            continue;
        }
        let c = ((sxy - sx * sy / mf) / (vx * vy).sqrt()).clamp(-1.0, 1.0);
        best = best.max(c.abs());
    }
    best
}

fn coherency(sxy: Complex64, sxx: f64, syy: f64) -> Option<Complex64> {
    let d = sxx * syy;
    (d > 0.0).then(|| sxy / d.sqrt())
}

/// Mean magnitude-squared and imaginary coherence over the band's bins.
pub fn band_coherence(
    csd: &[Complex64],
    pxx: &[f64],
    pyy: &[f64],
    freqs: &[f64],
    band: &BandDefinition,
    nyquist: f64,
) -> (f64, f64) {
    let (mut coh, mut imag, mut count) = (0.0, 0.0, 0usize);
    for k in 0..freqs.len() {
        if !in_band(freqs[k], band.lo, band.hi, nyquist) {
            continue;
        }
        if let Some(c) = coherency(csd[k], pxx[k], pyy[k]) {
            coh += c.norm_sqr().min(1.0);
            imag += c.im.abs().min(1.0);
            count += 1;
        }
    }
    if count == 0 {
        (0.0, 0.0)
    } else {
        (coh / count as f64, imag / count as f64)
    }
}

fn raw_psi(csd: &[Complex64], pxx: &[f64], pyy: &[f64], bins: &[usize]) -> f64 {
    bins.windows(2)
        .filter(|w| w[1] == w[0] + 1)
        .filter_map(|w| {
            let a = coherency(csd[w[0]], pxx[w[0]], pyy[w[0]])?;
            let b = coherency(csd[w[1]], pxx[w[1]], pyy[w[1]])?;
            Some((a * b.conj()).im)
        })
        .sum()
}

/// Phase slope index over `[lo, hi)`, divided by its leave-one-segment-out
/// jackknife standard deviation. Positive when `x` leads `y`.
pub fn phase_slope_index(sx: &Segments, sy: &Segments, lo: f64, hi: f64) -> f64 {
    let freqs = sx.freqs();
    let nyquist = sx.fs / 2.0;
    let bins: Vec<usize> = (0..freqs.len()).filter(|&k| in_band(freqs[k], lo, hi, nyquist)).collect();
    let k_seg = sx.spectra.len().min(sy.spectra.len());
    if k_seg < 2 || bins.len() < 2 {
        return 0.0;
    }
    let per_seg: Vec<(Vec<Complex64>, Vec<f64>, Vec<f64>)> = (0..k_seg)
        .map(|s| {
            (
                sx.cross_segment(sy, s),
                sx.cross_segment(sx, s).iter().map(|c| c.re).collect(),
                sy.cross_segment(sy, s).iter().map(|c| c.re).collect(),
            )
        })
        .collect();
    let average = |skip: Option<usize>| {
        let nb = freqs.len();
        let (mut c, mut p, mut q) = (vec![Complex64::new(0.0, 0.0); nb], vec![0.0; nb], vec![0.0; nb]);
        let mut used = 0.0;
        for (s, (cs, ps, qs)) in per_seg.iter().enumerate() {
            if Some(s) == skip {
                continue;
            }
            used += 1.0;
            for k in 0..nb {
                c[k] += cs[k];
                p[k] += ps[k];
                q[k] += qs[k];
            }
        }
        for k in 0..nb {
            c[k] /= used;
            p[k] /= used;
            q[k] /= used;
        }
        raw_psi(&c, &p, &q, &bins)
    };
    let full = average(None);
    let jack: Vec<f64> = (0..k_seg).map(|s| average(Some(s))).collect();
    let m = jack.iter().sum::<f64>() / k_seg as f64;
    let var = jack.iter().map(|v| (v - m) * (v - m)).sum::<f64>() * (k_seg as f64 - 1.0) / k_seg as f64;
    let sd = var.sqrt();
    if sd > 0.0 && sd.is_finite() {
        full / sd
    } else {
        0.0
    }
}

/// Features of one ordered pair in [`pair_names`] order. A constant channel
/// gives all zeros.
pub fn pair_features(
    x: &[f64],
    y: &[f64],
    sx: &Segments,
    sy: &Segments,
    bands: &[BandDefinition],
    psi_band: (f64, f64),
) -> Vec<f64> {
    let len = 2 + 2 * bands.len();
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if x.is_empty() || constant(x) || constant(y) {
        return vec![0.0; len];
    }
    let mut out = Vec::with_capacity(len);
    out.push(xcorr_max(x, y, x.len() / 4));
    let freqs = sx.freqs();
    let nyquist = sx.fs / 2.0;
    let csd = sx.csd(sy);
    let (pxx, pyy) = (sx.psd(), sy.psd());
    let per_band: Vec<(f64, f64)> = bands
        .iter()
        .map(|b| band_coherence(&csd, &pxx, &pyy, &freqs, b, nyquist))
        .collect();
    out.extend(per_band.iter().map(|c| c.0));
    out.extend(per_band.iter().map(|c| c.1));
    out.push(phase_slope_index(sx, sy, psi_band.0, psi_band.1));
    out
}
