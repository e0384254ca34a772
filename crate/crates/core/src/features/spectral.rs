//! Per-channel, per-band spectral features.

use super::BandDefinition;
use crate::dsp::spectrum::{band_power, in_band, total_power, Segments};
use crate::dsp::wavelet::{band_energies, default_levels, level_energies};
use crate::dsp::fft_bandpass;

pub const NAMES: [&str; 7] = [
    "psd_power",
    "spectral_centroid",
    "energy_pct",
    "monotony",
    "snr",
    "dwt_energy",
    "coastline",
];

/// Fraction of adjacent first-difference pairs with the same strict sign.
pub fn monotony(x: &[f64]) -> f64 {
    if x.len() < 3 {
        return 0.0;
    }
    let d = super::temporal::diff(x);
    let agree = d.windows(2).filter(|w| w[0] * w[1] > 0.0).count();
    agree as f64 / (d.len() - 1) as f64
}

/// Features for every band, band-major: `out[b * 7 + f]`.
pub fn spectral_band_features(x: &[f64], fs: f64, bands: &[BandDefinition], segments: &Segments) -> Vec<f64> {
    let freqs = segments.freqs();
    let psd = segments.psd();
    let nyquist = fs / 2.0;
    let total = total_power(&freqs, &psd);
    let edges: Vec<(f64, f64)> = bands.iter().map(|b| (b.lo, b.hi)).collect();
    let dwt = band_energies(&level_energies(x, default_levels(x.len())), fs, &edges);
    let mut out = Vec::with_capacity(bands.len() * NAMES.len());
    for (b, band) in bands.iter().enumerate() {
        let power = band_power(&freqs, &psd, band.lo, band.hi, nyquist);
        let (wsum, psum) = freqs
            .iter()
            .zip(&psd)
            .filter(|(f, _)| in_band(**f, band.lo, band.hi, nyquist))
            .fold((0.0, 0.0), |(w, s), (f, p)| (w + f * p, s + p));
        let centroid = if psum > 0.0 { wsum / psum } else { 0.0 };
        let pct = if total > 0.0 { power / total } else { 0.0 };
        let rest = total - power;
        let snr = if rest > 0.0 { power / rest } else { 0.0 };
        let filtered = fft_bandpass(x, fs, band.lo, band.hi);
        out.extend([
            power,
            centroid,
            pct,
            monotony(&filtered),
            snr,
            dwt[b],
            super::temporal::coastline(&filtered),
        ]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::default_bands;
    use std::f64::consts::PI;

    fn run(x: &[f64]) -> Vec<f64> {
        let seg = Segments::new(x, 256.0, 128);
        spectral_band_features(x, 256.0, &default_bands(), &seg)
    }

    #[test]
    fn alpha_tone_dominates() {
        let x: Vec<f64> = (0..256).map(|i| (2.0 * PI * 10.0 * i as f64 / 256.0).sin()).collect();
        let f = run(&x);
        let pct = |b: usize| f[b * 7 + 2];
        assert!(pct(2) >= 0.95, "{}", pct(2));
        assert!(pct(0) + pct(1) + pct(3) + pct(4) <= 0.05);
        assert!((f[2 * 7 + 1] - 10.0).abs() <= 2.0);
    }

    #[test]
    fn zero_signal_sentinels() {
        assert!(run(&vec![0.0; 256]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn monotony_of_ramp_is_one() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(monotony(&x), 1.0);
        let z: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(monotony(&z), 0.0);
    }
}
