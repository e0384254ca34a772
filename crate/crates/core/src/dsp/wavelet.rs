//! Daubechies-4 discrete wavelet transform with periodic extension.

/// db4 decomposition low-pass filter.
pub const DB4_DEC_LO: [f64; 8] = [
    -0.010597401784997278,
    0.032883011666982945,
    0.030841381835986965,
    -0.18703481171888114,
    -0.02798376941698385,
    0.6308807679295904,
    0.7148465705525415,
    0.23037781330885523,
];

fn filters() -> ([f64; 8], [f64; 8]) {
    let mut lo = DB4_DEC_LO;
    lo.reverse();
    let mut hi = [0.0; 8];
    for m in 0..8 {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        hi[m] = sign * lo[7 - m];
    }
    (lo, hi)
}

/// Periodic index aligned so that `a[k] = Σ_j h[j]·x[2k + 1 − j]`.
fn at(i: usize, n: usize) -> usize {
    (i as isize - 6).rem_euclid(n as isize) as usize
}

/// One analysis step: `(approximation, detail)`, each of length `ceil(n/2)`.
///
/// Odd-length inputs are padded by repeating the last sample.
pub fn dwt_step(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut buf = x.to_vec();
    if buf.len() % 2 == 1 {
        buf.push(*buf.last().unwrap());
    }
    let n = buf.len();
    let half = n / 2;
    let (lo, hi) = filters();
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for k in 0..half {
        for m in 0..8 {
            let v = buf[at(2 * k + m, n)];
            a[k] += lo[m] * v;
            d[k] += hi[m] * v;
        }
    }
    (a, d)
}

/// Inverse of [`dwt_step`] for even-length signals.
pub fn idwt_step(a: &[f64], d: &[f64]) -> Vec<f64> {
    let half = a.len();
    let n = 2 * half;
    let (lo, hi) = filters();
    let mut x = vec![0.0; n];
    for k in 0..half {
        for m in 0..8 {
            x[at(2 * k + m, n)] += lo[m] * a[k] + hi[m] * d[k];
        }
    }
    x
}

/// Decomposition depth used for an `n`-sample signal: `floor(log2 n) − 2`, at least 1.
pub fn default_levels(n: usize) -> usize {
    if n < 2 {
        return 0;
    }
    (n.ilog2() as usize).saturating_sub(2).max(1)
}

/// Coefficient energies of a multilevel decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelEnergies {
    /// `details[j]` is the detail energy at level `j + 1` (finest first).
    pub details: Vec<f64>,
    /// Energy of the final approximation.
    pub approximation: f64,
}

impl LevelEnergies {
    /// Nominal frequency range of each detail level, then of the approximation.
    pub fn ranges(&self, fs: f64) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = (0..self.details.len())
            .map(|j| (fs / 2f64.powi(j as i32 + 2), fs / 2f64.powi(j as i32 + 1)))
            .collect();
        out.push((0.0, fs / 2f64.powi(self.details.len() as i32 + 1)));
        out
    }

    pub fn energies(&self) -> Vec<f64> {
        let mut out = self.details.clone();
        out.push(self.approximation);
        out
    }
}

pub fn level_energies(x: &[f64], levels: usize) -> LevelEnergies {
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        if approx.len() < 2 {
            break;
        }
        let (a, d) = dwt_step(&approx);
        details.push(d.iter().map(|v| v * v).sum());
        approx = a;
    }
    LevelEnergies {
        details,
        approximation: approx.iter().map(|v| v * v).sum(),
    }
}

/// Sums level energies into bands, each level going to the band its nominal
/// range overlaps most. Levels overlapping no band are dropped.
pub fn band_energies(e: &LevelEnergies, fs: f64, bands: &[(f64, f64)]) -> Vec<f64> {
    let mut out = vec![0.0; bands.len()];
    for ((lo, hi), energy) in e.ranges(fs).into_iter().zip(e.energies()) {
        let best = bands
            .iter()
            .enumerate()
            .map(|(i, (blo, bhi))| (i, (hi.min(*bhi) - lo.max(*blo)).max(0.0)))
            .filter(|(_, ov)| *ov > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        if let Some((i, _)) = best {
            out[i] += energy;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect()
    }

    #[test]
    fn filter_is_orthonormal() {
        let (lo, hi) = filters();
        assert!((lo.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((lo.iter().sum::<f64>() - 2f64.sqrt()).abs() < 1e-12);
        assert!(lo.iter().zip(&hi).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn parseval_holds_per_level() {
        let x = signal(256);
        let e = level_energies(&x, default_levels(256));
        let total: f64 = x.iter().map(|v| v * v).sum();
        assert!((e.energies().iter().sum::<f64>() - total).abs() < 1e-9 * total);
    }

    #[test]
    fn perfect_reconstruction() {
        let x = signal(64);
        let (a, d) = dwt_step(&x);
        for (u, v) in idwt_step(&a, &d).iter().zip(&x) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn level_to_band_mapping_at_256_hz() {
        let e = level_energies(&signal(256), 6);
        let ranges = e.ranges(256.0);
        assert_eq!(ranges[0], (64.0, 128.0));
        assert_eq!(ranges[6], (0.0, 2.0));
        let bands = [(0.5, 4.0), (4.0, 8.0), (8.0, 13.0), (13.0, 30.0), (30.0, 80.0)];
        let be = band_energies(&e, 256.0, &bands);
        let d = &e.details;
        assert!((be[0] - (d[5] + e.approximation)).abs() < 1e-12);
        assert!((be[2] - d[3]).abs() < 1e-12);
        assert!((be[4] - (d[0] + d[1])).abs() < 1e-12);
    }
}
