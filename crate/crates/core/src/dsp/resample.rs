//! Rational polyphase resampling.

use super::fir::lowpass;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Up/down factors `(L, M)` with `to/from = L/M` in lowest terms.
///
/// Rates are rounded to millihertz before reduction.
pub fn ratio(from_hz: f64, to_hz: f64) -> (u64, u64) {
    let a = (from_hz * 1000.0).round() as u64;
    let b = (to_hz * 1000.0).round() as u64;
    let g = gcd(a, b).max(1);
    (b / g, a / g)
}

/// Output length `round(n · to/from)`.
pub fn output_len(n: usize, from_hz: f64, to_hz: f64) -> usize {
    let (l, m) = ratio(from_hz, to_hz);
    ((n as u128 * l as u128 * 2 + m as u128) / (2 * m as u128)) as usize
}

/// A designed resampler for one rate pair, reusable across channels.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    taps: Vec<f64>,
}

impl Resampler {
    pub fn new(from_hz: f64, to_hz: f64) -> Self {
        assert!(from_hz > 0.0 && to_hz > 0.0, "sampling rates must be positive");
        let (l, m) = ratio(from_hz, to_hz);
        if l == m {
            return Self { up: 1, down: 1, taps: vec![1.0] };
        }
        let fs_up = from_hz * l as f64;
        let edge = 0.5 * from_hz.min(to_hz);
        let cutoff = 0.9 * edge;
        let width = edge - cutoff;
        let n = ((3.3 * fs_up / width).ceil() as usize) | 1;
        let mut taps = lowpass(n, cutoff, fs_up);
        taps.iter_mut().for_each(|t| *t *= l as f64);
        Self {
            up: l as usize,
            down: m as usize,
            taps,
        }
    }

    pub fn factors(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if self.up == self.down {
            return x.to_vec();
        }
        if n == 0 {
            return Vec::new();
        }
        let (l, m) = (self.up as i64, self.down as i64);
        let taps = self.taps.len() as i64;
        let delay = (taps - 1) / 2;
        let out_n = ((n as u128 * l as u128 * 2 + m as u128) / (2 * m as u128)) as usize;
        let sample = |i: i64| -> f64 {
            // Even mirror about the end samples, clamped for very short inputs.
            let last = n as i64 - 1;
            let j = if i < 0 {
                -i
            } else if i > last {
                2 * last - i
            } else {
                i
            };
            x[j.clamp(0, last) as usize]
        };
        (0..out_n as i64)
            .map(|k| {
                let centre = k * m + delay;
                let i_lo = (centre - (taps - 1)).div_euclid(l) + i64::from((centre - (taps - 1)).rem_euclid(l) != 0);
                let i_hi = centre.div_euclid(l);
                let mut acc = 0.0;
                for i in i_lo..=i_hi {
                    acc += sample(i) * self.taps[(centre - i * l) as usize];
                }
                acc
            })
            .collect()
    }
}

/// Resamples `x` from `from_hz` to `to_hz`.
pub fn resample(x: &[f64], from_hz: f64, to_hz: f64) -> Vec<f64> {
    Resampler::new(from_hz, to_hz).process(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_is_reduced() {
        assert_eq!(ratio(250.0, 256.0), (128, 125));
        assert_eq!(ratio(512.0, 256.0), (1, 2));
    }

    #[test]
    fn lengths() {
        assert_eq!(resample(&vec![0.0; 5120], 512.0, 256.0).len(), 2560);
        assert_eq!(resample(&vec![0.0; 2500], 250.0, 256.0).len(), 2560);
        assert_eq!(output_len(7, 3.0, 2.0), 5);
    }

    #[test]
    fn identity_when_rates_match() {
        let x = [0.3, -1.0, 2.5];
        assert_eq!(resample(&x, 256.0, 256.0), x.to_vec());
    }

    #[test]
    fn dc_is_preserved() {
        let y = resample(&vec![1.0; 1000], 250.0, 256.0);
        for v in &y[50..y.len() - 50] {
            assert!((v - 1.0).abs() < 1e-3, "{v}");
        }
    }
}
