//! Per-channel time-domain features.

pub const NAMES: [&str; 20] = [
    "mean",
    "variance",
    "std",
    "skewness",
    "kurtosis",
    "iqr",
    "min",
    "max",
    "peak_to_peak",
    "zero_crossings",
    "abs_area",
    "energy",
    "voltage_auc",
    "coastline",
    "hjorth_mobility",
    "hjorth_complexity",
    "petrosian_fd",
    "spike_count",
    "spikiness",
    "intermittency",
];

/// Parameters of the spike and intermittency features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalParams {
    /// Spike threshold in standard deviations above the mean.
    pub spike_k: f64,
    /// Minimum spacing between accepted spikes, seconds.
    pub spike_refractory: f64,
    /// Moving-RMS window for intermittency, seconds.
    pub intermittency_window: f64,
}

impl Default for TemporalParams {
    fn default() -> Self {
        Self {
            spike_k: 3.0,
            spike_refractory: 0.05,
            intermittency_window: 0.1,
        }
    }
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance; exactly 0 for constant input.
pub fn variance(x: &[f64]) -> f64 {
    if x.is_empty() || x.iter().all(|&v| v == x[0]) {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Linear-interpolation percentile of sorted data, `p` in `[0, 1]`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Count of strict sign changes between adjacent samples.
pub fn zero_crossings(x: &[f64]) -> usize {
    x.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
}

pub fn coastline(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

fn mobility_of(x: &[f64]) -> f64 {
    let v = variance(x);
    if v <= 0.0 || x.len() < 2 {
        return 0.0;
    }
    (variance(&diff(x)) / v).sqrt()
}

pub fn hjorth(x: &[f64]) -> (f64, f64) {
    let m = mobility_of(x);
    if m == 0.0 {
        return (0.0, 0.0);
    }
    (m, mobility_of(&diff(x)) / m)
}

/// Petrosian fractal dimension; 1 for degenerate inputs.
pub fn petrosian_fd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let d = diff(x);
    let n_delta = d.windows(2).filter(|w| w[0] * w[1] < 0.0).count() as f64;
    let num = n.log10();
    let den = num + (n / (n + 0.4 * n_delta)).log10();
    if x.len() < 2 || den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Local maxima above `mean + k·std`, accepted in time order when at least
/// `refractory` samples after the previously accepted spike.
pub fn spike_count(x: &[f64], k: f64, refractory: usize) -> usize {
    let sd = variance(x).sqrt();
    if sd == 0.0 || x.len() < 3 {
        return 0;
    }
    let thr = mean(x) + k * sd;
    let mut last: Option<usize> = None;
    let mut count = 0;
    for i in 1..x.len() - 1 {
        if x[i] > thr && x[i] > x[i - 1] && x[i] >= x[i + 1] && last.is_none_or(|l| i - l >= refractory) {
            count += 1;
            last = Some(i);
        }
    }
    count
}

/// Squared coefficient of variation of a moving RMS envelope (valid mode).
pub fn intermittency(x: &[f64], window: usize) -> f64 {
    let w = window.clamp(1, x.len().max(1));
    if x.is_empty() {
        return 0.0;
    }
    let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    let mut acc: f64 = sq[..w].iter().sum();
    let mut env = Vec::with_capacity(x.len() - w + 1);
    env.push((acc / w as f64).max(0.0).sqrt());
    for i in w..x.len() {
        acc += sq[i] - sq[i - w];
        env.push((acc / w as f64).max(0.0).sqrt());
    }
    let m = mean(&env);
    if m == 0.0 {
        0.0
    } else {
        variance(&env) / (m * m)
    }
}

/// All temporal features in [`NAMES`] order.
pub fn temporal_features(x: &[f64], fs: f64, p: &TemporalParams) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        let mut out = vec![0.0; NAMES.len()];
        out[16] = 1.0;
        return out;
    }
    let dt = 1.0 / fs;
    let m = mean(x);
    let var = variance(x);
    let sd = var.sqrt();
    let (skew, kurt) = if var > 0.0 {
        let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n as f64;
        let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n as f64;
        (m3 / var.powf(1.5), m4 / (var * var) - 3.0)
    } else {
        (0.0, 0.0)
    };
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = percentile_sorted(&sorted, 0.75) - percentile_sorted(&sorted, 0.25);
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let abs_area = x.iter().map(|v| v.abs()).sum::<f64>() * dt;
    let energy = x.iter().map(|v| v * v).sum::<f64>();
    let auc = x.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() * dt;
    let (mobility, complexity) = hjorth(x);
    let refractory = (p.spike_refractory * fs).round() as usize;
    let spikiness = if sd > 0.0 {
        x.iter().map(|v| (v - m).abs()).fold(0.0, f64::max) / sd
    } else {
        0.0
    };
    let win = (p.intermittency_window * fs).round() as usize;
    vec![
        m,
        var,
        sd,
        skew,
        kurt,
        iqr,
        lo,
        hi,
        hi - lo,
        zero_crossings(x) as f64,
        abs_area,
        energy,
        auc,
        coastline(x),
        mobility,
        complexity,
        petrosian_fd(x),
        spike_count(x, p.spike_k, refractory) as f64,
        spikiness,
        intermittency(x, win),
    ]
}
