//! Slow, direct reference implementations for the acceptance checks.
//! Nothing here calls into the crate's numeric code.
#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

pub type C = (f64, f64);

fn cmul(a: C, b: C) -> C {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn conj(a: C) -> C {
    (a.0, -a.1)
}

fn norm2(a: C) -> f64 {
    a.0 * a.0 + a.1 * a.1
}

/// Direct O(n²) DFT, `X[k] = Σ x[t]·exp(−2πi·kt/n)`.
pub fn dft(x: &[f64]) -> Vec<C> {
    let n = x.len();
    let tw: Vec<C> = (0..n)
        .map(|m| {
            let a = -2.0 * PI * m as f64 / n as f64;
            (a.cos(), a.sin())
        })
        .collect();
    (0..n)
        .map(|k| {
            let mut acc = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let w = tw[(k * t) % n];
                acc.0 += v * w.0;
                acc.1 += v * w.1;
            }
            acc
        })
        .collect()
}

/// Real part of the direct inverse DFT.
pub fn idft_real(spec: &[C]) -> Vec<f64> {
    let n = spec.len();
    (0..n)
        .map(|t| {
            let mut acc = 0.0;
            for (k, c) in spec.iter().enumerate() {
                let a = 2.0 * PI * ((k * t) % n) as f64 / n as f64;
                acc += c.0 * a.cos() - c.1 * a.sin();
            }
            acc / n as f64
        })
        .collect()
}

/// Magnitude of the DTFT of `x` (sampled at `fs`) at frequency `f`.
pub fn dtft_mag(x: &[f64], fs: f64, f: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (t, v) in x.iter().enumerate() {
        let a = 2.0 * PI * f * t as f64 / fs;
        re += v * a.cos();
        im -= v * a.sin();
    }
    (re * re + im * im).sqrt()
}

fn in_band(f: f64, lo: f64, hi: f64, nyquist: f64) -> bool {
    f >= lo && (f < hi || (hi >= nyquist && f <= nyquist))
}

// ---- temporal ----

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn central_moment(x: &[f64], k: i32) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / x.len() as f64
}

fn quantile(x: &[f64], p: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = p * (s.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < s.len() {
        s[i] * (1.0 - frac) + s[i + 1] * frac
    } else {
        s[i]
    }
}

fn diffs(x: &[f64]) -> Vec<f64> {
    (1..x.len()).map(|i| x[i] - x[i - 1]).collect()
}

fn sign_changes(x: &[f64]) -> usize {
    (1..x.len())
        .filter(|&i| (x[i - 1] < 0.0 && x[i] > 0.0) || (x[i - 1] > 0.0 && x[i] < 0.0))
        .count()
}

fn mobility(x: &[f64]) -> f64 {
    (central_moment(&diffs(x), 2) / central_moment(x, 2)).sqrt()
}

/// The 20 per-channel time-domain features, for non-constant input.
pub fn temporal(x: &[f64], fs: f64) -> Vec<(&'static str, f64)> {
    let n = x.len();
    let m = mean(x);
    let var = central_moment(x, 2);
    let sd = var.sqrt();
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dt = 1.0 / fs;
    let mut trapezoid = 0.0;
    for i in 1..n {
        trapezoid += (x[i - 1] + x[i]) * dt / 2.0;
    }
    let d = diffs(x);
    let mob = mobility(x);
    let nd = sign_changes(&d) as f64;
    let nf = n as f64;
    let pfd = nf.log10() / (nf.log10() + (nf / (nf + 0.4 * nd)).log10());

    let thr = m + 3.0 * sd;
    let refractory = (0.05 * fs).round() as usize;
    let peaks: Vec<usize> = (1..n - 1).filter(|&i| x[i] > thr && x[i] > x[i - 1] && x[i] >= x[i + 1]).collect();
    let mut spikes: Vec<usize> = Vec::new();
    for p in peaks {
        if spikes.last().is_none_or(|&q| p - q >= refractory) {
            spikes.push(p);
        }
    }

    let w = (0.1 * fs).round() as usize;
    let env: Vec<f64> = (0..=n - w)
        .map(|s| (x[s..s + w].iter().map(|v| v * v).sum::<f64>() / w as f64).sqrt())
        .collect();
    let intermittency = central_moment(&env, 2) / mean(&env).powi(2);

    vec![
        ("mean", m),
        ("variance", var),
        ("std", sd),
        ("skewness", central_moment(x, 3) / sd.powi(3)),
        ("kurtosis", central_moment(x, 4) / var.powi(2) - 3.0),
        ("iqr", quantile(x, 0.75) - quantile(x, 0.25)),
        ("min", lo),
        ("max", hi),
        ("peak_to_peak", hi - lo),
        ("zero_crossings", sign_changes(x) as f64),
        ("abs_area", x.iter().map(|v| v.abs() * dt).sum()),
        ("energy", x.iter().map(|v| v * v).sum()),
        ("voltage_auc", trapezoid),
        ("coastline", d.iter().map(|v| v.abs()).sum()),
        ("hjorth_mobility", mob),
        ("hjorth_complexity", mobility(&d) / mob),
        ("petrosian_fd", pfd),
        ("spike_count", spikes.len() as f64),
        ("spikiness", x.iter().map(|v| (v - m).abs()).fold(0.0, f64::max) / sd),
        ("intermittency", intermittency),
    ]
}

// ---- Welch ----

pub struct Welch {
    pub fs: f64,
    pub nperseg: usize,
    /// Scaled one-sided segment spectra, `sqrt(scale·weight)·X[k]`.
    pub segs: Vec<Vec<C>>,
}

impl Welch {
    pub fn new(x: &[f64], fs: f64, nperseg: usize) -> Self {
        let w: Vec<f64> = (0..nperseg).map(|k| (PI * k as f64 / nperseg as f64).sin().powi(2)).collect();
        let scale = 1.0 / (fs * w.iter().map(|v| v * v).sum::<f64>());
        let hop = nperseg - nperseg / 2;
        let mut segs = Vec::new();
        let mut start = 0;
        while start + nperseg <= x.len() {
            let m = mean(&x[start..start + nperseg]);
            let seg: Vec<f64> = (0..nperseg).map(|k| (x[start + k] - m) * w[k]).collect();
            let spec = dft(&seg);
            let half: Vec<C> = (0..=nperseg / 2)
                .map(|k| {
                    let weight = if k == 0 || (nperseg % 2 == 0 && k == nperseg / 2) { 1.0 } else { 2.0 };
                    let g = (scale * weight).sqrt();
                    (spec[k].0 * g, spec[k].1 * g)
                })
                .collect();
            segs.push(half);
            start += hop;
        }
        Self { fs, nperseg, segs }
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..=self.nperseg / 2).map(|k| k as f64 * self.fs / self.nperseg as f64).collect()
    }

    fn cross_of(&self, other: &Welch, keep: &dyn Fn(usize) -> bool) -> Vec<C> {
        let used: Vec<usize> = (0..self.segs.len()).filter(|&s| keep(s)).collect();
        (0..=self.nperseg / 2)
            .map(|k| {
                let mut acc = (0.0, 0.0);
                for &s in &used {
                    let v = cmul(conj(self.segs[s][k]), other.segs[s][k]);
                    acc.0 += v.0;
                    acc.1 += v.1;
                }
                (acc.0 / used.len() as f64, acc.1 / used.len() as f64)
            })
            .collect()
    }

    pub fn psd(&self) -> Vec<f64> {
        self.cross_of(self, &|_| true).iter().map(|c| c.0).collect()
    }

    pub fn csd(&self, other: &Welch) -> Vec<C> {
        self.cross_of(other, &|_| true)
    }
}

// ---- spectral ----

/// Energies of a periodised db4 decomposition, coefficients from the
/// standard published filter tables (convolution then keep odd samples).
fn db4_level_energies(x: &[f64], levels: usize) -> Vec<f64> {
    const LO: [f64; 8] = [
        -0.010597401785069032,
        0.0328830116668852,
        0.030841381835560764,
        -0.18703481171909309,
        -0.027983769416859854,
        0.6308807679298589,
        0.7148465705529157,
        0.2303778133088965,
    ];
    const HI: [f64; 8] = [
        -0.2303778133088965,
        0.7148465705529157,
        -0.6308807679298589,
        -0.027983769416859854,
        0.18703481171909309,
        0.030841381835560764,
        -0.0328830116668852,
        -0.010597401785069032,
    ];
    let mut a = x.to_vec();
    let mut out = Vec::new();
    for _ in 0..levels {
        let n = a.len() as i64;
        let step = |h: &[f64; 8], k: i64| -> f64 { (0..8).map(|j| h[j as usize] * a[((2 * k + 1 - j).rem_euclid(n)) as usize]).sum() };
        let approx: Vec<f64> = (0..n / 2).map(|k| step(&LO, k)).collect();
        let detail: Vec<f64> = (0..n / 2).map(|k| step(&HI, k)).collect();
        out.push(detail.iter().map(|v| v * v).sum());
        a = approx;
    }
    out.push(a.iter().map(|v| v * v).sum());
    out
}

pub struct Band {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
}

pub const BANDS: [Band; 5] = [
    Band { name: "delta", lo: 0.5, hi: 4.0 },
    Band { name: "theta", lo: 4.0, hi: 8.0 },
    Band { name: "alpha", lo: 8.0, hi: 13.0 },
    Band { name: "beta", lo: 13.0, hi: 30.0 },
    Band { name: "gamma", lo: 30.0, hi: 80.0 },
];

fn brick_wall(x: &[f64], fs: f64, lo: f64, hi: f64) -> Vec<f64> {
    let n = x.len();
    let nyquist = fs / 2.0;
    let mut spec = dft(x);
    for (k, c) in spec.iter_mut().enumerate() {
        let f = (k.min(n - k)) as f64 * fs / n as f64;
        if !(f >= lo && (f < hi || (hi >= nyquist && f <= hi))) {
            *c = (0.0, 0.0);
        }
    }
    idft_real(&spec)
}

/// Per-band features, keyed `feature_band`.
pub fn spectral(x: &[f64], fs: f64, w: &Welch) -> Vec<(String, f64)> {
    let freqs = w.freqs();
    let psd = w.psd();
    let df = fs / w.nperseg as f64;
    let nyquist = fs / 2.0;
    let total: f64 = psd[1..].iter().map(|p| p * df).sum();

    let levels = (x.len() as f64).log2().floor() as usize - 2;
    let energies = db4_level_energies(x, levels);
    let mut dwt = [0.0; 5];
    for (j, e) in energies.iter().enumerate() {
        let (lo, hi) = if j < levels {
            (fs / 2f64.powi(j as i32 + 2), fs / 2f64.powi(j as i32 + 1))
        } else {
            (0.0, fs / 2f64.powi(levels as i32 + 1))
        };
        let mut best: Option<(usize, f64)> = None;
        for (b, band) in BANDS.iter().enumerate() {
            let ov = hi.min(band.hi) - lo.max(band.lo);
            if ov > 0.0 && best.is_none_or(|(_, o)| ov > o) {
                best = Some((b, ov));
            }
        }
        if let Some((b, _)) = best {
            dwt[b] += e;
        }
    }

    let mut out = Vec::new();
    for (b, band) in BANDS.iter().enumerate() {
        let bins: Vec<usize> = (0..freqs.len()).filter(|&k| in_band(freqs[k], band.lo, band.hi, nyquist)).collect();
        let power: f64 = bins.iter().map(|&k| psd[k] * df).sum();
        let psum: f64 = bins.iter().map(|&k| psd[k]).sum();
        let centroid = bins.iter().map(|&k| freqs[k] * psd[k]).sum::<f64>() / psum;
        let filtered = brick_wall(x, fs, band.lo, band.hi);
        let d = diffs(&filtered);
        let same = (1..d.len()).filter(|&i| (d[i] > 0.0 && d[i - 1] > 0.0) || (d[i] < 0.0 && d[i - 1] < 0.0)).count();
        let coast: f64 = d.iter().map(|v| v.abs()).sum();
        for (f, v) in [
            ("psd_power", power),
            ("spectral_centroid", centroid),
            ("energy_pct", power / total),
            ("monotony", same as f64 / (d.len() - 1) as f64),
            ("snr", power / (total - power)),
            ("dwt_energy", dwt[b]),
            ("coastline", coast),
        ] {
            out.push((format!("{f}_{}", band.name), v));
        }
    }
    out
}

// ---- connectivity ----

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let saa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let sbb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

fn band_coherence(xs: &Welch, ys: &Welch, lo: f64, hi: f64) -> (f64, f64) {
    let freqs = xs.freqs();
    let nyquist = xs.fs / 2.0;
    let (pxx, pyy, pxy) = (xs.psd(), ys.psd(), xs.csd(ys));
    let (mut coh, mut imag, mut count) = (0.0, 0.0, 0);
    for k in 0..freqs.len() {
        if in_band(freqs[k], lo, hi, nyquist) && pxx[k] * pyy[k] > 0.0 {
            let denom = (pxx[k] * pyy[k]).sqrt();
            coh += (norm2(pxy[k]) / (pxx[k] * pyy[k])).min(1.0);
            imag += (pxy[k].1 / denom).abs().min(1.0);
            count += 1;
        }
    }
    if count == 0 {
        (0.0, 0.0)
    } else {
        (coh / count as f64, imag / count as f64)
    }
}

/// Nolte's phase slope index, `Im Σ conj(C(f))·C(f+δf)` with coherency
/// `C = S_xy / sqrt(S_xx S_yy)` and `S_xy = <X·conj(Y)>`, divided by the
/// leave-one-segment-out jackknife standard deviation.
fn psi(xs: &Welch, ys: &Welch, lo: f64, hi: f64) -> f64 {
    let freqs = xs.freqs();
    let nyquist = xs.fs / 2.0;
    let k_seg = xs.segs.len();
    let raw = |keep: &dyn Fn(usize) -> bool| {
        let used: Vec<usize> = (0..k_seg).filter(|&s| keep(s)).collect();
        let avg = |f: &dyn Fn(usize, usize) -> C, k: usize| {
            let mut acc = (0.0, 0.0);
            for &s in &used {
                let v = f(s, k);
                acc.0 += v.0;
                acc.1 += v.1;
            }
            (acc.0 / used.len() as f64, acc.1 / used.len() as f64)
        };
        let coherency = |k: usize| {
            let sxy = avg(&|s, k| cmul(xs.segs[s][k], conj(ys.segs[s][k])), k);
            let sxx = avg(&|s, k| (norm2(xs.segs[s][k]), 0.0), k).0;
            let syy = avg(&|s, k| (norm2(ys.segs[s][k]), 0.0), k).0;
            let d = (sxx * syy).sqrt();
            (sxy.0 / d, sxy.1 / d)
        };
        let mut total = 0.0;
        for k in 0..freqs.len() - 1 {
            if in_band(freqs[k], lo, hi, nyquist) && in_band(freqs[k + 1], lo, hi, nyquist) {
                total += cmul(conj(coherency(k)), coherency(k + 1)).1;
            }
        }
        total
    };
    let full = raw(&|_| true);
    let jack: Vec<f64> = (0..k_seg).map(|j| raw(&|s| s != j)).collect();
    let m = mean(&jack);
    let var = jack.iter().map(|v| (v - m).powi(2)).sum::<f64>() * (k_seg - 1) as f64 / k_seg as f64;
    full / var.sqrt()
}

/// Pair features keyed as in the catalogue, `x` being the first of the pair.
pub fn pair(x: &[f64], y: &[f64], xs: &Welch, ys: &Welch) -> Vec<(String, f64)> {
    let n = x.len();
    let max_lag = n / 4;
    let mut best: f64 = 0.0;
    for k in -(max_lag as i64)..=(max_lag as i64) {
        let (a, b): (Vec<f64>, Vec<f64>) = (0..n as i64)
            .filter(|t| (0..n as i64).contains(&(t + k)))
            .map(|t| (x[t as usize], y[(t + k) as usize]))
            .unzip();
        if let Some(r) = pearson(&a, &b) {
            best = best.max(r.abs());
        }
    }
    let mut out = vec![("xcorr_max".to_string(), best)];
    let per: Vec<(f64, f64)> = BANDS.iter().map(|b| band_coherence(xs, ys, b.lo, b.hi)).collect();
    for (b, c) in BANDS.iter().zip(&per) {
        out.push((format!("coherence_{}", b.name), c.0));
    }
    for (b, c) in BANDS.iter().zip(&per) {
        out.push((format!("imag_coherence_{}", b.name), c.1));
    }
    out.push(("psi".into(), psi(xs, ys, 4.0, 30.0)));
    out
}

/// Band-averaged coherence between every pair of channels.
pub fn coherence_matrix(w: &[Welch]) -> Vec<Vec<f64>> {
    let n = w.len();
    let mut m = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m[i][j] = BANDS.iter().map(|b| band_coherence(&w[i], &w[j], b.lo, b.hi).0).sum::<f64>() / BANDS.len() as f64;
            }
        }
    }
    m
}

/// Adjacency of the edges strictly above the `q`-quantile of the upper triangle.
pub fn threshold_graph(m: &[Vec<f64>], q: f64) -> Vec<Vec<bool>> {
    let n = m.len();
    let upper: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| m[i][j]).collect();
    let thr = quantile(&upper, q);
    (0..n).map(|i| (0..n).map(|j| i != j && m[i][j] > thr).collect()).collect()
}

/// Every feature of one epoch keyed by catalogue name.
pub fn epoch_features(channels: &[String], samples: &[Vec<f64>], fs: f64, nperseg: usize) -> HashMap<String, f64> {
    let welch: Vec<Welch> = samples.iter().map(|x| Welch::new(x, fs, nperseg)).collect();
    let mut out = HashMap::new();
    for (c, x) in channels.iter().zip(samples) {
        for (f, v) in temporal(x, fs) {
            out.insert(format!("{c}/{f}"), v);
        }
        for (f, v) in spectral(x, fs, &welch[channels.iter().position(|l| l == c).unwrap()]) {
            out.insert(format!("{c}/{f}"), v);
        }
    }
    for i in 0..channels.len() {
        for j in i + 1..channels.len() {
            let (a, b) = if channels[i] <= channels[j] { (i, j) } else { (j, i) };
            for (f, v) in pair(&samples[a], &samples[b], &welch[a], &welch[b]) {
                out.insert(format!("{}|{}/{f}", channels[a], channels[b]), v);
            }
        }
    }
    let g = threshold_graph(&coherence_matrix(&welch), 0.75);
    for (f, v) in graph_metrics(&g) {
        out.insert(format!("graph/{f}"), v);
    }
    out
}

// ---- graphs, by enumerating simple paths ----

fn simple_paths(adj: &[Vec<bool>], s: usize, t: usize) -> Vec<Vec<usize>> {
    fn walk(adj: &[Vec<bool>], path: &mut Vec<usize>, t: usize, out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        if v == t {
            out.push(path.clone());
            return;
        }
        for w in 0..adj.len() {
            if adj[v][w] && !path.contains(&w) {
                path.push(w);
                walk(adj, path, t, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(adj, &mut vec![s], t, &mut out);
    out
}

/// Shortest-path length and the shortest paths themselves, per ordered pair.
fn shortest(adj: &[Vec<bool>]) -> Vec<Vec<Option<(usize, Vec<Vec<usize>>)>>> {
    let n = adj.len();
    (0..n)
        .map(|s| {
            (0..n)
                .map(|t| {
                    if s == t {
                        return Some((0, vec![vec![s]]));
                    }
                    let paths = simple_paths(adj, s, t);
                    let d = paths.iter().map(|p| p.len() - 1).min()?;
                    Some((d, paths.into_iter().filter(|p| p.len() - 1 == d).collect()))
                })
                .collect()
        })
        .collect()
}

fn efficiency(adj: &[Vec<bool>]) -> f64 {
    let n = adj.len();
    if n < 2 {
        return 0.0;
    }
    let sp = shortest(adj);
    let mut total = 0.0;
    for s in 0..n {
        for t in 0..n {
            if s != t {
                if let Some((d, _)) = &sp[s][t] {
                    total += 1.0 / *d as f64;
                }
            }
        }
    }
    total / (n * (n - 1)) as f64
}

fn induced(adj: &[Vec<bool>], nodes: &[usize]) -> Vec<Vec<bool>> {
    nodes.iter().map(|&a| nodes.iter().map(|&b| adj[a][b]).collect()).collect()
}

/// Graph summary in catalogue order, from first principles.
pub fn graph_metrics(adj: &[Vec<bool>]) -> Vec<(&'static str, f64)> {
    let n = adj.len();
    let sp = shortest(adj);
    let nbrs = |v: usize| -> Vec<usize> { (0..n).filter(|&w| adj[v][w]).collect() };

    let clustering = if n == 0 {
        0.0
    } else {
        (0..n)
            .map(|v| {
                let nb = nbrs(v);
                let k = nb.len();
                if k < 2 {
                    return 0.0;
                }
                let mut tri = 0;
                for a in 0..k {
                    for b in a + 1..k {
                        if adj[nb[a]][nb[b]] {
                            tri += 1;
                        }
                    }
                }
                tri as f64 / (k * (k - 1) / 2) as f64
            })
            .sum::<f64>()
            / n as f64
    };

    let mut max_betweenness: f64 = 0.0;
    if n > 2 {
        for v in 0..n {
            let mut b = 0.0;
            for s in 0..n {
                for t in s + 1..n {
                    if s == v || t == v {
                        continue;
                    }
                    if let Some((_, paths)) = &sp[s][t] {
                        let through = paths.iter().filter(|p| p[1..p.len() - 1].contains(&v)).count();
                        b += through as f64 / paths.len() as f64;
                    }
                }
            }
            max_betweenness = max_betweenness.max(2.0 * b / ((n - 1) * (n - 2)) as f64);
        }
    }

    let local = if n == 0 { 0.0 } else { (0..n).map(|v| efficiency(&induced(adj, &nbrs(v)))).sum::<f64>() / n as f64 };

    // Components from reachability.
    let mut comp_of = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if comp_of[s] == usize::MAX {
            let members: Vec<usize> = (0..n).filter(|&t| sp[s][t].is_some()).collect();
            for &m in &members {
                comp_of[m] = comps.len();
            }
            comps.push(members);
        }
    }
    let largest = comps.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut best = (0.0f64, 0.0f64, 0.0f64);
    for c in comps.iter().filter(|c| c.len() == largest && c.len() > 1) {
        let m = c.len();
        let ecc: Vec<usize> = c.iter().map(|&s| c.iter().map(|&t| sp[s][t].as_ref().unwrap().0).max().unwrap()).collect();
        let total: usize = c.iter().flat_map(|&s| c.iter().map(move |&t| (s, t))).map(|(s, t)| sp[s][t].as_ref().unwrap().0).sum();
        let cand = (
            *ecc.iter().max().unwrap() as f64,
            *ecc.iter().min().unwrap() as f64,
            total as f64 / (m * (m - 1)) as f64,
        );
        if cand > best {
            best = cand;
        }
    }
    vec![
        ("eccentricity", best.0),
        ("clustering", clustering),
        ("betweenness", max_betweenness),
        ("local_efficiency", local),
        ("global_efficiency", efficiency(adj)),
        ("diameter", best.0),
        ("radius", best.1),
        ("char_path", best.2),
        ("connected", if comps.len() <= 1 && n > 0 { 1.0 } else { 0.0 }),
    ]
}

// ---- statistics ----

/// Two-sided Wilcoxon signed-rank p by listing all 2ⁿ sign patterns.
pub fn wilcoxon_enumerated(diffs: &[f64]) -> f64 {
    let d: Vec<f64> = diffs.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return 1.0;
    }
    let rank = |i: usize| {
        let below = d.iter().filter(|v| v.abs() < d[i].abs()).count() as f64;
        let equal = d.iter().filter(|v| v.abs() == d[i].abs()).count() as f64;
        below + (equal + 1.0) / 2.0
    };
    let ranks: Vec<f64> = (0..n).map(rank).collect();
    let observed: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed + 1e-9 {
            le += 1;
        }
        if w >= observed - 1e-9 {
            ge += 1;
        }
    }
    (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
}

/// Cliff's delta by comparing every cross pair.
pub fn cliffs_enumerated(a: &[f64], b: &[f64]) -> f64 {
    let mut net = 0i64;
    for x in a {
        for y in b {
            if x > y {
                net += 1;
            } else if x < y {
                net -= 1;
            }
        }
    }
    net as f64 / (a.len() * b.len()) as f64
}
