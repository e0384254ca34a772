//! Acceptance checks, one test per criterion. Each prints a single
//! `PASS`/`FAIL` line to stderr (bypassing output capture) and then asserts.

mod oracle;

use std::io::Write as _;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use seizure_core::dsp::resample::resample;
use seizure_core::edf::tal::{decode_record, encode_record, TalEntry};
use seizure_core::edf::writer::write_edf;
use seizure_core::edf::{extract_annotations, parse_edf_bytes, ChannelScope, LabelSource, Recording};
use seizure_core::epoching::{ArtifactFlags, EpochRecord, SplitTag};
use seizure_core::evaluation::stats::{bh_fdr, cliffs_delta, wilcoxon_signed_rank};
use seizure_core::features::graph::{graph_features, Graph, NAMES as GRAPH_NAMES};
use seizure_core::features::temporal::{petrosian_fd, temporal_features, TemporalParams};
use seizure_core::features::{extract_feature_vector, Catalogue, FeatureConfig};
use seizure_core::models::gbt::{fit_gbt, GbtParams};
use seizure_core::models::net::{Init, Network};
use seizure_core::models::PredictionStream;
use seizure_core::pipeline::{pooled_auc, Pipeline};
use seizure_core::postprocess::{refine_predictions, PostprocessConfig};
use seizure_core::preprocess::FilterSpec;
use seizure_core::selection::{boruta_select, BorutaConfig};
use seizure_core::store::Store;
use seizure_core::synthetic::{generate_recording, pipeline_config, write_dataset, SynthConfig};

type Check = Result<String, String>;

fn verdict(name: &str, result: Check) {
    let line = match &result {
        Ok(detail) => format!("PASS  {name}: {detail}"),
        Err(reason) => format!("FAIL  {name}: {reason}"),
    };
    let _ = writeln!(std::io::stderr(), "{line}");
    if let Err(reason) = result {
        panic!("{name}: {reason}");
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

// ---------------------------------------------------------------------------
// Full synthetic runs, shared by the end-to-end and determinism criteria.

struct Run {
    seconds: f64,
    folds: usize,
    patients: usize,
    aucs: Vec<(String, Option<f64>)>,
    metrics_csv: Vec<u8>,
}

fn full_run() -> Result<Run, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let data = dir.path().join("data");
    let synth = SynthConfig::default();
    let files = write_dataset(&data, &synth).map_err(|e| e.to_string())?;
    let cfg = pipeline_config(42, &dir.path().join("out"));
    let folds = cfg.cv.folds;
    let store = Store::open(dir.path().join("store.sqlite")).map_err(|e| e.to_string())?;
    let mut p = Pipeline::new(cfg, store);
    p.run_all(&[data]).map_err(|e| e.to_string())?;
    let rows = p.metric_rows().map_err(|e| e.to_string())?;
    let aucs = ["mean_vote", "binary_vote", "logreg", "mlp", "gbt"]
        .iter()
        .map(|m| (m.to_string(), pooled_auc(&rows, m, "raw")))
        .collect();
    let metrics_csv = std::fs::read(dir.path().join("out/metrics.csv")).map_err(|e| e.to_string())?;
    Ok(Run {
        seconds: start.elapsed().as_secs_f64(),
        folds,
        patients: files.len(),
        aucs,
        metrics_csv,
    })
}

fn first_run() -> &'static Result<Run, String> {
    static RUN: OnceLock<Result<Run, String>> = OnceLock::new();
    RUN.get_or_init(full_run)
}

// ---------------------------------------------------------------------------

/// The published corpora are licensed and the published budget is far
/// beyond a single machine; the stand-in is the generated corpus, whose
/// seizures must look like what the generator promises: high-amplitude
/// ~3 Hz spike-wave bursts on a pink background.
fn check_substitute_corpus() -> Check {
    let cfg = SynthConfig::default();
    ensure(cfg.n_patients == 12, || format!("{} patients", cfg.n_patients))?;
    let mut ratios = Vec::new();
    for p in 0..cfg.n_patients {
        let r = generate_recording(&cfg, p);
        let ch = r.recording.signal_channels().next().ok_or("no signal channel")?;
        let fs = ch.sample_rate;
        let rms = |a: f64, b: f64| {
            let s = &ch.samples[(a * fs) as usize..(b * fs) as usize];
            (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt()
        };
        ensure(!r.seizures.is_empty(), || format!("patient {p} has no seizures"))?;
        for &(a, b) in &r.seizures {
            let mid = 0.5 * (a + b);
            let win = &ch.samples[((mid - 4.0) * fs) as usize..((mid + 4.0) * fs) as usize];
            let m = win.iter().sum::<f64>() / win.len() as f64;
            let centred: Vec<f64> = win.iter().map(|v| v - m).collect();
            let peak = (10..=200)
                .map(|k| k as f64 * 0.1)
                .max_by(|f, g| oracle::dtft_mag(&centred, fs, *f).total_cmp(&oracle::dtft_mag(&centred, fs, *g)))
                .unwrap();
            ensure((2.5..=3.5).contains(&peak), || format!("patient {p}: seizure peak at {peak} Hz"))?;
            let before = rms((a - 5.0).max(0.0), (a - 1.0).max(1.0));
            ratios.push(rms(a, b) / before);
        }
    }
    let worst = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(worst >= 1.5, || format!("seizure/background RMS ratio only {worst:.2}"))?;
    Ok(format!(
        "not reproducible here (licensed corpora, cluster-scale compute); substituted by the property suite and a 12-patient synthetic corpus (3 Hz seizure peaks, RMS ratio >= {worst:.1})"
    ))
}

#[test]
fn c1_clinical_scale_results_substituted() {
    verdict("clinical-scale results", check_substitute_corpus());
}

fn check_end_to_end() -> Check {
    let run = first_run().as_ref().map_err(|e| e.clone())?;
    ensure(run.patients == 12 && run.folds == 3, || format!("{} patients, {} folds", run.patients, run.folds))?;
    let auc = run.aucs[0].1.ok_or("mean_vote AUC undefined")?;
    let all: Vec<String> = run
        .aucs
        .iter()
        .map(|(m, a)| format!("{m}={}", a.map_or("NA".into(), |a| format!("{a:.4}"))))
        .collect();
    ensure(auc >= 0.90, || format!("mean_vote AUC {auc:.4} < 0.90 ({})", all.join(" ")))?;
    ensure(run.seconds <= 600.0, || format!("runtime {:.0} s > 600 s", run.seconds))?;
    Ok(format!("{} in {:.0} s", all.join(" "), run.seconds))
}

#[test]
fn c2_synthetic_end_to_end() {
    verdict("synthetic end-to-end", check_end_to_end());
}

// ---------------------------------------------------------------------------

/// A stream with seizure events plus injected gap, isolated and drift noise.
fn noisy_stream(seed: u64) -> (Vec<u8>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 400;
    let mut truth = vec![0u8; n];
    let mut busy = vec![false; n];
    let mut events = Vec::new();
    while events.len() < 3 {
        let len = rng.random_range(15..40);
        let s = rng.random_range(5..n - len - 5);
        if busy[s - 3..s + len + 3].iter().any(|&b| b) {
            continue;
        }
        for i in s - 3..s + len + 3 {
            busy[i] = true;
        }
        for t in &mut truth[s..s + len] {
            *t = 1;
        }
        events.push((s, s + len));
    }
    let mut p: Vec<f64> = truth
        .iter()
        .map(|&t| if t == 1 { rng.random_range(0.75..0.95) } else { rng.random_range(0.05..0.25) })
        .collect();
    // Short dropouts inside events.
    for &(s, e) in &events {
        for _ in 0..2 {
            let len = rng.random_range(1..=2);
            let at = rng.random_range(s + 2..e - 2 - len);
            if p[at - 1] < 0.5 || p[at + len] < 0.5 {
                continue;
            }
            for v in &mut p[at..at + len] {
                *v = rng.random_range(0.3..0.49);
            }
        }
    }
    // Isolated false positives and weak drifting runs in the background.
    let mut place = |len: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng| loop {
        let s = rng.random_range(2..n - len - 2);
        if busy[s - 2..s + len + 2].iter().any(|&b| b) {
            continue;
        }
        for i in s - 2..s + len + 2 {
            busy[i] = true;
        }
        for v in &mut p[s..s + len] {
            *v = rng.random_range(lo..hi);
        }
        break;
    };
    for _ in 0..6 {
        place(1, 0.55, 0.85, &mut rng);
    }
    for _ in 0..3 {
        let len = rng.random_range(2..=3);
        place(len, 0.5, 0.55, &mut rng);
    }
    (truth, p)
}

fn acc_sens(truth: &[u8], p: &[f64]) -> (f64, f64) {
    let correct = truth.iter().zip(p).filter(|(t, v)| (**v >= 0.5) == (**t == 1)).count();
    let pos = truth.iter().filter(|t| **t == 1).count();
    let tp = truth.iter().zip(p).filter(|(t, v)| **t == 1 && **v >= 0.5).count();
    (correct as f64 / truth.len() as f64, tp as f64 / pos as f64)
}

fn check_postprocess() -> Check {
    let cfg = PostprocessConfig {
        enabled: true,
        ..Default::default()
    };
    let (mut d_acc, mut d_sens) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let (truth, p) = noisy_stream(seed);
        let stream = PredictionStream::new("r", "m", 0, p.clone()).map_err(|e| e.to_string())?;
        let (refined, _) = refine_predictions(&stream, &cfg);
        for (i, (a, b)) in p.iter().zip(&refined.probabilities).enumerate() {
            ensure((b - a).abs() <= (0.5 - a).abs() + 0.01 + 1e-12, || {
                format!("seed {seed} epoch {i}: {a} -> {b} exceeds the change bound")
            })?;
        }
        let before = acc_sens(&truth, &p);
        let after = acc_sens(&truth, &refined.probabilities);
        d_acc.push(after.0 - before.0);
        d_sens.push(after.1 - before.1);
    }
    let raw = [wilcoxon_signed_rank(&d_acc), wilcoxon_signed_rank(&d_sens)];
    let adj = bh_fdr(&raw);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, ms) = (mean(&d_acc), mean(&d_sens));
    ensure(ma > 0.0 && ms > 0.0, || format!("mean change accuracy {ma:+.4}, sensitivity {ms:+.4}"))?;
    ensure(adj.iter().all(|p| *p < 0.05), || format!("BH-adjusted p = {adj:?}"))?;
    Ok(format!(
        "20 seeds; mean gain accuracy {ma:+.4} (p_BH {:.2e}), sensitivity {ms:+.4} (p_BH {:.2e}); change bound held",
        adj[0], adj[1]
    ))
}

#[test]
fn c3_postprocess_improves_with_bounded_changes() {
    verdict("post-processing", check_postprocess());
}

// ---------------------------------------------------------------------------

fn tone(f: f64, fs: f64, seconds: f64) -> Vec<f64> {
    let n = (fs * seconds).round() as usize;
    (0..n).map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin()).collect()
}

fn peak_frequency(x: &[f64], fs: f64) -> f64 {
    // Hann-weighted middle half, then a 1 mHz grid around 10 Hz.
    let n = x.len();
    let mid = &x[n / 4..3 * n / 4];
    let m = mid.len();
    let w: Vec<f64> = mid
        .iter()
        .enumerate()
        .map(|(i, v)| v * (std::f64::consts::PI * i as f64 / m as f64).sin().powi(2))
        .collect();
    (9000..=11000)
        .map(|k| k as f64 * 1e-3)
        .max_by(|a, b| oracle::dtft_mag(&w, fs, *a).total_cmp(&oracle::dtft_mag(&w, fs, *b)))
        .unwrap()
}

fn check_dsp() -> Check {
    let fs = 256.0;
    let kernel = FilterSpec::default().kernel(fs);
    // Analyse a window whose distance to both ends exceeds the kernel half-length.
    let seconds = 120.0;
    let (a, b) = (11264, 11264 + 8192);
    ensure(kernel.len() / 2 < a, || format!("kernel of {} taps is too long for the test signal", kernel.len()))?;
    let gain_db = |f: f64| {
        let x = tone(f, fs, seconds);
        let y = kernel.apply(&x);
        20.0 * (oracle::dtft_mag(&y[a..b], fs, f) / oracle::dtft_mag(&x[a..b], fs, f)).log10()
    };
    let (g60, g10) = (gain_db(60.0), gain_db(10.0));
    ensure(g60 <= -40.0, || format!("60 Hz attenuated by only {:.1} dB", -g60))?;
    ensure(g10.abs() <= 1.0, || format!("10 Hz gain {g10:.3} dB"))?;

    let rates = [250.0, 256.0, 512.0];
    let mut worst: f64 = 0.0;
    for &from in &rates {
        for &to in &rates {
            if from == to {
                continue;
            }
            let y = resample(&tone(10.0, from, 20.0), from, to);
            let err = (peak_frequency(&y, to) - 10.0).abs();
            ensure(err <= 0.1, || format!("{from} -> {to} Hz: peak off by {err:.3} Hz"))?;
            worst = worst.max(err);
        }
    }
    Ok(format!(
        "60 Hz at {g60:.1} dB, 10 Hz at {g10:+.4} dB; resampled 10 Hz peak within {worst:.3} Hz over 6 rate pairs"
    ))
}

#[test]
fn c4_dsp_filters_and_resampler() {
    verdict("DSP", check_dsp());
}

// ---------------------------------------------------------------------------

fn random_epoch(rng: &mut ChaCha8Rng, channels: &[String], fs: f64, n: usize) -> Vec<Vec<f64>> {
    let shared: Vec<f64> = (0..n + 64).map(|_| normal(rng)).collect();
    channels
        .iter()
        .map(|_| {
            let lag = rng.random_range(0..32usize);
            let mix = rng.random_range(0.0..1.5);
            let offset = rng.random_range(-2.0..2.0);
            let scale = rng.random_range(5.0..50.0);
            let f = rng.random_range(1.0..60.0);
            let amp = rng.random_range(0.0..2.0);
            (0..n)
                .map(|i| {
                    let t = i as f64 / fs;
                    scale * (mix * shared[i + lag] + normal(rng) + amp * (2.0 * std::f64::consts::PI * f * t).sin()) + offset
                })
                .collect()
        })
        .collect()
}

fn epoch(channels: &[String], samples: Vec<Vec<f64>>, fs: f64) -> EpochRecord {
    EpochRecord {
        recording_id: "oracle".into(),
        epoch_index: 0,
        start: 0.0,
        fs,
        channels: channels.to_vec(),
        samples,
        label: 0,
        flags: ArtifactFlags::empty(),
        split_tag: SplitTag::Train,
    }
}

fn check_graph_enumeration() -> Result<usize, String> {
    let compare = |n: usize, edges: &[(usize, usize)]| -> Result<(), String> {
        let mut g = Graph::empty(n);
        let mut adj = vec![vec![false; n]; n];
        for &(a, b) in edges {
            g.add_edge(a, b);
            adj[a][b] = true;
            adj[b][a] = true;
        }
        let got = graph_features(&g);
        let want = oracle::graph_metrics(&adj);
        for ((name, w), v) in want.iter().zip(&got) {
            ensure((w - v).abs() <= 1e-12, || format!("n={n} edges={edges:?}: {name} {v} vs {w}"))?;
        }
        Ok(())
    };
    let mut count = 0;
    for n in 0..=6usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        for mask in 0u64..(1 << pairs.len()) {
            let edges: Vec<(usize, usize)> = pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, e)| *e).collect();
            compare(n, &edges)?;
            count += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in [7usize, 8] {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        for i in 0..1500 {
            let density = 0.1 + 0.8 * (i % 9) as f64 / 8.0;
            let edges: Vec<(usize, usize)> = pairs.iter().copied().filter(|_| rng.random::<f64>() < density).collect();
            compare(n, &edges)?;
            count += 1;
        }
    }
    Ok(count)
}

fn check_features() -> Check {
    let fs = 256.0;
    let n = 512;
    let channels: Vec<String> = ["F8-T4", "FP1-F7", "T3-T5", "C3-CZ"].iter().map(|s| s.to_string()).collect();
    let cfg = FeatureConfig::default();
    let cat = Catalogue::new(&channels, &cfg);
    let nperseg = (cfg.welch_segment * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for e in 0..100 {
        let samples = random_epoch(&mut rng, &channels, fs, n);
        let want = oracle::epoch_features(&channels, &samples, fs, nperseg);
        let got = extract_feature_vector(&epoch(&channels, samples, fs), &cat, &cfg).map_err(|e| e.to_string())?;
        ensure(want.len() == got.values.len(), || format!("{} oracle features, {} extracted", want.len(), got.values.len()))?;
        for (name, v) in got.names.iter().zip(&got.values) {
            let w = *want.get(name).ok_or_else(|| format!("oracle has no {name}"))?;
            let rel = (v - w).abs() / w.abs().max(v.abs()).max(1e-3);
            ensure(rel <= 1e-6, || format!("epoch {e}: {name} = {v}, oracle {w}"))?;
            worst = worst.max(rel);
        }
    }

    let flat = vec![3.25; 512];
    let pfd = temporal_features(&flat, fs, &TemporalParams::default())[16];
    ensure(pfd == 1.0 && petrosian_fd(&flat) == 1.0, || format!("PFD(constant) = {pfd}"))?;

    let twin: Vec<String> = vec!["A".into(), "B".into()];
    let tcat = Catalogue::new(&twin, &cfg);
    let mut coh_err: f64 = 0.0;
    for _ in 0..10 {
        let x = random_epoch(&mut rng, &twin[..1], fs, n).remove(0);
        let fv = extract_feature_vector(&epoch(&twin, vec![x.clone(), x], fs), &tcat, &cfg).map_err(|e| e.to_string())?;
        for b in &cfg.bands {
            let c = fv.get(&format!("A|B/coherence_{}", b.name)).ok_or("missing coherence feature")?;
            coh_err = coh_err.max((c - 1.0).abs());
        }
    }
    ensure(coh_err <= 1e-9, || format!("coherence of identical channels off by {coh_err:e}"))?;

    let graphs = check_graph_enumeration()?;
    Ok(format!(
        "100 epochs x {} features, worst relative error {worst:.1e}; PFD(const) = 1; self-coherence within {coh_err:.0e}; {graphs} graphs (all n <= 6, sampled n = 7, 8) exact on {} metrics",
        cat.len(),
        GRAPH_NAMES.len()
    ))
}

#[test]
fn c5_feature_oracles() {
    verdict("feature oracles", check_features());
}

// ---------------------------------------------------------------------------

fn check_stats() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut cases = 0;
    for n in 1..=10 {
        for i in 0..200 {
            let d: Vec<f64> = (0..n)
                .map(|_| {
                    if i % 2 == 0 {
                        rng.random_range(-4i32..=4) as f64
                    } else {
                        normal(&mut rng)
                    }
                })
                .collect();
            let got = wilcoxon_signed_rank(&d);
            let want = oracle::wilcoxon_enumerated(&d);
            ensure((got - want).abs() <= 1e-12, || format!("{d:?}: p = {got}, enumeration {want}"))?;
            cases += 1;
        }
    }

    let bh = bh_fdr(&[0.005, 0.01, 0.03, 0.04]);
    let expect = [0.02, 0.02, 0.04, 0.04];
    ensure(bh.iter().zip(&expect).all(|(a, b)| (a - b).abs() <= 1e-12), || format!("BH gave {bh:?}"))?;

    // Every sample over three tied levels, plus continuous draws.
    let mut pairs = 0;
    for na in 1..=6u32 {
        for nb in 1..=6u32 {
            for code in 0..3u64.pow(na + nb) {
                let mut c = code;
                let mut digit = || {
                    let v = (c % 3) as f64;
                    c /= 3;
                    v
                };
                let a: Vec<f64> = (0..na).map(|_| digit()).collect();
                let b: Vec<f64> = (0..nb).map(|_| digit()).collect();
                let (got, want) = (cliffs_delta(&a, &b), oracle::cliffs_enumerated(&a, &b));
                ensure((got - want).abs() <= 1e-15, || format!("{a:?} vs {b:?}: {got} vs {want}"))?;
                pairs += 1;
            }
            for _ in 0..50 {
                let a: Vec<f64> = (0..na).map(|_| normal(&mut rng)).collect();
                let b: Vec<f64> = (0..nb).map(|_| normal(&mut rng)).collect();
                ensure(cliffs_delta(&a, &b) == oracle::cliffs_enumerated(&a, &b), || format!("{a:?} vs {b:?}"))?;
            }
        }
    }
    Ok(format!("{cases} Wilcoxon cases (n <= 10) match 2^n enumeration; BH example exact; {pairs} tied Cliff's delta samples exact"))
}

#[test]
fn c6_statistics_oracles() {
    verdict("statistics oracles", check_stats());
}

// ---------------------------------------------------------------------------

fn gradient_check(dims: Vec<usize>, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(dims.clone(), Init::KaimingNormal, &mut rng);
    for p in net.params.iter_mut() {
        *p += 0.1 * normal(&mut rng);
    }
    let rows = 10;
    let x = Array2::from_shape_fn((rows, dims[0]), |_| normal(&mut rng));
    let y: Vec<f64> = (0..rows).map(|i| (i % 2) as f64).collect();
    let w: Vec<f64> = (0..rows).map(|_| rng.random_range(0.5..2.0)).collect();
    let analytic = net.loss_and_grad(x.view(), &y, &w).grad;
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..net.params.len() {
        let mut plus = net.clone();
        plus.params[i] += eps;
        let mut minus = net.clone();
        minus.params[i] -= eps;
        let numeric = (plus.loss_and_grad(x.view(), &y, &w).loss - minus.loss_and_grad(x.view(), &y, &w).loss) / (2.0 * eps);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-3);
        ensure(rel <= 1e-4, || format!("dims {dims:?} param {i}: analytic {} numeric {numeric}", analytic[i]))?;
        worst = worst.max(rel);
    }
    Ok(worst)
}

fn xor(n: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 2));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (rng.random::<bool>(), rng.random::<bool>());
        x[[i, 0]] = if a { 1.0 } else { -1.0 } + 0.3 * normal(&mut rng);
        x[[i, 1]] = if b { 1.0 } else { -1.0 } + 0.3 * normal(&mut rng);
        y.push(if a != b { 1.0 } else { 0.0 });
    }
    (x, y)
}

fn boruta_seed(seed: u64) -> Result<(usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, p) = (300, 25);
    let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let mut cols: Vec<usize> = (0..p).collect();
    for i in (1..p).rev() {
        cols.swap(i, rng.random_range(0..=i));
    }
    let informative = &cols[..5];
    let shifts = [1.2, 1.1, 1.0, 0.9, 0.8];
    let mut x = Array2::from_shape_fn((n, p), |_| normal(&mut rng));
    for (k, &c) in informative.iter().enumerate() {
        for i in 0..n {
            x[[i, c]] += shifts[k] * y[i] as f64;
        }
    }
    let names: Vec<String> = (0..p).map(|i| format!("f{i}")).collect();
    let r = boruta_select(x.view(), &y, &names, &BorutaConfig::default(), seed).map_err(|e| e.to_string())?;
    let hit = informative.iter().filter(|&&c| r.confirmed.contains(&names[c])).count();
    Ok((hit, r.confirmed.len() - hit))
}

fn check_learning() -> Check {
    let logreg = gradient_check(vec![5, 1], 1)?;
    let mlp = gradient_check(vec![5, 8, 4, 1], 2)?;

    let (x, y) = xor(400, 1);
    let params = GbtParams {
        n_estimators: 50,
        max_depth: 3,
        ..Default::default()
    };
    let (model, _) = fit_gbt(x.view(), &y, &vec![1.0; 400], &params, 0.3, 5, None, 7).map_err(|e| e.to_string())?;
    let (tx, ty) = xor(1000, 2);
    let acc = model.margins(tx.view()).iter().zip(&ty).filter(|(z, t)| (**z >= 0.0) == (**t == 1.0)).count() as f64 / 1000.0;
    ensure(acc >= 0.95, || format!("GBT XOR accuracy {acc:.3}"))?;

    let mut good = 0;
    let mut detail = Vec::new();
    for seed in 0..10 {
        let (hit, noise) = boruta_seed(seed)?;
        if hit >= 4 && noise <= 2 {
            good += 1;
        }
        detail.push(format!("{hit}/{noise}"));
    }
    ensure(good >= 9, || format!("Boruta met the target in {good}/10 seeds (informative/noise confirmed: {})", detail.join(" ")))?;
    Ok(format!(
        "gradient error logreg {logreg:.1e}, mlp {mlp:.1e}; GBT XOR accuracy {acc:.3}; Boruta good in {good}/10 seeds ({})",
        detail.join(" ")
    ))
}

#[test]
fn c7_learning_sanity() {
    verdict("learning sanity", check_learning());
}

// ---------------------------------------------------------------------------

fn field(out: &mut Vec<u8>, s: &str, width: usize) {
    assert!(s.len() <= width);
    out.extend_from_slice(s.as_bytes());
    out.extend(std::iter::repeat_n(b' ', width - s.len()));
}

/// A well-formed EDF+ file assembled field by field.
fn handmade_edf(seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = 5;
    // (label, transducer, dim, pmin, pmax, dmin, dmax, prefilter, samples)
    let signals = [
        ("EEG FP1-REF", "AgAgCl electrode", "uV", "-3276.8", "3276.7", "-32768", "32767", "HP:0.1Hz LP:70Hz", 256usize),
        ("EEG F7-REF", "AgAgCl electrode", "uV", "-500", "500", "-2048", "2047", "HP:0.1Hz LP:70Hz", 200),
        ("EDF Annotations", "", "", "-1", "1", "-32768", "32767", "", 60),
    ];
    let ns = signals.len();
    let mut out = Vec::new();
    field(&mut out, "0", 8);
    field(&mut out, "P001 F 02-MAR-1980 Anon", 80);
    field(&mut out, "Startdate 01-JAN-2020 R001 tech device", 80);
    field(&mut out, "01.01.20", 8);
    field(&mut out, "10.30.00", 8);
    field(&mut out, &(256 * (ns + 1)).to_string(), 8);
    field(&mut out, "EDF+C", 44);
    field(&mut out, &records.to_string(), 8);
    field(&mut out, "1", 8);
    field(&mut out, &ns.to_string(), 4);
    for s in &signals {
        field(&mut out, s.0, 16);
    }
    for s in &signals {
        field(&mut out, s.1, 80);
    }
    for s in &signals {
        field(&mut out, s.2, 8);
    }
    for s in &signals {
        field(&mut out, s.3, 8);
    }
    for s in &signals {
        field(&mut out, s.4, 8);
    }
    for s in &signals {
        field(&mut out, s.5, 8);
    }
    for s in &signals {
        field(&mut out, s.6, 8);
    }
    for s in &signals {
        field(&mut out, s.7, 80);
    }
    for s in &signals {
        field(&mut out, &s.8.to_string(), 8);
    }
    for _ in &signals {
        field(&mut out, "", 32);
    }
    for r in 0..records {
        for (i, s) in signals.iter().enumerate() {
            if i == 2 {
                let mut tal = format!("+{r}\x14\x14\x00").into_bytes();
                if r == 1 {
                    tal.extend_from_slice(b"+1.5\x150.5\x14seiz\x14\x00");
                }
                tal.resize(2 * s.8, 0);
                out.extend_from_slice(&tal);
            } else {
                let (lo, hi): (i16, i16) = (s.5.parse().unwrap(), s.6.parse().unwrap());
                for _ in 0..s.8 {
                    out.extend_from_slice(&rng.random_range(lo..=hi).to_le_bytes());
                }
            }
        }
    }
    out
}

fn check_parser() -> Check {
    let mut files = 0;
    for seed in 0..5 {
        let bytes = handmade_edf(seed);
        let rec = parse_edf_bytes(&bytes).map_err(|e| e.to_string())?;
        ensure(write_edf(&rec) == bytes, || format!("hand-built file {seed} does not round-trip"))?;
        let ann = extract_annotations(&rec, None).map_err(|e| e.to_string())?;
        ensure(
            ann.events.len() == 1 && ann.events[0].onset == 1.5 && ann.events[0].duration == 0.5 && ann.events[0].label == "seiz",
            || format!("embedded annotations {:?}", ann.events),
        )?;
        files += 1;
    }
    let synth = SynthConfig {
        n_patients: 3,
        duration: 30,
        ..Default::default()
    };
    for p in 0..synth.n_patients {
        let bytes = write_edf(&generate_recording(&synth, p).recording);
        let rec = parse_edf_bytes(&bytes).map_err(|e| e.to_string())?;
        ensure(write_edf(&rec) == bytes, || format!("generated recording {p} does not round-trip"))?;
        files += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let words = ["seiz", "bckg", "Eyes closed", "spike-wave", "artifact"];
    let mut tals = 0;
    for _ in 0..500 {
        let count = rng.random_range(1..5);
        let entries: Vec<TalEntry> = (0..count)
            .map(|_| TalEntry {
                onset: rng.random_range(-400i32..4000) as f64 / 8.0,
                duration: rng.random::<bool>().then(|| rng.random_range(0u32..800) as f64 / 16.0),
                texts: (0..rng.random_range(0..3)).map(|_| words[rng.random_range(0..words.len())].to_string()).collect(),
            })
            .collect();
        let bytes = encode_record(&entries, 512).ok_or("entries did not fit")?;
        let back = decode_record(&bytes, 0).map_err(|e| e.to_string())?;
        ensure(back == entries, || format!("{entries:?} decoded as {back:?}"))?;
        ensure(encode_record(&back, 512).as_deref() == Some(&bytes[..]), || "re-encoding changed the bytes".into())?;
        tals += 1;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = dir.path().join("r.csv_bi");
    std::fs::write(
        &csv,
        "# version = csv_v1.0.0\n# bname = r\n# duration = 30.00 secs\n#\n\
         channel,start_time,stop_time,label,confidence\n\
         TERM,0.0000,12.5000,bckg,1.0000\n\
         TERM,12.5000,20.2500,seiz,1.0000\n\
         FP1-F7,14.0000,18.0000,fnsz,0.9000\n\
         TERM,25.0000,21.0000,seiz,1.0000\n\
         TERM,20.2500,30.0000,bckg,1.0000\n",
    )
    .map_err(|e| e.to_string())?;
    let rec = csv_recording(30);
    let set = extract_annotations(&rec, Some(Path::new(&csv))).map_err(|e| e.to_string())?;
    let got: Vec<(f64, f64, &str, ChannelScope, LabelSource)> = set
        .events
        .iter()
        .map(|e| (e.onset, e.duration, e.label.as_str(), e.channel_scope.clone(), e.source))
        .collect();
    let want = vec![
        (0.0, 12.5, "bckg", ChannelScope::All, LabelSource::External),
        (12.5, 7.75, "seiz", ChannelScope::All, LabelSource::External),
        (14.0, 4.0, "fnsz", ChannelScope::Channel("FP1-F7".into()), LabelSource::External),
        (20.25, 9.75, "bckg", ChannelScope::All, LabelSource::External),
    ];
    ensure(got == want, || format!("csv_bi rows mapped to {got:?}"))?;
    ensure(set.diagnostics.len() == 1 && set.diagnostics[0].contains("row 5"), || format!("diagnostics {:?}", set.diagnostics))?;
    Ok(format!("{files} EDF files byte-identical after parse/write; {tals} TAL records identical both ways; csv_bi rows mapped exactly"))
}

fn csv_recording(seconds: usize) -> Recording {
    Recording {
        patient_id: "p".into(),
        recording_id: "r".into(),
        start_time: chrono_start(),
        record_duration: 1.0,
        n_records: seconds,
        reserved: String::new(),
        channels: Vec::new(),
    }
}

fn chrono_start() -> chrono::NaiveDateTime {
    chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

#[test]
fn c8_parser_round_trips() {
    verdict("parser", check_parser());
}

// ---------------------------------------------------------------------------

fn check_determinism() -> Check {
    let first = first_run().as_ref().map_err(|e| e.clone())?;
    let second = full_run()?;
    ensure(first.metrics_csv == second.metrics_csv, || "metrics.csv differs between identical runs".into())?;
    Ok(format!("two seeded runs wrote identical metrics.csv ({} bytes)", first.metrics_csv.len()))
}

#[test]
fn c9_determinism() {
    verdict("determinism", check_determinism());
}
