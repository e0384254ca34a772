//! Synthetic EEG corpus: pink-noise background on six scalp electrodes with
//! injected 3 Hz spike-wave seizures, eye blinks and mains hum. Recordings
//! alternate between embedded EDF+ annotations and TUSZ-style `csv_bi`
//! label files, and cycle through 250, 256 and 512 Hz.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::edf::tal::TalEntry;
use crate::edf::writer::{annotation_channel, signal_channel, write_edf};
use crate::edf::Recording;
use crate::models::search::SearchSpace;
use crate::models::{ModelKind, OptimiserKind};
use crate::preprocess::MontageMap;

pub const ELECTRODES: [&str; 6] = ["FP1", "F7", "T3", "FP2", "F8", "T4"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_patients: usize,
    /// Seconds per recording.
    pub duration: usize,
    pub seizures_per_recording: (usize, usize),
    /// Seizure length range in seconds.
    pub seizure_length: (f64, f64),
    pub rates: Vec<f64>,
    pub mains_hz: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_patients: 12,
            duration: 300,
            seizures_per_recording: (2, 3),
            seizure_length: (12.0, 30.0),
            rates: vec![250.0, 256.0, 512.0],
            mains_hz: 60.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthRecording {
    pub recording: Recording,
    /// `(onset, end)` of each seizure in seconds.
    pub seizures: Vec<(f64, f64)>,
    /// Labels travel as a `csv_bi` file instead of embedded TALs.
    pub external_labels: bool,
}

/// Pink (1/f) noise with unit standard deviation, by Kellet's filter bank
/// on white noise.
pub fn pink_noise(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    let burn = 2048;
    let mut out = Vec::with_capacity(n);
    for i in 0..n + burn {
        let w: f64 = StandardNormal.sample(rng);
        b[0] = 0.99886 * b[0] + w * 0.0555179;
        b[1] = 0.99332 * b[1] + w * 0.0750759;
        b[2] = 0.96900 * b[2] + w * 0.1538520;
        b[3] = 0.86650 * b[3] + w * 0.3104856;
        b[4] = 0.55000 * b[4] + w * 0.5329522;
        b[5] = -0.7616 * b[5] - w * 0.0168980;
        let v = b[..6].iter().sum::<f64>() + b[6] + w * 0.5362;
        b[6] = w * 0.115926;
        if i >= burn {
            out.push(v);
        }
    }
    let mean = out.iter().sum::<f64>() / n.max(1) as f64;
    let sd = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
    out.iter().map(|v| (v - mean) / sd.max(f64::MIN_POSITIVE)).collect()
}

/// One spike-wave complex per cycle: a sharp spike followed by a broad
/// slow wave of opposite sign. `phase` is in cycles.
pub fn spike_wave(phase: f64) -> f64 {
    let f = phase.rem_euclid(1.0);
    let spike = (-0.5 * ((f - 0.12) / 0.035).powi(2)).exp();
    let wave = (-0.5 * ((f - 0.55) / 0.15).powi(2)).exp();
    1.2 * spike - 0.55 * wave
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Patient `p` of the corpus, one recording.
pub fn generate_recording(cfg: &SynthConfig, p: usize) -> SynthRecording {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(p as u64 + 1);
    let fs = cfg.rates[p % cfg.rates.len()];
    let n = cfg.duration * fs as usize;
    let sigma = uniform(&mut rng, 15.0, 35.0);
    let amp = sigma * uniform(&mut rng, 6.0, 9.0);
    let freq = uniform(&mut rng, 2.7, 3.3);
    let gains: Vec<f64> = [1.0, 0.65, 0.3, 0.95, 0.6, 0.28]
        .iter()
        .map(|g| g * uniform(&mut rng, 0.85, 1.15))
        .collect();
    let lags: Vec<f64> = [0.0, 0.012, 0.024, 0.006, 0.018, 0.03]
        .iter()
        .map(|l| l + uniform(&mut rng, 0.0, 0.006))
        .collect();

    let n_seiz = rng.random_range(cfg.seizures_per_recording.0..=cfg.seizures_per_recording.1);
    let slot = cfg.duration as f64 / n_seiz as f64;
    let seizures: Vec<(f64, f64)> = (0..n_seiz)
        .map(|k| {
            let len = uniform(&mut rng, cfg.seizure_length.0, cfg.seizure_length.1).min(slot - 10.0);
            let onset = k as f64 * slot + uniform(&mut rng, 5.0, (slot - len - 5.0).max(5.0));
            let onset = (onset * 4.0).round() / 4.0;
            (onset, onset + (len * 4.0).round() / 4.0)
        })
        .collect();

    let n_blinks = rng.random_range(cfg.duration / 30..=cfg.duration / 15);
    let blinks: Vec<f64> = (0..n_blinks).map(|_| uniform(&mut rng, 1.0, cfg.duration as f64 - 1.0)).collect();
    let blink_amp = sigma * uniform(&mut rng, 3.0, 5.0);
    let alpha_amp = sigma * uniform(&mut rng, 0.1, 0.4);
    let mains_amp = sigma * uniform(&mut rng, 0.3, 1.0);

    let common = pink_noise(n, &mut rng);
    let channels = ELECTRODES
        .iter()
        .enumerate()
        .map(|(c, label)| {
            let own = pink_noise(n, &mut rng);
            let frontal = c == 0 || c == 3;
            let samples: Vec<f64> = (0..n)
                .map(|i| {
                    let t = i as f64 / fs;
                    let mut v = sigma * (own[i] + 0.4 * common[i]);
                    v += alpha_amp * (2.0 * std::f64::consts::PI * 10.0 * t).sin() * if frontal { 0.3 } else { 1.0 };
                    v += mains_amp * (2.0 * std::f64::consts::PI * cfg.mains_hz * t).sin();
                    for &(s, e) in &seizures {
                        if t >= s && t < e {
                            let ramp = ((t - s).min(e - t) / 1.0).min(1.0);
                            v += amp * gains[c] * ramp * spike_wave(freq * (t - s - lags[c]));
                        }
                    }
                    if frontal {
                        for &b in &blinks {
                            let d = (t - b) / 0.08;
                            if d.abs() < 5.0 {
                                v += blink_amp * (-0.5 * d * d).exp();
                            }
                        }
                    }
                    v
                })
                .collect();
            signal_channel(label, fs, 1.0, samples)
        })
        .collect::<Vec<_>>();

    let external_labels = p % 2 == 1;
    let mut recording = Recording {
        patient_id: format!("syn{p:02} X X syn{p:02}"),
        recording_id: "Startdate 01-JAN-2020 X X synthetic".into(),
        start_time: NaiveDate::from_ymd_opt(2020, 1, 1)
            .and_then(|d| d.and_hms_opt(9, 0, 0))
            .expect("valid date"),
        record_duration: 1.0,
        n_records: cfg.duration,
        reserved: if external_labels { String::new() } else { "EDF+C".into() },
        channels,
    };
    if !external_labels {
        let mut per_record: Vec<Vec<TalEntry>> = vec![Vec::new(); cfg.duration];
        for &(s, e) in &seizures {
            per_record[s.floor() as usize].push(TalEntry {
                onset: s,
                duration: Some(e - s),
                texts: vec!["seiz".into()],
            });
        }
        recording
            .channels
            .push(annotation_channel(1.0, &per_record, 120).expect("annotations fit"));
    }
    SynthRecording {
        recording,
        seizures,
        external_labels,
    }
}

/// TUSZ `csv_bi` text covering the whole recording with `seiz`/`bckg` rows.
pub fn csv_bi(duration: f64, seizures: &[(f64, f64)]) -> String {
    let mut s = String::from("# version = csv_v1.0.0\n# bname = synthetic\nchannel,start_time,stop_time,label,confidence\n");
    let mut t = 0.0;
    for &(a, b) in seizures {
        if a > t {
            s.push_str(&format!("TERM,{t:.4},{a:.4},bckg,1.0000\n"));
        }
        s.push_str(&format!("TERM,{a:.4},{b:.4},seiz,1.0000\n"));
        t = b;
    }
    if t < duration {
        s.push_str(&format!("TERM,{t:.4},{duration:.4},bckg,1.0000\n"));
    }
    s
}

/// Writes `syn<NN>.edf` (plus `syn<NN>.csv_bi` where labels are external)
/// for every patient and returns the EDF paths.
pub fn write_dataset(dir: &Path, cfg: &SynthConfig) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let recs: Vec<SynthRecording> = {
        use rayon::prelude::*;
        (0..cfg.n_patients).into_par_iter().map(|p| generate_recording(cfg, p)).collect()
    };
    let mut paths = Vec::new();
    for (p, r) in recs.iter().enumerate() {
        let path = dir.join(format!("syn{p:02}.edf"));
        std::fs::write(&path, write_edf(&r.recording))?;
        if r.external_labels {
            let mut f = std::fs::File::create(dir.join(format!("syn{p:02}.csv_bi")))?;
            f.write_all(csv_bi(cfg.duration as f64, &r.seizures).as_bytes())?;
        }
        paths.push(path);
    }
    Ok(paths)
}

/// Pipeline settings sized for the synthetic corpus: its four bipolar
/// pairs and a reduced search space and budget.
pub fn pipeline_config(seed: u64, output_dir: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        seed,
        output_dir: output_dir.to_path_buf(),
        ..Default::default()
    };
    cfg.preprocess.montage = MontageMap {
        pairs: [("FP1", "F7"), ("F7", "T3"), ("FP2", "F8"), ("F8", "T4")]
            .iter()
            .map(|(a, c)| (a.to_string(), c.to_string()))
            .collect(),
    };
    cfg.selection.boruta.n_iterations = 20;
    cfg.selection.boruta.forest.n_trees = 60;
    cfg.selection.max_rows = 1500;
    cfg.tune.budget = 3;
    cfg.tune.logreg = SearchSpace {
        learning_rate: vec![1e-3, 1e-2],
        weight_decay: vec![1e-5, 1e-3],
        batch_size: vec![32, 64],
        optimiser: vec![OptimiserKind::Adam, OptimiserKind::Adamw],
        ..Default::default()
    };
    cfg.tune.mlp = SearchSpace {
        hidden1: vec![256],
        hidden2: vec![128],
        hidden3: vec![64],
        ..cfg.tune.logreg.clone()
    };
    cfg.tune.gbt = SearchSpace {
        learning_rate: vec![0.05, 0.1, 0.2],
        n_estimators: vec![60, 100],
        max_depth: vec![3, 4, 6],
        subsample: vec![0.8, 1.0],
        ..Default::default()
    };
    for kind in ModelKind::ALL {
        let base = match kind {
            ModelKind::Logreg => &mut cfg.train.logreg,
            ModelKind::Mlp => &mut cfg.train.mlp,
            ModelKind::Gbt => &mut cfg.train.gbt,
        };
        base.epochs = 30;
    }
    cfg.train.mlp.hidden = [256, 128, 64];
    cfg.train.gbt.gbt.n_estimators = 100;
    cfg.train.gbt.gbt.max_depth = 4;
    cfg.postprocess.enabled = true;
    cfg
}
