use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingSpec {
    /// Threshold in standard deviations of the envelope above its median.
    pub k_std: f64,
    /// Envelope block length in seconds.
    pub envelope_window: f64,
    pub enabled: bool,
}

impl Default for SmoothingSpec {
    fn default() -> Self {
        Self {
            k_std: 5.0,
            envelope_window: 0.5,
            enabled: true,
        }
    }
}

const MAX_PASSES: usize = 64;

/// Block RMS envelope: one value per `block`-sample block (the last block may be shorter).
pub fn block_envelope(x: &[f64], block: usize) -> Vec<f64> {
    x.chunks(block.max(1))
        .map(|c| (c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64).sqrt())
        .collect()
}

fn lower_median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[(s.len() - 1) / 2]
}

fn population_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Rescales blocks whose RMS envelope exceeds `median + k·std` so that their
/// envelope equals the median. Repeats until no block exceeds the threshold,
/// so a second application changes nothing. Blocks within the threshold are
/// returned bit-identical.
pub fn amplitude_smooth(x: &[f64], fs: f64, spec: &SmoothingSpec) -> Vec<f64> {
    let mut out = x.to_vec();
    if x.is_empty() || !spec.enabled {
        return out;
    }
    let block = ((spec.envelope_window * fs).round() as usize).max(1);
    for _ in 0..MAX_PASSES {
        let env = block_envelope(&out, block);
        let med = lower_median(&env);
        let limit = med + spec.k_std * population_std(&env);
        let mut changed = false;
        for (b, &e) in env.iter().enumerate() {
            if e > limit && e > med * (1.0 + 1e-6) {
                let gain = med / e;
                let end = ((b + 1) * block).min(out.len());
                out[b * block..end].iter_mut().for_each(|v| *v *= gain);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    out
}
