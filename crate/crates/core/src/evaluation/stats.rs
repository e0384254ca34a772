//! Paired significance testing, FDR control and effect size.

use statrs::distribution::{ContinuousCDF, Normal};

/// Sample size up to which the signed-rank null is enumerated exactly.
pub const EXACT_MAX_N: usize = 25;

/// Mid-ranks of `|d|` (1-based), ties sharing the mean rank.
pub fn abs_midranks(d: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()));
    let mut ranks = vec![0.0; d.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && d[idx[j + 1]].abs() == d[idx[i]].abs() {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn nonzero(diffs: &[f64]) -> Vec<f64> {
    diffs.iter().copied().filter(|&d| d != 0.0).collect()
}

/// Two-sided p by exact enumeration of the sign-flip null. Mid-ranks are
/// doubled so every rank sum is an integer.
pub fn wilcoxon_exact(diffs: &[f64]) -> f64 {
    let d = nonzero(diffs);
    if d.is_empty() {
        return 1.0;
    }
    let twice: Vec<usize> = abs_midranks(&d).iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = twice.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &twice {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w: usize = d.iter().zip(&twice).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let all = 2f64.powi(d.len() as i32);
    let lower: u64 = counts[..=w].iter().sum();
    let upper: u64 = counts[w..].iter().sum();
    (2.0 * lower.min(upper) as f64 / all).min(1.0)
}

/// Two-sided p from the normal approximation with tie and continuity
/// corrections.
pub fn wilcoxon_normal(diffs: &[f64]) -> f64 {
    let d = nonzero(diffs);
    if d.is_empty() {
        return 1.0;
    }
    let n = d.len() as f64;
    let ranks = abs_midranks(&d);
    let w: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

/// Wilcoxon signed-rank test on paired differences; zero differences are
/// dropped. Exact for up to 25 non-zero differences.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> f64 {
    if nonzero(diffs).len() <= EXACT_MAX_N {
        wilcoxon_exact(diffs)
    } else {
        wilcoxon_normal(diffs)
    }
}

/// Benjamini–Hochberg step-up adjusted p-values, in input order.
pub fn bh_fdr(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut adj = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = idx[rank];
        running = running.min(p[i] * (m as f64 / (rank + 1) as f64));
        adj[i] = running.min(1.0);
    }
    adj
}

/// `(#{a > b} − #{a < b}) / (|a|·|b|)` over all cross pairs.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> f64 {
    let mut sb = b.to_vec();
    sb.sort_by(f64::total_cmp);
    let mut net: i64 = 0;
    for &x in a {
        let below = sb.partition_point(|&v| v < x) as i64;
        let not_above = sb.partition_point(|&v| v <= x) as i64;
        let above = sb.len() as i64 - not_above;
        net += below - above;
    }
    net as f64 / (a.len() * b.len()) as f64
}
