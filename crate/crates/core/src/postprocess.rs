//! Minimal corrections of per-epoch probability streams: short gaps inside
//! confident events, isolated positive epochs, and weak drifting runs.
//!
//! Adjusted epochs land just across the decision threshold (0.51 or 0.49).
//! Those two values are treated as already adjusted and are never changed
//! again, and the three passes repeat until nothing changes, so refining a
//! refined stream is a no-op.

use serde::{Deserialize, Serialize};

use crate::models::PredictionStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PostprocessConfig {
    pub enabled: bool,
    /// Epochs at or above this are confidently positive; at or below
    /// `1 - confidence_high` confidently negative.
    pub confidence_high: f64,
    /// Longest sub-threshold run that gap filling bridges.
    pub max_gap: usize,
    pub raised_value: f64,
    pub lowered_value: f64,
    /// Upper edge of the weak band `[0.5, drift_band)` trimmed at the ends
    /// of runs without a confident core.
    pub drift_band: f64,
    /// Epochs at or below / at or above these are never adjusted.
    pub protect_below: f64,
    pub protect_above: f64,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            confidence_high: 0.7,
            max_gap: 2,
            raised_value: 0.51,
            lowered_value: 0.49,
            drift_band: 0.55,
            protect_below: 0.1,
            protect_above: 0.9,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("invalid post-processing setting {field}: {reason}")]
pub struct PostprocessConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl PostprocessConfig {
    pub fn validate(&self) -> Result<(), PostprocessConfigError> {
        let err = |field, reason: &str| Err(PostprocessConfigError { field, reason: reason.into() });
        if !(self.confidence_high > 0.5 && self.confidence_high <= 1.0) {
            return err("confidence_high", "must lie in (0.5, 1]");
        }
        if self.max_gap == 0 {
            return err("max_gap", "must be at least 1");
        }
        if !(self.raised_value > 0.5 && self.raised_value <= 0.51) {
            return err("raised_value", "must lie in (0.5, 0.51]");
        }
        if !(self.lowered_value >= 0.49 && self.lowered_value < 0.5) {
            return err("lowered_value", "must lie in [0.49, 0.5)");
        }
        if !(self.drift_band > 0.5 && self.drift_band <= 1.0) {
            return err("drift_band", "must lie in (0.5, 1]");
        }
        if !(self.protect_below < 0.5 && self.protect_above > 0.5) {
            return err("protect_below", "protection limits must straddle 0.5");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    GapFill,
    Isolated,
    DriftTrim,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::GapFill => "gap_fill",
            Rule::Isolated => "isolated",
            Rule::DriftTrim => "drift_trim",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjustment {
    pub recording_id: String,
    pub epoch_index: usize,
    pub before: f64,
    pub after: f64,
    pub rule: Rule,
}

struct Pass<'a> {
    p: Vec<f64>,
    original: &'a [f64],
    cfg: &'a PostprocessConfig,
    log: Vec<(usize, Rule)>,
}

impl Pass<'_> {
    fn adjustable(&self, i: usize) -> bool {
        let v = self.p[i];
        v != self.cfg.raised_value && v != self.cfg.lowered_value && v > self.cfg.protect_below && v < self.cfg.protect_above
    }

    fn set(&mut self, i: usize, v: f64, rule: Rule) -> bool {
        if !self.adjustable(i) {
            return false;
        }
        self.p[i] = v;
        self.log.push((i, rule));
        true
    }

    /// Maximal runs `[start, end)` of indices satisfying `pred`.
    fn runs(&self, pred: impl Fn(f64) -> bool) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.p.len() {
            if pred(self.p[i]) {
                let s = i;
                while i < self.p.len() && pred(self.p[i]) {
                    i += 1;
                }
                out.push((s, i));
            } else {
                i += 1;
            }
        }
        out
    }

    fn gap_fill(&mut self) -> bool {
        let hi = self.cfg.confidence_high;
        let mut changed = false;
        for (s, e) in self.runs(|v| v < 0.5) {
            if e - s <= self.cfg.max_gap && s > 0 && e < self.p.len() && self.p[s - 1] >= hi && self.p[e] >= hi {
                for i in s..e {
                    changed |= self.set(i, self.cfg.raised_value, Rule::GapFill);
                }
            }
        }
        changed
    }

    fn isolated(&mut self) -> bool {
        let lo = 1.0 - self.cfg.confidence_high;
        let mut changed = false;
        for i in 1..self.p.len().saturating_sub(1) {
            if self.p[i] >= 0.5 && self.p[i - 1] <= lo && self.p[i + 1] <= lo {
                changed |= self.set(i, self.cfg.lowered_value, Rule::Isolated);
            }
        }
        changed
    }

    fn drift_trim(&mut self) -> bool {
        let (hi, band, marker) = (self.cfg.confidence_high, self.cfg.drift_band, self.cfg.lowered_value);
        let mut changed = false;
        // Already-lowered epochs stay part of their run so trimming does not
        // walk inwards on later passes.
        for (s, e) in self.runs(|v| v >= 0.5 || v == marker) {
            if self.p[s..e].iter().any(|&v| v >= hi) {
                continue;
            }
            for i in [s, e - 1] {
                if (0.5..band).contains(&self.p[i]) {
                    changed |= self.set(i, marker, Rule::DriftTrim);
                }
            }
        }
        changed
    }
}

/// Applies gap filling, isolated-epoch suppression and drift trimming,
/// repeated to a fixed point. Returns the refined stream and one record
/// per adjusted epoch. With `enabled = false` the stream is returned
/// unchanged.
pub fn refine_predictions(stream: &PredictionStream, cfg: &PostprocessConfig) -> (PredictionStream, Vec<Adjustment>) {
    if !cfg.enabled {
        return (stream.clone(), Vec::new());
    }
    let mut pass = Pass {
        p: stream.probabilities.clone(),
        original: &stream.probabilities,
        cfg,
        log: Vec::new(),
    };
    loop {
        let a = pass.gap_fill();
        let b = pass.isolated();
        let c = pass.drift_trim();
        if !(a || b || c) {
            break;
        }
    }
    let adjustments = pass
        .log
        .iter()
        .map(|&(i, rule)| Adjustment {
            recording_id: stream.recording_id.clone(),
            epoch_index: stream.first_index + i,
            before: pass.original[i],
            after: pass.p[i],
            rule,
        })
        .collect();
    (stream.with_probabilities(pass.p), adjustments)
}

pub fn write_diff_csv<W: std::io::Write>(out: W, adjustments: &[Adjustment]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["recording_id", "epoch_index", "before", "after", "rule"])?;
    for a in adjustments {
        w.write_record([
            a.recording_id.clone(),
            a.epoch_index.to_string(),
            a.before.to_string(),
            a.after.to_string(),
            a.rule.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
