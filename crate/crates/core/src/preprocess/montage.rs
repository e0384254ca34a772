use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::edf::{normalize_label, Channel, Recording, SignalHeader};

/// Ordered (anode, cathode) electrode pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MontageMap {
    pub pairs: Vec<(String, String)>,
}

impl MontageMap {
    /// The 18-channel longitudinal bipolar ("double banana") montage.
    pub fn double_banana() -> Self {
        let pairs = [
            ("FP1", "F7"),
            ("F7", "T3"),
            ("T3", "T5"),
            ("T5", "O1"),
            ("FP2", "F8"),
            ("F8", "T4"),
            ("T4", "T6"),
            ("T6", "O2"),
            ("FP1", "F3"),
            ("F3", "C3"),
            ("C3", "P3"),
            ("P3", "O1"),
            ("FP2", "F4"),
            ("F4", "C4"),
            ("C4", "P4"),
            ("P4", "O2"),
            ("FZ", "CZ"),
            ("CZ", "PZ"),
        ];
        Self {
            pairs: pairs.iter().map(|(a, c)| (a.to_string(), c.to_string())).collect(),
        }
    }

    pub fn labels(&self) -> Vec<String> {
        self.pairs.iter().map(|(a, c)| format!("{a}-{c}")).collect()
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        let mut seen = HashSet::new();
        for (a, c) in &self.pairs {
            if !seen.insert((normalize_label(a), normalize_label(c))) {
                return Err(PreprocessError::InvalidSpec {
                    field: "montage",
                    reason: format!("pair {a}-{c} listed twice"),
                });
            }
        }
        Ok(())
    }
}

impl Default for MontageMap {
    fn default() -> Self {
        Self::double_banana()
    }
}

/// Builds anode − cathode channels for every pair of `map`.
pub fn rereference_bipolar(rec: &Recording, map: &MontageMap) -> Result<Recording, PreprocessError> {
    map.validate()?;
    if let Some(ch) = rec.signal_channels().find(|c| normalize_label(&c.header.label).contains('-')) {
        return Err(PreprocessError::AlreadyBipolar {
            channel: ch.header.label.clone(),
        });
    }
    let find = |name: &str| {
        let key = normalize_label(name);
        rec.signal_channels().find(|c| normalize_label(&c.header.label) == key)
    };
    let mut missing = Vec::new();
    let mut resolved = Vec::new();
    for (a, c) in &map.pairs {
        match (find(a), find(c)) {
            (Some(x), Some(y)) => resolved.push((format!("{a}-{c}"), x, y)),
            _ => missing.push(format!("{a}-{c}")),
        }
    }
    if !missing.is_empty() {
        return Err(PreprocessError::MissingElectrodes { pairs: missing });
    }
    let mut channels = Vec::with_capacity(resolved.len());
    for (label, a, c) in resolved {
        if a.sample_rate != c.sample_rate || a.samples.len() != c.samples.len() {
            return Err(PreprocessError::RateMismatch {
                a: a.header.label.clone(),
                b: c.header.label.clone(),
            });
        }
        let samples = a.samples.iter().zip(&c.samples).map(|(x, y)| x - y).collect();
        let header = SignalHeader {
            label,
            physical_min: a.header.physical_min - c.header.physical_max,
            physical_max: a.header.physical_max - c.header.physical_min,
            digital_min: -32768,
            digital_max: 32767,
            ..a.header.clone()
        };
        channels.push(Channel {
            header,
            sample_rate: a.sample_rate,
            samples,
        });
    }
    Ok(Recording { channels, ..rec.clone_meta() })
}
