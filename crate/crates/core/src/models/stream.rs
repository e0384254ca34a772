use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Per-epoch probabilities for one recording from one model. Element `i`
/// belongs to epoch `first_index + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionStream {
    pub recording_id: String,
    pub model_id: String,
    pub first_index: usize,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    recording_id: String,
    epoch_index: usize,
    probability: f64,
    model_id: String,
}

impl PredictionStream {
    pub fn new(recording_id: impl Into<String>, model_id: impl Into<String>, first_index: usize, probabilities: Vec<f64>) -> Result<Self, ModelError> {
        let s = Self {
            recording_id: recording_id.into(),
            model_id: model_id.into(),
            first_index,
            probabilities,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if let Some((i, p)) = self
            .probabilities
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(ModelError::Stream(format!(
                "{}: probability {p} at epoch {} outside [0, 1]",
                self.recording_id,
                self.first_index + i
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.first_index..self.first_index + self.probabilities.len()
    }

    pub fn with_probabilities(&self, probabilities: Vec<f64>) -> Self {
        Self {
            probabilities,
            ..self.clone()
        }
    }
}

/// Writes streams as `recording_id,epoch_index,probability,model_id` rows.
pub fn write_streams_csv<W: Write>(out: W, streams: &[PredictionStream]) -> Result<(), ModelError> {
    let mut w = csv::Writer::from_writer(out);
    for s in streams {
        for (i, &p) in s.probabilities.iter().enumerate() {
            w.serialize(Row {
                recording_id: s.recording_id.clone(),
                epoch_index: s.first_index + i,
                probability: p,
                model_id: s.model_id.clone(),
            })
            .map_err(|e| ModelError::Stream(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| ModelError::Stream(e.to_string()))
}

/// Reads prediction CSV, grouping rows by (model, recording). Rows may come
/// in any order but each group's indices must be contiguous.
pub fn read_streams_csv<R: Read>(input: R) -> Result<Vec<PredictionStream>, ModelError> {
    let mut groups: BTreeMap<(String, String), BTreeMap<usize, f64>> = BTreeMap::new();
    let mut rdr = csv::Reader::from_reader(input);
    for (line, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| ModelError::Stream(format!("row {}: {e}", line + 1)))?;
        let slot = groups.entry((row.model_id.clone(), row.recording_id.clone())).or_default();
        if slot.insert(row.epoch_index, row.probability).is_some() {
            return Err(ModelError::Stream(format!(
                "duplicate epoch {} for {} / {}",
                row.epoch_index, row.model_id, row.recording_id
            )));
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((model_id, recording_id), rows) in groups {
        let first = *rows.keys().next().expect("non-empty group");
        if let Some((k, _)) = rows.keys().enumerate().find(|(k, &idx)| idx != first + k) {
            return Err(ModelError::Stream(format!(
                "{model_id} / {recording_id}: epoch {} missing",
                first + k
            )));
        }
        out.push(PredictionStream::new(recording_id, model_id, first, rows.into_values().collect())?);
    }
    Ok(out)
}
