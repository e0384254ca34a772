//! Subject-wise fold assignment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientSummary {
    pub patient_id: String,
    pub recordings: Vec<String>,
    pub seizure_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: BTreeMap<String, usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn fold_of(&self, patient_id: &str) -> Option<usize> {
        self.assignments.get(patient_id).copied()
    }

    pub fn patients_in(&self, fold: usize) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(p, _)| p.as_str())
            .collect()
    }

    /// Recording → fold, through each recording's patient.
    pub fn recording_folds(&self, patients: &[PatientSummary]) -> BTreeMap<String, usize> {
        patients
            .iter()
            .filter_map(|p| self.fold_of(&p.patient_id).map(|f| (p, f)))
            .flat_map(|(p, f)| p.recordings.iter().map(move |r| (r.clone(), f)))
            .collect()
    }
}

/// Greedy balanced split: patients are shuffled by `seed`, stably sorted by
/// descending seizure-epoch count, and each is dealt to the fold with the
/// lowest seizure total (then fewest patients, then lowest index).
pub fn subject_kfold_split(patients: &[PatientSummary], k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k == 0 || patients.len() < k {
        return Err(EvalError::Folds { patients: patients.len(), k });
    }
    let mut order: Vec<&PatientSummary> = patients.iter().collect();
    order.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by(|a, b| b.seizure_epochs.cmp(&a.seizure_epochs));
    let mut load = vec![(0usize, 0usize); k];
    let mut assignments = BTreeMap::new();
    for p in order {
        let f = (0..k).min_by_key(|&f| (load[f], f)).expect("k > 0");
        load[f].0 += p.seizure_epochs;
        load[f].1 += 1;
        assignments.insert(p.patient_id.clone(), f);
    }
    Ok(FoldPlan { k, assignments, seed })
}
