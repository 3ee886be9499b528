use serde::{Deserialize, Serialize};

use super::{em_fit, EmOptions, FitError, VonMisesMixture};
use crate::circstats::CircularSample;

/// One row of a BIC sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicEntry {
    pub m: usize,
    pub bic: f64,
    pub log_likelihood: f64,
    pub param_count: usize,
    pub sample_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelectionRecord {
    pub candidates: Vec<BicEntry>,
    pub chosen: usize,
}

impl BicEntry {
    /// `-2 ln L + k ln n` with `k = 3m - 1`.
    pub fn from_log_likelihood(m: usize, log_likelihood: f64, sample_size: usize) -> Self {
        let param_count = 3 * m - 1;
        Self {
            m,
            bic: -2.0 * log_likelihood + param_count as f64 * (sample_size as f64).ln(),
            log_likelihood,
            param_count,
            sample_size,
        }
    }
}

impl ModelSelectionRecord {
    pub fn entry(&self, m: usize) -> Option<&BicEntry> {
        self.candidates.iter().find(|e| e.m == m)
    }
}

/// Sweep record together with the fitted model for each entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSelection {
    pub record: ModelSelectionRecord,
    /// `models[i]` was fitted with `record.candidates[i].m` components.
    pub models: Vec<VonMisesMixture>,
}

impl ModelSelection {
    pub fn chosen_model(&self) -> &VonMisesMixture {
        &self.models[self.record.chosen - 1]
    }
}

/// BIC of `model` on `sample`, with the log-likelihood recomputed.
pub fn bic(model: &VonMisesMixture, sample: &CircularSample) -> BicEntry {
    BicEntry::from_log_likelihood(model.len(), model.log_likelihood_of(sample), sample.len())
}

/// Fits `m = 1, 2, ...` and keeps adding components while each one lowers
/// BIC by more than `delta`.
///
/// A fit that fails at `m > 1` ends the sweep with the previous `m`.
pub fn select_components(
    sample: &CircularSample,
    max_m: usize,
    delta: f64,
    opts: &EmOptions,
) -> Result<ModelSelection, FitError> {
    if max_m == 0 {
        return Err(FitError::NoComponents);
    }
    let first = em_fit(sample, 1, opts)?;
    let mut candidates = vec![bic(&first, sample)];
    let mut models = vec![first];
    let mut chosen = 1;
    for m in 2..=max_m {
        let Ok(model) = em_fit(sample, m, opts) else {
            break;
        };
        let entry = bic(&model, sample);
        let previous = candidates[m - 2].bic;
        candidates.push(entry);
        models.push(model);
        if previous - entry.bic > delta {
            chosen = m;
        } else {
            break;
        }
    }
    Ok(ModelSelection { record: ModelSelectionRecord { candidates, chosen }, models })
}
