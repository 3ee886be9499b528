use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circstats::{
    dip_test, hours_to_radians, rao_spacing_test, watson_u2_von_mises, CircularSample, TestResult, WatsonMode,
};
use crate::controlflow::{evaluate_candidate, ControlFlowConfig, ControlFlowVerdict};
use crate::eventlog::{EventLog, Refinement, RelabelingMap};
use crate::mixture::{
    assign, select_components, ClusterAssignment, EmOptions, ModelSelectionRecord, VonMisesMixture,
};

/// How per-cluster Watson results affect eligibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WatsonRule {
    /// Computed and reported, never blocks a candidate.
    #[default]
    Advisory,
    /// Every cluster must not reject its own component.
    RequireFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub alpha: f64,
    pub max_components: usize,
    pub delta_bic: f64,
    pub seed: u64,
    pub rao_samples: usize,
    pub dip_samples: usize,
    pub watson_rule: WatsonRule,
    pub watson_mode: WatsonMode,
    pub em: EmOptions,
    pub control_flow: ControlFlowConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            max_components: 5,
            delta_bic: 10.0,
            seed: 0,
            rao_samples: 4999,
            dip_samples: 2000,
            watson_rule: WatsonRule::Advisory,
            watson_mode: WatsonMode::Asymptotic,
            em: EmOptions::default(),
            control_flow: ControlFlowConfig::default(),
        }
    }
}

/// Where a candidate left the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// Rao's test did not reject uniformity.
    Uniformity,
    /// The dip test did not reject unimodality.
    Multimodality,
    /// BIC chose a single component.
    ModelSelection,
    /// A cluster failed its Watson test under [`WatsonRule::RequireFit`].
    Fit,
    /// The control-flow verdict did not pass.
    ControlFlow,
    /// A computation failed; see `error`.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementCandidate {
    pub label: String,
    pub sample_size: usize,
    pub rao: Option<TestResult>,
    pub dip: Option<TestResult>,
    pub selection: Option<ModelSelectionRecord>,
    pub model: Option<VonMisesMixture>,
    #[serde(skip)]
    pub clusters: Option<ClusterAssignment>,
    /// One result per component, against that component alone.
    pub watson: Vec<Option<TestResult>>,
    pub verdict: Option<ControlFlowVerdict>,
    pub refinement: Option<Refinement>,
    pub eligible: bool,
    pub stopped_at: Option<Stage>,
    pub error: Option<String>,
}

impl RefinementCandidate {
    fn new(label: &str, sample_size: usize) -> Self {
        Self {
            label: label.to_string(),
            sample_size,
            rao: None,
            dip: None,
            selection: None,
            model: None,
            clusters: None,
            watson: Vec::new(),
            verdict: None,
            refinement: None,
            eligible: false,
            stopped_at: None,
            error: None,
        }
    }

    fn stop(mut self, stage: Stage) -> Self {
        self.stopped_at = Some(stage);
        self
    }

    fn fail(mut self, error: impl ToString) -> Self {
        self.error = Some(error.to_string());
        self.stopped_at = Some(Stage::Failed);
        self
    }
}

/// FNV-1a, so every label gets its own reproducible random stream.
fn label_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Time-of-day sample of `label` plus the event ids in sample order.
pub fn label_sample(log: &EventLog, label: &str) -> (CircularSample, Vec<String>) {
    let mut points: Vec<(f64, String)> =
        log.hours_of(label).into_iter().map(|(id, h)| (hours_to_radians(h), id)).collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (angles, ids): (Vec<f64>, Vec<String>) = points.into_iter().unzip();
    (CircularSample::new(angles).expect("wrapped angles"), ids)
}

/// Runs the three-stage pipeline on one label.
pub fn analyze_label(log: &EventLog, label: &str, config: &PipelineConfig) -> RefinementCandidate {
    let (sample, ids) = label_sample(log, label);
    let mut cand = RefinementCandidate::new(label, sample.len());
    let seed = label_seed(config.seed, label);

    // Pre-fitting: is the time of day informative at all?
    let rao = match rao_spacing_test(&sample, config.alpha, config.rao_samples, seed) {
        Ok(r) => r,
        Err(e) => return cand.fail(e),
    };
    let rao_reject = rao.reject;
    cand.rao = Some(rao);
    if !rao_reject {
        return cand.stop(Stage::Uniformity);
    }
    let dip = match dip_test(&sample, config.alpha, config.dip_samples, seed.wrapping_add(1)) {
        Ok(r) => r,
        Err(e) => return cand.fail(e),
    };
    let dip_reject = dip.reject;
    cand.dip = Some(dip);
    if !dip_reject {
        return cand.stop(Stage::Multimodality);
    }

    // Fitting.
    let em = EmOptions { seed: seed.wrapping_add(2), ..config.em };
    let selection = match select_components(&sample, config.max_components, config.delta_bic, &em) {
        Ok(s) => s,
        Err(e) => return cand.fail(e),
    };
    let model = selection.chosen_model().clone();
    cand.selection = Some(selection.record);
    let m = model.len();
    cand.model = Some(model.clone());
    if m < 2 {
        return cand.stop(Stage::ModelSelection);
    }
    let clusters = assign(&model, &sample);

    // Post-fitting: each cluster against its own component.
    let mut fit_ok = true;
    for (j, comp) in model.components.iter().enumerate() {
        let members = CircularSample::new(
            sample.angles().iter().zip(&clusters.labels).filter(|(_, &l)| l == j).map(|(&a, _)| a).collect(),
        )
        .expect("angles from a valid sample");
        let mode = match config.watson_mode {
            WatsonMode::Bootstrap { replicates, seed: s } => {
                WatsonMode::Bootstrap { replicates, seed: s ^ seed.wrapping_add(3 + j as u64) }
            }
            other => other,
        };
        let result = if members.is_empty() {
            None
        } else {
            watson_u2_von_mises(&members, comp.mu, comp.kappa, config.alpha, mode).ok()
        };
        fit_ok &= result.as_ref().is_some_and(|r| !r.reject);
        cand.watson.push(result);
    }
    let refinement = Refinement {
        map: RelabelingMap::numbered(label, m),
        assignment: ids.into_iter().zip(clusters.labels.iter().copied()).collect(),
    };
    cand.clusters = Some(clusters);
    let verdict = match evaluate_candidate(log, &refinement, &config.control_flow) {
        Ok(v) => v,
        Err(e) => {
            cand.refinement = Some(refinement);
            return cand.fail(e);
        }
    };
    let pass = verdict.pass;
    cand.verdict = Some(verdict);
    cand.refinement = Some(refinement);
    if config.watson_rule == WatsonRule::RequireFit && !fit_ok {
        return cand.stop(Stage::Fit);
    }
    if !pass {
        return cand.stop(Stage::ControlFlow);
    }
    cand.eligible = true;
    cand
}

/// Runs the pipeline on every label of the log, in parallel; results are in
/// label order and per-label failures are recorded, not raised.
pub fn generate_candidates(log: &EventLog, config: &PipelineConfig) -> Vec<RefinementCandidate> {
    let labels: Vec<String> = log.label_alphabet().into_iter().collect();
    labels.par_iter().map(|l| analyze_label(log, l, config)).collect()
}
