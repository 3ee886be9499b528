//! The JSON run report. Field names and nesting are the documented schema;
//! bump [`SCHEMA`] on any incompatible change.

use std::collections::BTreeMap;

use labelrefine::circstats::TestResult;
use labelrefine::eventlog::{EventLog, Refinement};
use labelrefine::mixture::HourRange;
use labelrefine::search::{RefinementCandidate, RefinementPlan, Stage, Strategy};
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "labelrefine.report/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub command: String,
    pub config: ConfigEcho,
    pub log: LogSummary,
    pub candidates: Vec<CandidateSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanSummary>,
    /// Artifact role ("log", "report", ...) to path.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub input: String,
    pub seed: u64,
    pub alpha: f64,
    pub max_components: usize,
    pub delta_bic: f64,
    pub rao_samples: usize,
    pub dip_samples: usize,
    pub watson_rule: String,
    pub verdict_mode: String,
    pub end_token: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchEcho>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchEcho {
    pub strategy: Strategy,
    pub k: usize,
    pub beam_size: usize,
    pub stop_on_ig: bool,
    pub exhaustive_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSummary {
    pub events: usize,
    pub traces: usize,
    pub labels: usize,
}

impl LogSummary {
    pub fn of(log: &EventLog) -> Self {
        Self { events: log.event_count(), traces: log.traces().len(), labels: log.label_alphabet().len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub critical_value: Option<f64>,
    pub reject: bool,
}

impl From<&TestResult> for TestSummary {
    fn from(t: &TestResult) -> Self {
        Self {
            statistic: t.statistic,
            p_value: t.p_value,
            critical_value: t.critical_value,
            reject: t.reject,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicPoint {
    pub m: usize,
    pub bic: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub weight: f64,
    pub mu: f64,
    pub kappa: f64,
    pub mean_hours: f64,
    /// Shortest arc covering the events assigned here, in hours.
    pub hour_range: Option<[f64; 2]>,
    pub events: usize,
    pub watson: Option<TestSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub label: String,
    pub events: usize,
    pub eligible: bool,
    pub stopped_at: Option<Stage>,
    pub error: Option<String>,
    pub rao: Option<TestSummary>,
    pub dip: Option<TestSummary>,
    pub bic: Vec<BicPoint>,
    pub chosen_components: Option<usize>,
    pub components: Vec<ComponentSummary>,
    pub information_gain: Option<f64>,
    pub significant_activities: Vec<(String, f64)>,
}

fn range(r: Option<HourRange>) -> Option<[f64; 2]> {
    r.map(|h| [h.start, h.end])
}

impl From<&RefinementCandidate> for CandidateSummary {
    fn from(c: &RefinementCandidate) -> Self {
        let ranges = c.clusters.as_ref().map(|a| a.hour_ranges()).unwrap_or_default();
        let counts = c.clusters.as_ref().map(|a| a.counts()).unwrap_or_default();
        let components = match (&c.model, &c.clusters) {
            (Some(m), Some(_)) => m
                .components
                .iter()
                .enumerate()
                .map(|(j, comp)| ComponentSummary {
                    weight: comp.weight,
                    mu: comp.mu,
                    kappa: comp.kappa,
                    mean_hours: comp.mean_hours(),
                    hour_range: range(ranges[j]),
                    events: counts[j],
                    watson: c.watson.get(j).and_then(|w| w.as_ref()).map(TestSummary::from),
                })
                .collect(),
            _ => Vec::new(),
        };
        Self {
            label: c.label.clone(),
            events: c.sample_size,
            eligible: c.eligible,
            stopped_at: c.stopped_at,
            error: c.error.clone(),
            rao: c.rao.as_ref().map(TestSummary::from),
            dip: c.dip.as_ref().map(TestSummary::from),
            bic: c
                .selection
                .as_ref()
                .map(|s| {
                    s.candidates
                        .iter()
                        .map(|e| BicPoint { m: e.m, bic: e.bic, log_likelihood: e.log_likelihood })
                        .collect()
                })
                .unwrap_or_default(),
            chosen_components: c.model.as_ref().map(|m| m.len()),
            components,
            information_gain: c.verdict.as_ref().map(|v| v.information_gain),
            significant_activities: c
                .verdict
                .as_ref()
                .map(|v| v.significant_activities.clone())
                .unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub label: String,
    pub refined_labels: Vec<String>,
    pub gain: f64,
    pub cumulative_gain: f64,
    pub hour_ranges: Vec<Option<[f64; 2]>>,
    /// Event id to cluster; enough to replay the step with `apply`.
    pub refinement: Refinement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub strategy: Strategy,
    pub k: usize,
    pub beam_size: Option<usize>,
    pub steps: Vec<StepSummary>,
    pub per_step_gain: Vec<f64>,
    pub cumulative_gain: f64,
    pub entropy_before: f64,
    pub entropy_after: f64,
    pub stopped_early: bool,
}

impl PlanSummary {
    pub fn new(plan: &RefinementPlan, candidates: &[RefinementCandidate]) -> Self {
        let steps = plan
            .steps
            .iter()
            .map(|s| {
                let ranges = candidates
                    .iter()
                    .find(|c| c.label == s.label())
                    .and_then(|c| c.clusters.as_ref())
                    .map(|a| a.hour_ranges().into_iter().map(range).collect())
                    .unwrap_or_default();
                StepSummary {
                    label: s.label().to_string(),
                    refined_labels: s.refinement.map.refined_labels().map(String::from).collect(),
                    gain: s.gain(),
                    cumulative_gain: s.cumulative_gain,
                    hour_ranges: ranges,
                    refinement: s.refinement.clone(),
                }
            })
            .collect();
        Self {
            strategy: plan.strategy,
            k: plan.k,
            beam_size: plan.beam_size,
            steps,
            per_step_gain: plan.per_step_gain.clone(),
            cumulative_gain: plan.cumulative_gain,
            entropy_before: plan.entropy_before,
            entropy_after: plan.entropy_after,
            stopped_early: plan.stopped_early,
        }
    }
}
