//! Per-label refinement candidates and the strategies that combine them.

mod pipeline;
mod strategy;

use thiserror::Error;

use crate::controlflow::ControlFlowError;
use crate::eventlog::{EventLogError, Refinement};

pub use pipeline::{
    analyze_label, generate_candidates, label_sample, PipelineConfig, RefinementCandidate, Stage, WatsonRule,
};
pub use strategy::{
    all_at_once, beam, exhaustive, greedy, run_strategy, PlanStep, RefinementPlan, SearchConfig, Strategy,
};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("exhaustive search over {labels} labels exceeds the cap of {cap}; use beam search instead")]
    ExhaustiveCap { labels: usize, cap: usize },
    #[error("more than one proposal refines '{0}'")]
    DuplicateLabel(String),
    #[error("{0}")]
    InvalidParameter(String),
    #[error(transparent)]
    ControlFlow(#[from] ControlFlowError),
    #[error(transparent)]
    Log(#[from] EventLogError),
}

/// Refinements of the eligible candidates, in label order.
pub fn proposals(candidates: &[RefinementCandidate]) -> Vec<Refinement> {
    candidates.iter().filter(|c| c.eligible).filter_map(|c| c.refinement.clone()).collect()
}
