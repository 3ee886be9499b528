use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::controlflow::{
    evaluate_candidate, log_entropy, relative_gain, ControlFlowConfig, ControlFlowVerdict,
};
use crate::eventlog::{EventLog, EventLogError, Refinement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    AllAtOnce,
    Greedy,
    Beam,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub control_flow: ControlFlowConfig,
    /// Only apply steps whose gain on the then-current log is positive.
    pub stop_on_ig: bool,
    /// Largest number of proposals exhaustive search accepts.
    pub exhaustive_cap: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { control_flow: ControlFlowConfig::default(), stop_on_ig: false, exhaustive_cap: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub refinement: Refinement,
    /// Verdict on the log as it was just before this step.
    pub verdict: ControlFlowVerdict,
    /// Gain relative to the original log after this step.
    pub cumulative_gain: f64,
}

impl PlanStep {
    pub fn label(&self) -> &str {
        self.refinement.label()
    }

    pub fn gain(&self) -> f64 {
        self.verdict.information_gain
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementPlan {
    pub strategy: Strategy,
    pub k: usize,
    pub beam_size: Option<usize>,
    pub steps: Vec<PlanStep>,
    pub per_step_gain: Vec<f64>,
    pub entropy_before: f64,
    pub entropy_after: f64,
    /// `(H0 - H_final) / H0` against the original log.
    pub cumulative_gain: f64,
    /// Fewer than `k` steps because the remaining proposals were rejected.
    pub stopped_early: bool,
}

impl RefinementPlan {
    pub fn labels(&self) -> Vec<&str> {
        self.steps.iter().map(PlanStep::label).collect()
    }

    /// Applies the steps in order.
    pub fn apply(&self, log: &EventLog) -> Result<EventLog, EventLogError> {
        let mut out = log.clone();
        for s in &self.steps {
            out = s.refinement.apply(&out)?;
        }
        Ok(out)
    }
}

/// Shared machinery: the original log, its entropy and the proposals sorted
/// by label.
struct Search<'a> {
    base: &'a EventLog,
    proposals: Vec<&'a Refinement>,
    config: &'a SearchConfig,
    h0: f64,
}

struct Evaluation {
    verdict: ControlFlowVerdict,
    refined: EventLog,
}

impl<'a> Search<'a> {
    fn new(
        base: &'a EventLog,
        proposals: &'a [Refinement],
        config: &'a SearchConfig,
        k: usize,
    ) -> Result<Self, SearchError> {
        if k == 0 {
            return Err(SearchError::InvalidParameter("k must be at least 1".into()));
        }
        let mut sorted: Vec<&Refinement> = proposals.iter().collect();
        sorted.sort_by(|a, b| a.label().cmp(b.label()));
        if let Some(w) = sorted.windows(2).find(|w| w[0].label() == w[1].label()) {
            return Err(SearchError::DuplicateLabel(w[0].label().to_string()));
        }
        Ok(Self { base, proposals: sorted, config, h0: log_entropy(base, config.control_flow.end_token) })
    }

    fn evaluate(&self, log: &EventLog, idx: usize) -> Result<Evaluation, SearchError> {
        let p = self.proposals[idx];
        let verdict = evaluate_candidate(log, p, &self.config.control_flow)?;
        let refined = p.apply(log)?;
        Ok(Evaluation { verdict, refined })
    }

    fn acceptable(&self, v: &ControlFlowVerdict) -> bool {
        v.pass && (!self.config.stop_on_ig || v.information_gain > 0.0)
    }

    fn label_seq(&self, seq: &[usize]) -> Vec<&str> {
        seq.iter().map(|&i| self.proposals[i].label()).collect()
    }

    /// Replays `seq` from the original log, recording each step.
    fn plan(
        &self,
        strategy: Strategy,
        k: usize,
        beam: Option<usize>,
        seq: &[usize],
        stopped_early: bool,
    ) -> Result<RefinementPlan, SearchError> {
        let mut log = self.base.clone();
        let mut steps = Vec::with_capacity(seq.len());
        for &i in seq {
            let Evaluation { verdict, refined } = self.evaluate(&log, i)?;
            let cumulative_gain = relative_gain(self.h0, verdict.entropy_after);
            steps.push(PlanStep { refinement: self.proposals[i].clone(), verdict, cumulative_gain });
            log = refined;
        }
        let entropy_after = steps.last().map_or(self.h0, |s| s.verdict.entropy_after);
        Ok(RefinementPlan {
            strategy,
            k,
            beam_size: beam,
            per_step_gain: steps.iter().map(PlanStep::gain).collect(),
            steps,
            entropy_before: self.h0,
            entropy_after,
            cumulative_gain: relative_gain(self.h0, entropy_after),
            stopped_early,
        })
    }
}

/// Lower entropy first, then the lexicographically smaller label sequence.
fn better(h_a: f64, seq_a: &[&str], h_b: f64, seq_b: &[&str]) -> bool {
    match h_a.total_cmp(&h_b) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => seq_a < seq_b,
    }
}

/// Ranks proposals once, on the original log, and applies the top `k`.
pub fn all_at_once(
    log: &EventLog,
    proposals: &[Refinement],
    k: usize,
    config: &SearchConfig,
) -> Result<RefinementPlan, SearchError> {
    let s = Search::new(log, proposals, config, k)?;
    let evals: Vec<ControlFlowVerdict> = (0..s.proposals.len())
        .into_par_iter()
        .map(|i| s.evaluate(log, i).map(|e| e.verdict))
        .collect::<Result<_, _>>()?;
    let mut ranked: Vec<usize> = (0..evals.len()).filter(|&i| evals[i].pass).collect();
    // Stable sort keeps label order among equal entropies.
    ranked.sort_by(|&a, &b| evals[a].entropy_after.total_cmp(&evals[b].entropy_after));
    let mut seq = Vec::new();
    let mut stopped = false;
    for i in ranked {
        if seq.len() == k {
            break;
        }
        if config.stop_on_ig && evals[i].information_gain <= 0.0 {
            stopped = true;
            break;
        }
        seq.push(i);
    }
    s.plan(Strategy::AllAtOnce, k, None, &seq, stopped)
}

/// Repeatedly applies the best acceptable proposal on the current log.
pub fn greedy(
    log: &EventLog,
    proposals: &[Refinement],
    k: usize,
    config: &SearchConfig,
) -> Result<RefinementPlan, SearchError> {
    let s = Search::new(log, proposals, config, k)?;
    let mut current = log.clone();
    let mut seq: Vec<usize> = Vec::new();
    let mut stopped = false;
    while seq.len() < k {
        let open: Vec<usize> = (0..s.proposals.len()).filter(|i| !seq.contains(i)).collect();
        if open.is_empty() {
            break;
        }
        let evals: Vec<(usize, Evaluation)> =
            open.par_iter().map(|&i| s.evaluate(&current, i).map(|e| (i, e))).collect::<Result<_, _>>()?;
        let mut best: Option<(usize, Evaluation)> = None;
        for (i, e) in evals {
            if !s.acceptable(&e.verdict) {
                continue;
            }
            let replace = match &best {
                None => true,
                Some((j, b)) => better(
                    e.verdict.entropy_after,
                    &[s.proposals[i].label()],
                    b.verdict.entropy_after,
                    &[s.proposals[*j].label()],
                ),
            };
            if replace {
                best = Some((i, e));
            }
        }
        match best {
            Some((i, e)) => {
                seq.push(i);
                current = e.refined;
            }
            None => {
                stopped = true;
                break;
            }
        }
    }
    s.plan(Strategy::Greedy, k, None, &seq, stopped)
}

struct BeamState {
    seq: Vec<usize>,
    log: EventLog,
    entropy: f64,
}

/// Keeps the `beam_size` best partial sequences per depth; the result is the
/// best sequence at the deepest depth reached.
pub fn beam(
    log: &EventLog,
    proposals: &[Refinement],
    k: usize,
    beam_size: usize,
    config: &SearchConfig,
) -> Result<RefinementPlan, SearchError> {
    let s = Search::new(log, proposals, config, k)?;
    if beam_size == 0 {
        return Err(SearchError::InvalidParameter("beam size must be at least 1".into()));
    }
    let mut frontier = vec![BeamState { seq: Vec::new(), log: log.clone(), entropy: s.h0 }];
    let mut stopped = false;
    for _ in 0..k {
        let expansions: Vec<(usize, usize)> = frontier
            .iter()
            .enumerate()
            .flat_map(|(si, st)| {
                (0..s.proposals.len()).filter(move |i| !st.seq.contains(i)).map(move |i| (si, i))
            })
            .collect();
        if expansions.is_empty() {
            break;
        }
        let children: Vec<Option<BeamState>> = expansions
            .par_iter()
            .map(|&(si, i)| {
                let parent = &frontier[si];
                let e = s.evaluate(&parent.log, i)?;
                if !s.acceptable(&e.verdict) {
                    return Ok(None);
                }
                let mut seq = parent.seq.clone();
                seq.push(i);
                Ok(Some(BeamState { seq, log: e.refined, entropy: e.verdict.entropy_after }))
            })
            .collect::<Result<_, SearchError>>()?;
        // One state per label set; the refined log depends only on the set.
        let mut by_set: BTreeMap<BTreeSet<usize>, BeamState> = BTreeMap::new();
        for c in children.into_iter().flatten() {
            let key: BTreeSet<usize> = c.seq.iter().copied().collect();
            match by_set.get(&key) {
                Some(old)
                    if !better(c.entropy, &s.label_seq(&c.seq), old.entropy, &s.label_seq(&old.seq)) => {}
                _ => {
                    by_set.insert(key, c);
                }
            }
        }
        if by_set.is_empty() {
            stopped = true;
            break;
        }
        let mut next: Vec<BeamState> = by_set.into_values().collect();
        next.sort_by(|a, b| {
            a.entropy.total_cmp(&b.entropy).then_with(|| s.label_seq(&a.seq).cmp(&s.label_seq(&b.seq)))
        });
        next.truncate(beam_size);
        frontier = next;
    }
    s.plan(Strategy::Beam, k, Some(beam_size), &frontier[0].seq, stopped)
}

/// Every label set of size up to `k` reachable through acceptable steps,
/// memoized by set. The lowest-entropy set of the largest reachable size wins;
/// it is reported in its lexicographically smallest acceptable order.
pub fn exhaustive(
    log: &EventLog,
    proposals: &[Refinement],
    k: usize,
    config: &SearchConfig,
) -> Result<RefinementPlan, SearchError> {
    let s = Search::new(log, proposals, config, k)?;
    let n = s.proposals.len();
    if n > config.exhaustive_cap {
        return Err(SearchError::ExhaustiveCap { labels: n, cap: config.exhaustive_cap });
    }
    // Reachable sets of the current size, keyed by bitmask.
    let mut level: BTreeMap<u32, (EventLog, f64)> = BTreeMap::new();
    level.insert(0, (log.clone(), s.h0));
    let mut stopped = false;
    for _ in 0..k.min(n) {
        let targets: BTreeSet<u32> = level
            .keys()
            .flat_map(|&m| (0..n).filter(move |i| m & (1 << i) == 0).map(move |i| m | (1 << i)))
            .collect();
        let reached: Vec<Option<(u32, EventLog, f64)>> = targets
            .par_iter()
            .map(|&t| {
                for i in (0..n).filter(|i| t & (1 << i) != 0) {
                    let Some((parent, _)) = level.get(&(t & !(1 << i))) else { continue };
                    let e = s.evaluate(parent, i)?;
                    if s.acceptable(&e.verdict) {
                        return Ok(Some((t, e.refined, e.verdict.entropy_after)));
                    }
                }
                Ok(None)
            })
            .collect::<Result<_, SearchError>>()?;
        let next: BTreeMap<u32, (EventLog, f64)> =
            reached.into_iter().flatten().map(|(t, l, h)| (t, (l, h))).collect();
        if next.is_empty() {
            stopped = true;
            break;
        }
        level = next;
    }
    let best_h = level.values().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let mut best: Option<Vec<usize>> = None;
    for (&mask, _) in level.iter().filter(|(_, v)| v.1 == best_h) {
        let seq = smallest_order(&s, mask)?.expect("reachable set has an acceptable order");
        if best.as_ref().map_or(true, |b| s.label_seq(&seq) < s.label_seq(b)) {
            best = Some(seq);
        }
    }
    s.plan(Strategy::Exhaustive, k, None, &best.unwrap_or_default(), stopped)
}

/// Lexicographically smallest acceptable ordering of the set `mask`.
fn smallest_order(s: &Search<'_>, mask: u32) -> Result<Option<Vec<usize>>, SearchError> {
    fn go(s: &Search<'_>, log: &EventLog, rest: u32, seq: &mut Vec<usize>) -> Result<bool, SearchError> {
        if rest == 0 {
            return Ok(true);
        }
        // Proposals are label-sorted, so index order is label order.
        for i in (0..s.proposals.len()).filter(|i| rest & (1 << i) != 0) {
            let e = s.evaluate(log, i)?;
            if !s.acceptable(&e.verdict) {
                continue;
            }
            seq.push(i);
            if go(s, &e.refined, rest & !(1 << i), seq)? {
                return Ok(true);
            }
            seq.pop();
        }
        Ok(false)
    }
    let mut seq = Vec::new();
    Ok(go(s, s.base, mask, &mut seq)?.then_some(seq))
}

/// Dispatches on `strategy`; `beam_size` is only read for beam search.
pub fn run_strategy(
    strategy: Strategy,
    log: &EventLog,
    proposals: &[Refinement],
    k: usize,
    beam_size: usize,
    config: &SearchConfig,
) -> Result<RefinementPlan, SearchError> {
    match strategy {
        Strategy::AllAtOnce => all_at_once(log, proposals, k, config),
        Strategy::Greedy => greedy(log, proposals, k, config),
        Strategy::Beam => beam(log, proposals, k, beam_size, config),
        Strategy::Exhaustive => exhaustive(log, proposals, k, config),
    }
}
