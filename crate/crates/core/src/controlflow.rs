//! Directly-follows statistics, their binary entropy, the information gain of
//! a refinement and a G-test of whether refined labels differ in what
//! follows them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::eventlog::{EventLog, EventLogError, Refinement};

/// Synthetic successor of every trace-final event.
pub const END_TOKEN: &str = "[end]";

#[derive(Debug, Error)]
pub enum ControlFlowError {
    #[error("significance test needs at least 2 refined labels present, found {0}")]
    TooFewRefinedLabels(usize),
    #[error(transparent)]
    Log(#[from] EventLogError),
}

/// Occurrence counts and directly-follows counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DirectlyFollowsStats {
    pub activity_counts: BTreeMap<String, u64>,
    /// `(b, c)` to the number of occurrences of `b` directly followed by `c`.
    pub follows: BTreeMap<(String, String), u64>,
    pub end_token: bool,
}

impl DirectlyFollowsStats {
    pub fn count(&self, label: &str) -> u64 {
        self.activity_counts.get(label).copied().unwrap_or(0)
    }

    pub fn follows_count(&self, b: &str, c: &str) -> u64 {
        self.follows.get(&(b.to_string(), c.to_string())).copied().unwrap_or(0)
    }

    /// Occurrences of `b` not directly followed by `c`.
    pub fn not_follows_count(&self, b: &str, c: &str) -> u64 {
        self.count(b) - self.follows_count(b, c)
    }
}

/// Counts consecutive pairs within each trace.
pub fn directly_follows(log: &EventLog, with_end_token: bool) -> DirectlyFollowsStats {
    directly_follows_sequences(&log.label_sequences(), with_end_token)
}

pub fn directly_follows_sequences<S: AsRef<str>>(
    traces: &[Vec<S>],
    with_end_token: bool,
) -> DirectlyFollowsStats {
    let mut stats = DirectlyFollowsStats { end_token: with_end_token, ..Default::default() };
    for trace in traces {
        for (i, b) in trace.iter().enumerate() {
            let b = b.as_ref();
            *stats.activity_counts.entry(b.to_string()).or_default() += 1;
            let next = match trace.get(i + 1) {
                Some(c) => Some(c.as_ref()),
                None if with_end_token => Some(END_TOKEN),
                None => None,
            };
            if let Some(c) = next {
                *stats.follows.entry((b.to_string(), c.to_string())).or_default() += 1;
            }
        }
    }
    stats
}

/// Binary entropy in bits; `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    /// `count(b) * H(follows(b, c) / count(b))` for every observed pair.
    pub per_pair_bits: BTreeMap<(String, String), f64>,
    pub total_bits: f64,
}

pub fn total_entropy(stats: &DirectlyFollowsStats) -> EntropyReport {
    let mut per_pair_bits = BTreeMap::new();
    let mut total_bits = 0.0;
    for ((b, c), &plus) in &stats.follows {
        let n = stats.count(b) as f64;
        let bits = n * binary_entropy(plus as f64 / n);
        total_bits += bits;
        per_pair_bits.insert((b.clone(), c.clone()), bits);
    }
    EntropyReport { per_pair_bits, total_bits }
}

/// Total directly-follows entropy of a log, in bits.
pub fn log_entropy(log: &EventLog, with_end_token: bool) -> f64 {
    total_entropy(&directly_follows(log, with_end_token)).total_bits
}

/// Relative entropy reduction `(before - after) / before`; 0 when `before`
/// is 0.
pub fn relative_gain(before: f64, after: f64) -> f64 {
    if before > 0.0 {
        (before - after) / before
    } else {
        0.0
    }
}

/// Information gain of applying `refinement` to `log`.
pub fn information_gain(
    log: &EventLog,
    refinement: &Refinement,
    with_end_token: bool,
) -> Result<f64, ControlFlowError> {
    let refined = refinement.apply(log)?;
    Ok(relative_gain(log_entropy(log, with_end_token), log_entropy(&refined, with_end_token)))
}

/// G-test outcome for one other activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityTest {
    pub label: String,
    pub g: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Likelihood-ratio statistic `2 sum O ln(O/E)` of a `k x 2` table and its
/// degrees of freedom; rows with zero total are dropped.
pub fn g_statistic(table: &[[u64; 2]]) -> (f64, usize) {
    let rows: Vec<[u64; 2]> = table.iter().copied().filter(|r| r[0] + r[1] > 0).collect();
    if rows.len() < 2 {
        return (0.0, rows.len().saturating_sub(1));
    }
    let total: u64 = rows.iter().map(|r| r[0] + r[1]).sum();
    let cols = [rows.iter().map(|r| r[0]).sum::<u64>(), rows.iter().map(|r| r[1]).sum::<u64>()];
    let mut g = 0.0;
    for r in &rows {
        let row_total = (r[0] + r[1]) as f64;
        for j in 0..2 {
            if r[j] > 0 {
                let expected = row_total * cols[j] as f64 / total as f64;
                g += r[j] as f64 * (r[j] as f64 / expected).ln();
            }
        }
    }
    ((2.0 * g).max(0.0), rows.len() - 1)
}

/// Upper-tail chi-square probability.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if df == 0 || x <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    dist.sf(x)
}

/// For every other real activity `c`, tests whether the refined labels
/// differ in how often they are directly followed by `c`.
pub fn significance_test(
    log: &EventLog,
    refinement: &Refinement,
    with_end_token: bool,
) -> Result<Vec<ActivityTest>, ControlFlowError> {
    let refined = refinement.apply(log)?;
    let stats = directly_follows(&refined, with_end_token);
    let refined_labels: Vec<&str> = refinement.map.refined_labels().filter(|l| stats.count(l) > 0).collect();
    if refined_labels.len() < 2 {
        return Err(ControlFlowError::TooFewRefinedLabels(refined_labels.len()));
    }
    let excluded: BTreeSet<&str> = refined_labels.iter().copied().collect();
    let others = stats.activity_counts.keys().filter(|c| !excluded.contains(c.as_str()));
    Ok(others
        .map(|c| {
            let table: Vec<[u64; 2]> = refined_labels
                .iter()
                .map(|a| [stats.follows_count(a, c), stats.not_follows_count(a, c)])
                .collect();
            let (g, df) = g_statistic(&table);
            ActivityTest { label: c.clone(), g, df, p_value: chi_square_sf(g, df) }
        })
        .collect())
}

/// Which evidence a candidate must show to pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictMode {
    /// At least one other activity differs significantly.
    #[default]
    Significance,
    /// Information gain is strictly positive.
    IgPositive,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlFlowVerdict {
    pub information_gain: f64,
    pub entropy_before: f64,
    pub entropy_after: f64,
    /// Every tested activity, in label order.
    pub tests: Vec<ActivityTest>,
    /// Activities with `p < alpha`.
    pub significant_activities: Vec<(String, f64)>,
    pub alpha: f64,
    pub mode: VerdictMode,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlFlowConfig {
    pub alpha: f64,
    pub mode: VerdictMode,
    pub end_token: bool,
}

impl Default for ControlFlowConfig {
    fn default() -> Self {
        Self { alpha: 0.01, mode: VerdictMode::Significance, end_token: true }
    }
}

/// Combines information gain and the significance test according to
/// `config.mode`.
pub fn evaluate_candidate(
    log: &EventLog,
    refinement: &Refinement,
    config: &ControlFlowConfig,
) -> Result<ControlFlowVerdict, ControlFlowError> {
    let refined = refinement.apply(log)?;
    let entropy_before = log_entropy(log, config.end_token);
    let entropy_after = log_entropy(&refined, config.end_token);
    let information_gain = relative_gain(entropy_before, entropy_after);
    let tests = significance_test(log, refinement, config.end_token)?;
    let significant_activities: Vec<(String, f64)> =
        tests.iter().filter(|t| t.p_value < config.alpha).map(|t| (t.label.clone(), t.p_value)).collect();
    Ok(verdict(information_gain, entropy_before, entropy_after, tests, significant_activities, config))
}

fn verdict(
    information_gain: f64,
    entropy_before: f64,
    entropy_after: f64,
    tests: Vec<ActivityTest>,
    significant_activities: Vec<(String, f64)>,
    config: &ControlFlowConfig,
) -> ControlFlowVerdict {
    let significant = !significant_activities.is_empty();
    let positive = information_gain > 0.0;
    let pass = match config.mode {
        VerdictMode::Significance => significant,
        VerdictMode::IgPositive => positive,
        VerdictMode::Both => significant && positive,
    };
    ControlFlowVerdict {
        information_gain,
        entropy_before,
        entropy_after,
        tests,
        significant_activities,
        alpha: config.alpha,
        mode: config.mode,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::{Event, RelabelingMap, Trace};
    use chrono::NaiveDate;

    fn log_of(traces: &[&[&str]]) -> EventLog {
        let day = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let mut id = 0;
        let traces = traces
            .iter()
            .enumerate()
            .map(|(t, labels)| Trace {
                case_id: format!("t{t}"),
                events: labels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        id += 1;
                        Event::new(format!("e{id}"), day.and_hms_opt(i as u32, 0, 0).unwrap(), *l)
                    })
                    .collect(),
            })
            .collect();
        EventLog::from_traces(traces).unwrap()
    }

    fn split_by_successor(log: &EventLog, label: &str, successor: &str) -> Refinement {
        let mut assignment = BTreeMap::new();
        for t in log.traces() {
            for (i, e) in t.events.iter().enumerate() {
                if e.label == label {
                    let next = t.events.get(i + 1).map(|n| n.label.as_str());
                    assignment.insert(e.id.clone(), usize::from(next != Some(successor)));
                }
            }
        }
        Refinement { map: RelabelingMap::numbered(label, 2), assignment }
    }

    #[test]
    fn coin_toss_pair() {
        let log = log_of(&[&["a", "b"], &["a", "c"]]);
        let stats = directly_follows(&log, true);
        assert_eq!(stats.follows_count("a", "b"), 1);
        assert_eq!(stats.not_follows_count("a", "b"), 1);
        let report = total_entropy(&stats);
        let bits = report.per_pair_bits[&("a".to_string(), "b".to_string())];
        assert_eq!(bits, 2.0);
        assert_eq!(bits / stats.count("a") as f64, 1.0);
    }

    #[test]
    fn empty_and_deterministic_logs() {
        let stats = directly_follows(&EventLog::default(), true);
        assert!(stats.activity_counts.is_empty() && stats.follows.is_empty());
        let ten: Vec<&[&str]> = vec![&["a", "b"]; 10];
        let report = total_entropy(&directly_follows(&log_of(&ten), true));
        assert_eq!(report.total_bits, 0.0);
        assert_eq!(report.per_pair_bits.len(), 2);
        let singles = log_of(&[&["a"], &["b"], &["a"]]);
        assert_eq!(total_entropy(&directly_follows(&singles, false)).total_bits, 0.0);
    }

    #[test]
    fn half_split_pair_is_ten_bits() {
        let mut traces: Vec<&[&str]> = vec![&["a", "b"]; 5];
        traces.extend(vec![&["a", "c"][..]; 5]);
        let report = total_entropy(&directly_follows(&log_of(&traces), true));
        assert_eq!(report.per_pair_bits[&("a".to_string(), "b".to_string())], 10.0);
        assert_eq!(report.total_bits, 20.0);
    }

    #[test]
    fn aligned_split_removes_all_entropy() {
        let mut traces: Vec<&[&str]> = vec![&["a", "b"]; 4];
        traces.extend(vec![&["a", "c"][..]; 4]);
        let log = log_of(&traces);
        let r = split_by_successor(&log, "a", "b");
        assert_eq!(information_gain(&log, &r, true).unwrap(), 1.0);
        assert_eq!(information_gain(&log, &r, false).unwrap(), 1.0);
    }

    #[test]
    fn refining_a_singleton_cannot_gain() {
        let log = log_of(&[&["x", "a", "b"], &["a", "c"], &["a", "b"]]);
        let id = log.events().find(|e| e.label == "x").unwrap().id.clone();
        let r =
            Refinement { map: RelabelingMap::numbered("x", 1), assignment: [(id, 0)].into_iter().collect() };
        assert!(information_gain(&log, &r, true).unwrap() <= 0.0);
    }

    #[test]
    fn end_token_rows_partition_occurrences() {
        let log = log_of(&[&["a", "b", "a"], &["b"], &["a", "a", "c"]]);
        let stats = directly_follows(&log, true);
        for (b, &n) in &stats.activity_counts {
            let sum: u64 = stats.follows.iter().filter(|((x, _), _)| x == b).map(|(_, &v)| v).sum();
            assert_eq!(sum, n);
        }
    }

    #[test]
    fn g_statistic_values() {
        let (g, df) = g_statistic(&[[10, 0], [0, 10]]);
        assert!((g - 40.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(df, 1);
        assert!(chi_square_sf(g, df) < 1e-6);
        let (g, _) = g_statistic(&[[5, 5], [5, 5]]);
        assert_eq!(g, 0.0);
        assert_eq!(chi_square_sf(g, 1), 1.0);
        let (_, df) = g_statistic(&[[3, 2], [0, 0], [1, 4]]);
        assert_eq!(df, 1);
    }

    #[test]
    fn chi_square_tail_matches_closed_form() {
        // df = 2: P(X > x) = exp(-x/2)
        for &x in &[0.5, 3.0, 9.21] {
            assert!((chi_square_sf(x, 2) - (-x / 2.0).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn significance_flags_the_successor() {
        let mut traces: Vec<&[&str]> = vec![&["a", "b"]; 12];
        traces.extend(vec![&["a", "c"][..]; 12]);
        let log = log_of(&traces);
        let r = split_by_successor(&log, "a", "b");
        let tests = significance_test(&log, &r, true).unwrap();
        let labels: Vec<&str> = tests.iter().map(|t| t.label.as_str()).collect();
        assert_eq!(labels, vec!["b", "c"]);
        assert!(tests.iter().all(|t| t.p_value < 0.01));
        let one = Refinement {
            map: RelabelingMap::numbered("a", 1),
            assignment: r.assignment.iter().map(|(k, _)| (k.clone(), 0)).collect(),
        };
        assert!(matches!(significance_test(&log, &one, true), Err(ControlFlowError::TooFewRefinedLabels(1))));
    }

    #[test]
    fn verdict_modes() {
        let cfg = |mode| ControlFlowConfig { mode, ..Default::default() };
        let three: Vec<(String, f64)> = (0..3).map(|i| (format!("c{i}"), 0.001)).collect();
        assert!(verdict(0.12, 1.0, 0.88, vec![], three, &cfg(VerdictMode::Both)).pass);
        assert!(!verdict(-0.02, 1.0, 1.02, vec![], vec![], &cfg(VerdictMode::IgPositive)).pass);
        assert!(!verdict(0.05, 1.0, 0.95, vec![], vec![], &cfg(VerdictMode::Significance)).pass);
    }
}
