//! Event logs: events, traces, partitioning into traces, relabeling and
//! CSV/XES interchange.

mod csvio;
mod partition;
mod refine;
mod xes;

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use chrono::{FixedOffset, NaiveDateTime, Timelike};
use thiserror::Error;

pub use csvio::{parse_csv, write_csv, CsvColumns, ISO_FORMATS};
pub use partition::{partition, PartitionSpec};
pub use refine::{apply_refinement, check_refinement_order, Refinement, RelabelingMap};
pub use xes::{parse_xes, write_xes};

#[derive(Debug, Error)]
pub enum EventLogError {
    #[error("CSV row {row}, column '{column}': {message}")]
    Csv { row: u64, column: String, message: String },
    #[error("CSV: {0}")]
    CsvFormat(String),
    #[error("XES trace {trace}, event {event}: {message}")]
    XesEvent { trace: usize, event: usize, message: String },
    #[error("XES: {0}")]
    Xml(String),
    #[error("duplicate event id '{0}'")]
    DuplicateId(String),
    #[error("event '{id}' has no attribute '{attribute}'")]
    MissingKey { id: String, attribute: String },
    #[error("invalid partition spec: {0}")]
    InvalidSpec(String),
    #[error("no cluster assignment for event '{0}'")]
    MissingAssignment(String),
    #[error("assignment given for event '{0}', which does not carry the refined label")]
    UnexpectedAssignment(String),
    #[error("cluster {cluster} of '{label}' has no refined label")]
    UnmappedCluster { label: String, cluster: usize },
    #[error("refined label '{0}' collides with an existing or sibling label")]
    LabelCollision(String),
    #[error("logs do not contain the same event ids")]
    IdMismatch,
}

/// Attribute value; CSV input always yields text.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Text(String),
    Number(f64),
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Text(s) => f.write_str(s),
            AttrValue::Number(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub id: String,
    /// Local wall-clock time; time of day is read from this.
    pub timestamp: NaiveDateTime,
    /// UTC offset the timestamp was recorded with, if the source had one.
    pub offset: Option<FixedOffset>,
    pub label: String,
    pub attributes: Vec<(String, AttrValue)>,
}

impl Event {
    pub fn new(id: impl Into<String>, timestamp: NaiveDateTime, label: impl Into<String>) -> Self {
        Self { id: id.into(), timestamp, offset: None, label: label.into(), attributes: Vec::new() }
    }

    pub fn with_attribute(mut self, name: impl Into<String>, value: AttrValue) -> Self {
        self.attributes.push((name.into(), value));
        self
    }

    pub fn attribute(&self, name: &str) -> Option<&AttrValue> {
        self.attributes.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    /// Hours since local midnight, in `[0, 24)`.
    pub fn time_of_day_hours(&self) -> f64 {
        let t = self.timestamp.time();
        f64::from(t.num_seconds_from_midnight()) / 3600.0 + f64::from(t.nanosecond() % 1_000_000_000) / 3.6e12
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub case_id: String,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.label.as_str())
    }
}

/// A set of traces with unique event ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    traces: Vec<Trace>,
}

impl EventLog {
    /// Checks id uniqueness; events inside each trace are stably sorted by
    /// timestamp.
    pub fn from_traces(mut traces: Vec<Trace>) -> Result<Self, EventLogError> {
        let mut seen = HashSet::new();
        for trace in &mut traces {
            for e in &trace.events {
                if !seen.insert(e.id.clone()) {
                    return Err(EventLogError::DuplicateId(e.id.clone()));
                }
            }
            trace.events.sort_by_key(|e| e.timestamp);
        }
        Ok(Self { traces })
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.traces.iter().flat_map(|t| t.events.iter())
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(|t| t.events.len()).sum()
    }

    pub fn label_alphabet(&self) -> BTreeSet<String> {
        self.events().map(|e| e.label.clone()).collect()
    }

    /// Times of day (hours) of every event carrying `label`, in log order.
    pub fn hours_of(&self, label: &str) -> Vec<(String, f64)> {
        self.events().filter(|e| e.label == label).map(|e| (e.id.clone(), e.time_of_day_hours())).collect()
    }

    /// Label sequences, one per trace.
    pub fn label_sequences(&self) -> Vec<Vec<&str>> {
        self.traces.iter().map(|t| t.labels().collect()).collect()
    }

    pub(crate) fn map_labels<F: FnMut(&Event) -> String>(&self, mut f: F) -> Self {
        let traces = self
            .traces
            .iter()
            .map(|t| Trace {
                case_id: t.case_id.clone(),
                events: t.events.iter().map(|e| Event { label: f(e), ..e.clone() }).collect(),
            })
            .collect();
        Self { traces }
    }
}

pub(crate) fn check_unique_ids(events: &[Event]) -> Result<(), EventLogError> {
    let mut seen = HashSet::new();
    for e in events {
        if !seen.insert(e.id.as_str()) {
            return Err(EventLogError::DuplicateId(e.id.clone()));
        }
    }
    Ok(())
}
