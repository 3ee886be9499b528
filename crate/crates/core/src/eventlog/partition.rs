use std::collections::HashMap;

use chrono::{NaiveDate, NaiveTime};

use super::{check_unique_ids, Event, EventLog, EventLogError, Trace};

/// How events are grouped into traces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    pub key_attributes: Vec<String>,
    /// Split traces per calendar day.
    pub by_day: bool,
    /// Time of day at which a new day starts.
    pub day_boundary: NaiveTime,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self { key_attributes: Vec::new(), by_day: true, day_boundary: NaiveTime::MIN }
    }
}

impl PartitionSpec {
    pub fn daily() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), EventLogError> {
        if self.key_attributes.is_empty() && !self.by_day {
            return Err(EventLogError::InvalidSpec("set at least one key attribute or split by day".into()));
        }
        Ok(())
    }

    /// Calendar day an event belongs to; days start at `day_boundary`.
    pub fn day_of(&self, event: &Event) -> NaiveDate {
        (event.timestamp - self.day_boundary.signed_duration_since(NaiveTime::MIN)).date()
    }
}

/// Groups a flat event set into traces.
///
/// Traces are keyed by the key attribute values and (optionally) the day.
/// Within a trace events are stably sorted by timestamp, so ties keep input
/// order. Traces are ordered by first timestamp, then case id.
pub fn partition(events: Vec<Event>, spec: &PartitionSpec) -> Result<EventLog, EventLogError> {
    spec.validate()?;
    check_unique_ids(&events)?;
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut traces: Vec<Trace> = Vec::new();
    for event in events {
        let mut parts = Vec::with_capacity(spec.key_attributes.len() + 1);
        for name in &spec.key_attributes {
            let value = event
                .attribute(name)
                .ok_or_else(|| EventLogError::MissingKey { id: event.id.clone(), attribute: name.clone() })?;
            parts.push(value.to_string());
        }
        if spec.by_day {
            parts.push(spec.day_of(&event).format("%Y-%m-%d").to_string());
        }
        let case_id = parts.join("|");
        let slot = *index.entry(case_id.clone()).or_insert_with(|| {
            traces.push(Trace { case_id, events: Vec::new() });
            traces.len() - 1
        });
        traces[slot].events.push(event);
    }
    for t in &mut traces {
        t.events.sort_by_key(|e| e.timestamp);
    }
    traces.sort_by(|a, b| {
        a.events[0].timestamp.cmp(&b.events[0].timestamp).then_with(|| a.case_id.cmp(&b.case_id))
    });
    EventLog::from_traces(traces)
}
