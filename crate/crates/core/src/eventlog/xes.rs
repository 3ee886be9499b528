//! Minimal XES subset: `log/trace/event` with typed key-value attributes.
//! Only `concept:name` and `time:timestamp` are required; nested attributes,
//! globals, classifiers and extensions are skipped.

use chrono::{DateTime, NaiveDateTime};
use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, Event as Xml};
use quick_xml::{Reader, Writer};

use super::csvio::{format_timestamp, ISO_FORMATS};
use super::{AttrValue, Event, EventLog, EventLogError, Trace};

const ATTRIBUTE_TAGS: &[&[u8]] = &[b"string", b"date", b"int", b"float", b"boolean", b"id"];

#[derive(Default)]
struct PendingEvent {
    label: Option<String>,
    timestamp: Option<String>,
    id: Option<String>,
    attributes: Vec<(String, AttrValue)>,
}

fn parse_xes_time(raw: &str) -> Option<(NaiveDateTime, Option<chrono::FixedOffset>)> {
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some((t.naive_local(), Some(*t.offset())));
    }
    if let Ok(t) = DateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S%.f%z") {
        return Some((t.naive_local(), Some(*t.offset())));
    }
    ISO_FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok()).map(|t| (t, None))
}

fn key_value(e: &BytesStart<'_>) -> Result<(String, String), EventLogError> {
    let mut key = None;
    let mut value = None;
    for attr in e.attributes() {
        let attr = attr.map_err(|err| EventLogError::Xml(err.to_string()))?;
        let text = attr.unescape_value().map_err(|err| EventLogError::Xml(err.to_string()))?.into_owned();
        match attr.key.as_ref() {
            b"key" => key = Some(text),
            b"value" => value = Some(text),
            _ => {}
        }
    }
    Ok((key.unwrap_or_default(), value.unwrap_or_default()))
}

fn finish_event(pending: PendingEvent, trace: usize, event: usize) -> Result<Event, EventLogError> {
    let err = |message: &str| EventLogError::XesEvent { trace, event, message: message.into() };
    let label = pending.label.ok_or_else(|| err("missing concept:name"))?;
    let raw = pending.timestamp.ok_or_else(|| err("missing time:timestamp"))?;
    let (timestamp, offset) =
        parse_xes_time(&raw).ok_or_else(|| err(&format!("unreadable time:timestamp '{raw}'")))?;
    Ok(Event {
        id: pending.id.unwrap_or_else(|| format!("{trace}:{event}")),
        timestamp,
        offset,
        label,
        attributes: pending.attributes,
    })
}

/// Reads an XES document.
pub fn parse_xes(bytes: &[u8]) -> Result<EventLog, EventLogError> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(true);
    let mut buf = Vec::new();
    let mut stack: Vec<Vec<u8>> = Vec::new();
    let mut traces: Vec<Trace> = Vec::new();
    let mut current: Option<PendingEvent> = None;
    let mut event_index = 0;

    loop {
        let ev = reader
            .read_event_into(&mut buf)
            .map_err(|e| EventLogError::Xml(format!("at byte {}: {e}", reader.buffer_position())))?;
        let (start, is_empty) = match &ev {
            Xml::Start(s) => (Some(s.clone()), false),
            Xml::Empty(s) => (Some(s.clone()), true),
            Xml::End(_) => {
                let name = stack.pop().unwrap_or_default();
                match name.as_slice() {
                    b"event" => {
                        let trace = traces.len() - 1;
                        let pending = current.take().unwrap_or_default();
                        let event = finish_event(pending, trace, event_index)?;
                        traces[trace].events.push(event);
                        event_index += 1;
                    }
                    b"trace" => event_index = 0,
                    _ => {}
                }
                (None, false)
            }
            Xml::Eof => break,
            _ => (None, false),
        };
        let Some(start) = start else {
            buf.clear();
            continue;
        };
        let name = start.name().as_ref().to_vec();
        let parent = stack.last().map(Vec::as_slice);
        match (name.as_slice(), parent) {
            (b"trace", Some(b"log")) => {
                traces.push(Trace { case_id: traces.len().to_string(), events: Vec::new() });
            }
            (b"event", Some(b"trace")) => current = Some(PendingEvent::default()),
            (tag, Some(b"trace")) if ATTRIBUTE_TAGS.contains(&tag) => {
                let (key, value) = key_value(&start)?;
                if key == "concept:name" {
                    traces.last_mut().expect("inside a trace").case_id = value;
                }
            }
            (tag, Some(b"event")) if ATTRIBUTE_TAGS.contains(&tag) => {
                let (key, value) = key_value(&start)?;
                let pending = current.as_mut().expect("inside an event");
                match key.as_str() {
                    "concept:name" => pending.label = Some(value),
                    "time:timestamp" => pending.timestamp = Some(value),
                    "identity:id" | "id" => pending.id = Some(value),
                    _ => {
                        let parsed = match tag {
                            b"int" | b"float" => value.parse().map(AttrValue::Number).ok(),
                            _ => None,
                        };
                        pending.attributes.push((key, parsed.unwrap_or(AttrValue::Text(value))));
                    }
                }
            }
            _ => {}
        }
        if is_empty {
            if name.as_slice() == b"event" && parent == Some(b"trace") {
                let trace = traces.len() - 1;
                let event = finish_event(current.take().unwrap_or_default(), trace, event_index)?;
                traces[trace].events.push(event);
                event_index += 1;
            }
        } else {
            stack.push(name);
        }
        buf.clear();
    }
    EventLog::from_traces(traces)
}

fn attribute(tag: &str, key: &str, value: &str) -> Xml<'static> {
    let mut el = BytesStart::new(tag.to_string());
    el.push_attribute(("key", key));
    el.push_attribute(("value", value));
    Xml::Empty(el)
}

/// Writes the log as XES; each event gets `concept:name`, `time:timestamp`
/// and `identity:id`, plus its other attributes.
pub fn write_xes(log: &EventLog) -> Vec<u8> {
    let mut w = Writer::new_with_indent(Vec::new(), b' ', 2);
    let mut put = |ev: Xml<'_>| w.write_event(ev).expect("write to memory");
    put(Xml::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)));
    put(Xml::Start(BytesStart::new("log").with_attributes([("xes.version", "1.0"), ("xes.features", "")])));
    for trace in log.traces() {
        put(Xml::Start(BytesStart::new("trace")));
        put(attribute("string", "concept:name", &trace.case_id));
        for e in &trace.events {
            put(Xml::Start(BytesStart::new("event")));
            put(attribute("string", "identity:id", &e.id));
            put(attribute("string", "concept:name", &e.label));
            put(attribute("date", "time:timestamp", &format_timestamp(e)));
            for (k, v) in &e.attributes {
                let tag = match v {
                    AttrValue::Text(_) => "string",
                    AttrValue::Number(_) => "float",
                };
                put(attribute(tag, k, &v.to_string()));
            }
            put(Xml::End(BytesEnd::new("event")));
        }
        put(Xml::End(BytesEnd::new("trace")));
    }
    put(Xml::End(BytesEnd::new("log")));
    let mut out = w.into_inner();
    out.push(b'\n');
    out
}
