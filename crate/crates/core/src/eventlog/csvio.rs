use chrono::{DateTime, NaiveDateTime};

use super::{check_unique_ids, AttrValue, Event, EventLog, EventLogError};

/// Timestamp layouts tried, in order, when no explicit format is given.
pub const ISO_FORMATS: &[&str] = &["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"];

/// Which CSV columns hold what.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvColumns {
    /// Explicit id column; when absent ids are 1-based row ordinals.
    pub id: Option<String>,
    pub timestamp: String,
    pub label: String,
    /// Extra attribute columns; `None` keeps every other column.
    pub attributes: Option<Vec<String>>,
}

impl Default for CsvColumns {
    fn default() -> Self {
        Self { id: None, timestamp: "timestamp".into(), label: "label".into(), attributes: None }
    }
}

fn parse_timestamp(
    raw: &str,
    format: Option<&str>,
) -> Result<(NaiveDateTime, Option<chrono::FixedOffset>), String> {
    let raw = raw.trim();
    match format {
        Some(fmt) => NaiveDateTime::parse_from_str(raw, fmt)
            .map(|t| (t, None))
            .or_else(|_| DateTime::parse_from_str(raw, fmt).map(|t| (t.naive_local(), Some(*t.offset()))))
            .map_err(|e| format!("'{raw}' does not match '{fmt}': {e}")),
        None => {
            if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
                return Ok((t.naive_local(), Some(*t.offset())));
            }
            ISO_FORMATS
                .iter()
                .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
                .map(|t| (t, None))
                .ok_or_else(|| format!("'{raw}' is not an ISO-8601 date-time"))
        }
    }
}

pub(crate) fn format_timestamp(e: &Event) -> String {
    match e.offset {
        Some(off) => e
            .timestamp
            .and_local_timezone(off)
            .single()
            .map(|t| t.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, false))
            .unwrap_or_else(|| e.timestamp.format("%Y-%m-%dT%H:%M:%S%.f").to_string()),
        None => e.timestamp.format("%Y-%m-%dT%H:%M:%S%.f").to_string(),
    }
}

/// Reads a flat event set from CSV with a header row.
pub fn parse_csv(
    bytes: &[u8],
    columns: &CsvColumns,
    timestamp_format: Option<&str>,
) -> Result<Vec<Event>, EventLogError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let headers = reader.headers().map_err(|e| EventLogError::CsvFormat(e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| EventLogError::CsvFormat(format!("no column named '{name}'")))
    };
    let ts_col = find(&columns.timestamp)?;
    let label_col = find(&columns.label)?;
    let id_col = columns.id.as_deref().map(find).transpose()?;
    let attr_cols: Vec<(String, usize)> = match &columns.attributes {
        Some(names) => names.iter().map(|n| find(n).map(|i| (n.clone(), i))).collect::<Result<_, _>>()?,
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != ts_col && *i != label_col && Some(*i) != id_col)
            .map(|(i, h)| (h.to_string(), i))
            .collect(),
    };

    let mut events = Vec::new();
    for (ordinal, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(ordinal as u64 + 2, |p| p.line());
            EventLogError::Csv { row, column: String::new(), message: e.to_string() }
        })?;
        let row = record.position().map_or(ordinal as u64 + 2, |p| p.line());
        let field = |i: usize, name: &str| {
            record.get(i).ok_or_else(|| EventLogError::Csv {
                row,
                column: name.to_string(),
                message: "missing field".into(),
            })
        };
        let (timestamp, offset) = parse_timestamp(field(ts_col, &columns.timestamp)?, timestamp_format)
            .map_err(|message| EventLogError::Csv { row, column: columns.timestamp.clone(), message })?;
        let label = field(label_col, &columns.label)?.to_string();
        let id = match (id_col, &columns.id) {
            (Some(i), Some(name)) => field(i, name)?.to_string(),
            _ => (ordinal + 1).to_string(),
        };
        let attributes = attr_cols
            .iter()
            .map(|(name, i)| Ok((name.clone(), AttrValue::Text(field(*i, name)?.to_string()))))
            .collect::<Result<_, EventLogError>>()?;
        events.push(Event { id, timestamp, offset, label, attributes });
    }
    check_unique_ids(&events)?;
    Ok(events)
}

/// Writes `id,timestamp,label,<attributes...>`; attribute columns are the
/// union of names in first-seen order.
pub fn write_csv(log: &EventLog) -> Vec<u8> {
    let mut names: Vec<&str> = Vec::new();
    for e in log.events() {
        for (k, _) in &e.attributes {
            if !names.contains(&k.as_str()) {
                names.push(k);
            }
        }
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id", "timestamp", "label"];
    header.extend(&names);
    writer.write_record(&header).expect("write to memory");
    for e in log.events() {
        let mut row = vec![e.id.clone(), format_timestamp(e), e.label.clone()];
        row.extend(names.iter().map(|n| e.attribute(n).map(|v| v.to_string()).unwrap_or_default()));
        writer.write_record(&row).expect("write to memory");
    }
    writer.into_inner().expect("flush to memory")
}
