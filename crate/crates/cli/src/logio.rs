use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveTime;
use clap::{Args, ValueEnum};
use labelrefine::eventlog::{
    parse_csv, parse_xes, partition, write_csv, write_xes, CsvColumns, EventLog, PartitionSpec,
};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogFormat {
    Csv,
    Xes,
}

impl LogFormat {
    pub fn of_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("xes") => LogFormat::Xes,
            _ => LogFormat::Csv,
        }
    }
}

/// Where the log comes from and how CSV rows become traces.
#[derive(Debug, Clone, Args)]
pub struct LogArgs {
    /// Input log (.csv or .xes)
    pub input: PathBuf,
    /// Override format detection by extension
    #[arg(long, value_enum)]
    pub input_format: Option<LogFormat>,
    /// CSV column with event ids; defaults to "id" when present, else row ordinals
    #[arg(long)]
    pub id_column: Option<String>,
    #[arg(long, default_value = "timestamp")]
    pub timestamp_column: String,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// chrono format string for CSV timestamps; ISO-8601 when omitted
    #[arg(long)]
    pub time_format: Option<String>,
    /// CSV attribute(s) identifying a case, combined with the day
    #[arg(long = "case-key")]
    pub case_keys: Vec<String>,
    /// Time of day at which a new trace starts (HH:MM)
    #[arg(long, default_value = "00:00", value_parser = parse_boundary)]
    pub day_boundary: NaiveTime,
}

fn parse_boundary(s: &str) -> Result<NaiveTime, String> {
    NaiveTime::parse_from_str(s, "%H:%M").map_err(|e| format!("expected HH:MM: {e}"))
}

impl LogArgs {
    pub fn format(&self) -> LogFormat {
        self.input_format.unwrap_or_else(|| LogFormat::of_path(&self.input))
    }

    pub fn read(&self) -> Result<EventLog, CliError> {
        let bytes = fs::read(&self.input)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", self.input.display())))?;
        let log = match self.format() {
            LogFormat::Xes => parse_xes(&bytes)?,
            LogFormat::Csv => {
                let id =
                    self.id_column.clone().or_else(|| has_column(&bytes, "id").then(|| "id".to_string()));
                let cols = CsvColumns {
                    id,
                    timestamp: self.timestamp_column.clone(),
                    label: self.label_column.clone(),
                    attributes: None,
                };
                let events = parse_csv(&bytes, &cols, self.time_format.as_deref())?;
                let spec = PartitionSpec {
                    key_attributes: self.case_keys.clone(),
                    by_day: true,
                    day_boundary: self.day_boundary,
                };
                partition(events, &spec)?
            }
        };
        Ok(log)
    }
}

fn has_column(bytes: &[u8], name: &str) -> bool {
    csv::Reader::from_reader(bytes).headers().map(|h| h.iter().any(|c| c == name)).unwrap_or(false)
}

pub fn write_log(log: &EventLog, path: &Path, format: LogFormat) -> Result<(), CliError> {
    let bytes = match format {
        LogFormat::Csv => write_csv(log),
        LogFormat::Xes => write_xes(log),
    };
    write_file(path, &bytes)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}
