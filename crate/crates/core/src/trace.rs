//! Per-tick trace records and their CSV / JSON-lines files.

use std::cmp::Ordering;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ControlMode;

/// Fixed CSV column order.
pub const CSV_COLUMNS: [&str; 10] = [
    "time_s",
    "t_abs_c",
    "t_emit_c",
    "t_skin_c",
    "current_a",
    "heat_w",
    "setpoint",
    "mode",
    "saturated",
    "battery_pct",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_s: f64,
    pub t_abs_c: f64,
    pub t_emit_c: f64,
    pub t_skin_c: f64,
    pub current_a: f64,
    /// Absorbed heat flow, W; positive cools the skin.
    pub heat_w: f64,
    /// W in heat-flow mode, degrees C in temperature mode, 0 when off.
    pub setpoint: f64,
    pub mode: ControlMode,
    #[serde(with = "as_digit")]
    pub saturated: bool,
    pub battery_pct: f64,
}

mod as_digit {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(format!(
                "saturated must be 0 or 1, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    #[default]
    Csv,
    Jsonl,
}

impl std::str::FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "jsonl" => Ok(TraceFormat::Jsonl),
            other => Err(format!("unknown trace format `{other}` (csv or jsonl)")),
        }
    }
}

impl TraceFormat {
    /// Guesses from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => TraceFormat::Jsonl,
            _ => TraceFormat::Csv,
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("trace I/O: {0}")]
    Stream(#[from] std::io::Error),
    #[error("missing trace column `{0}`")]
    MissingColumn(&'static str),
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("time goes backwards at row {row}")]
    NonMonotoneTime { row: usize },
    #[error("trace is empty")]
    Empty,
}

pub fn write_csv<W: Write>(out: W, records: &[TraceRecord]) -> Result<(), TraceError> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer.serialize(r).map_err(|e| csv_error(e, 0))?;
    }
    if records.is_empty() {
        writer
            .write_record(CSV_COLUMNS)
            .map_err(|e| csv_error(e, 0))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_jsonl<W: Write>(mut out: W, records: &[TraceRecord]) -> Result<(), TraceError> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| TraceError::Stream(e.into()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(
    out: W,
    records: &[TraceRecord],
    format: TraceFormat,
) -> Result<(), TraceError> {
    match format {
        TraceFormat::Csv => write_csv(out, records),
        TraceFormat::Jsonl => write_jsonl(out, records),
    }
}

pub fn csv_string(records: &[TraceRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

fn csv_error(e: csv::Error, row: usize) -> TraceError {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(row);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => TraceError::Stream(io),
        other => TraceError::BadRow {
            row,
            message: format!("{other:?}"),
        },
    }
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    for col in CSV_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(TraceError::MissingColumn(col));
        }
    }
    let mut out = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        out.push(row.map_err(|e| csv_error(e, i + 2))?);
    }
    check_time(&out)?;
    Ok(out)
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| {
            let message = e.to_string();
            match CSV_COLUMNS
                .iter()
                .find(|c| message.contains(&format!("missing field `{c}`")))
            {
                Some(col) => TraceError::MissingColumn(col),
                None => TraceError::BadRow {
                    row: i + 1,
                    message,
                },
            }
        })?;
        out.push(record);
    }
    check_time(&out)?;
    Ok(out)
}

fn check_time(records: &[TraceRecord]) -> Result<(), TraceError> {
    for (i, pair) in records.windows(2).enumerate() {
        if pair[1].time_s.partial_cmp(&pair[0].time_s) != Some(Ordering::Greater) {
            return Err(TraceError::NonMonotoneTime { row: i + 2 });
        }
    }
    Ok(())
}

pub fn read_trace_file(path: &Path) -> Result<Vec<TraceRecord>, TraceError> {
    let file = std::fs::File::open(path).map_err(|source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    match TraceFormat::from_path(path) {
        TraceFormat::Csv => read_csv(reader),
        TraceFormat::Jsonl => read_jsonl(reader),
    }
}

pub fn write_trace_file(
    path: &Path,
    records: &[TraceRecord],
    format: TraceFormat,
) -> Result<(), TraceError> {
    let file = std::fs::File::create(path).map_err(|source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_trace(std::io::BufWriter::new(file), records, format)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> Vec<TraceRecord> {
        (0..n)
            .map(|i| TraceRecord {
                time_s: (i + 1) as f64 * 0.01,
                t_abs_c: 31.0 + i as f64 * 0.1,
                t_emit_c: 29.5,
                t_skin_c: 31.2,
                current_a: -0.301_176_470_588_235_3,
                heat_w: -2.0,
                setpoint: -2.0,
                mode: ControlMode::HeatFlow,
                saturated: i % 2 == 1,
                battery_pct: 99.987,
            })
            .collect()
    }

    #[test]
    fn csv_header_is_fixed() {
        let text = csv_string(&sample(1));
        assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
        assert!(text.lines().nth(1).unwrap().contains(",heat_flow,0,"));
        assert_eq!(csv_string(&[]).trim(), CSV_COLUMNS.join(","));
    }

    #[test]
    fn csv_and_jsonl_round_trip_exactly() {
        let records = sample(20);
        assert_eq!(read_csv(csv_string(&records).as_bytes()).unwrap(), records);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &records).unwrap();
        assert_eq!(read_jsonl(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn missing_column_rejected() {
        let text = "time_s,t_abs_c\n0.01,31\n";
        assert!(matches!(
            read_csv(text.as_bytes()),
            Err(TraceError::MissingColumn("t_emit_c"))
        ));
        let line = r#"{"time_s":0.01}"#;
        assert!(matches!(
            read_jsonl(line.as_bytes()),
            Err(TraceError::MissingColumn(_))
        ));
    }

    #[test]
    fn non_monotone_time_rejected() {
        let mut records = sample(3);
        records[2].time_s = records[1].time_s;
        let text = csv_string(&records);
        assert!(matches!(
            read_csv(text.as_bytes()),
            Err(TraceError::NonMonotoneTime { row: 3 })
        ));
    }

    #[test]
    fn malformed_value_reports_row() {
        let mut text = csv_string(&sample(2));
        text = text.replace(",heat_flow,1,", ",heat_flow,7,");
        assert!(matches!(
            read_csv(text.as_bytes()),
            Err(TraceError::BadRow { .. })
        ));
    }
}
