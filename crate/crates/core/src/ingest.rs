//! CSV/JSON ingestion into the time-series model.
//!
//! Load CSV format: header `timestamp,load_kw,temp_c[,voltage_pu]`, ISO-8601
//! local timestamps `YYYY-MM-DDTHH:MM`, rows strictly ascending. Events come
//! from a JSON array of `{date, start, end, delta_v_pct?}` objects; holidays
//! from a newline-separated date list.
//!
//! Gap policy: runs of at most 2 missing samples are linearly interpolated
//! (edge gaps take the nearest value); a day with a longer gap is unusable
//! and skipped.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::{CvrEvent, DayKind, DayRecord, Resolution, Window};

const MAX_GAP_RUN: usize = 2;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("wrong sample count for {date}: got {got}, expected {expected}")]
    WrongSampleCount { date: NaiveDate, got: usize, expected: usize },
    #[error("timestamps not strictly ascending at line {line}")]
    UnsortedTimestamps { line: usize },
    #[error("event references unknown date {0}")]
    UnknownDate(NaiveDate),
    #[error("event window on {0} does not fit within the day")]
    WindowDoesNotFit(NaiveDate),
    #[error("bad event file: {0}")]
    BadEventFile(String),
}

/// A feeder's worth of days plus its CVR events, all at one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub resolution: Resolution,
    pub days: BTreeMap<NaiveDate, DayRecord>,
    pub events: Vec<CvrEvent>,
    pub feeder_id: String,
}

impl Dataset {
    pub fn new(resolution: Resolution, feeder_id: impl Into<String>) -> Self {
        Self { resolution, days: BTreeMap::new(), events: vec![], feeder_id: feeder_id.into() }
    }
}

/// Per-run ingest accounting, used by the row-conservation checks and for
/// CLI reporting.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct IngestStats {
    pub accepted_rows: usize,
    pub interpolated_samples: usize,
    pub rejected_days: Vec<(NaiveDate, String)>,
}

struct RawRow {
    ts: NaiveDateTime,
    load: f64,
    temp: f64,
    volt: Option<f64>,
}

/// Reads a load CSV into a dataset, applying the gap policy per day.
pub fn load_csv(
    path: &Path,
    resolution: Resolution,
    feeder_id: &str,
) -> Result<(Dataset, IngestStats), IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::MalformedRow { line: 1, reason: e.to_string() })?
        .clone();
    let has_voltage = headers.iter().any(|h| h == "voltage_pu");

    let mut rows: Vec<RawRow> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let record =
            record.map_err(|e| IngestError::MalformedRow { line, reason: e.to_string() })?;
        let parse_f = |idx: usize| -> Result<f64, IngestError> {
            record
                .get(idx)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| IngestError::MalformedRow {
                    line,
                    reason: format!("bad numeric field {idx}"),
                })
        };
        let ts = record
            .get(0)
            .and_then(|s| NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%dT%H:%M").ok())
            .ok_or_else(|| IngestError::MalformedRow { line, reason: "bad timestamp".into() })?;
        if ts.minute() % resolution.minutes() != 0 || ts.second() != 0 {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("timestamp off the {}-minute grid", resolution.minutes()),
            });
        }
        if let Some(prev) = rows.last() {
            if ts <= prev.ts {
                if ts == prev.ts {
                    return Err(IngestError::MalformedRow {
                        line,
                        reason: "duplicate timestamp".into(),
                    });
                }
                return Err(IngestError::UnsortedTimestamps { line });
            }
        }
        let volt = if has_voltage { Some(parse_f(3)?) } else { None };
        rows.push(RawRow { ts, load: parse_f(1)?, temp: parse_f(2)?, volt });
    }

    let mut by_date: BTreeMap<NaiveDate, Vec<RawRow>> = BTreeMap::new();
    for row in rows {
        by_date.entry(row.ts.date()).or_default().push(row);
    }

    let n = resolution.samples_per_day();
    let mut dataset = Dataset::new(resolution, feeder_id);
    let mut stats = IngestStats::default();
    for (date, day_rows) in by_date {
        let mut load = vec![f64::NAN; n];
        let mut temp = vec![f64::NAN; n];
        let mut volt = vec![f64::NAN; n];
        for row in &day_rows {
            let idx = resolution.index_of(row.ts.hour(), row.ts.minute());
            load[idx] = row.load;
            temp[idx] = row.temp;
            if let Some(v) = row.volt {
                volt[idx] = v;
            }
        }
        let gaps = longest_gap(&load);
        if gaps > MAX_GAP_RUN {
            stats
                .rejected_days
                .push((date, format!("gap of {gaps} samples exceeds {MAX_GAP_RUN}")));
            continue;
        }
        stats.accepted_rows += day_rows.len();
        stats.interpolated_samples += load.iter().filter(|v| v.is_nan()).count();
        fill_gaps(&mut load);
        fill_gaps(&mut temp);
        let voltage = if has_voltage {
            fill_gaps(&mut volt);
            Some(volt)
        } else {
            None
        };
        let day = DayRecord { date, load, temperature: temp, voltage, kind: DayKind::NonCvr };
        debug_assert_eq!(day.samples(), n);
        dataset.days.insert(date, day);
    }
    Ok((dataset, stats))
}

fn longest_gap(values: &[f64]) -> usize {
    let mut longest = 0;
    let mut run = 0;
    for v in values {
        if v.is_nan() {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    longest
}

/// Linear interpolation over interior NaN runs; edge runs take the nearest
/// known value.
fn fill_gaps(values: &mut [f64]) {
    let n = values.len();
    let mut i = 0;
    while i < n {
        if !values[i].is_nan() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && values[i].is_nan() {
            i += 1;
        }
        let end = i; // exclusive
        let before = start.checked_sub(1).map(|k| values[k]);
        let after = if end < n { Some(values[end]) } else { None };
        match (before, after) {
            (Some(a), Some(b)) => {
                let span = (end - start + 1) as f64;
                for (k, slot) in (start..end).enumerate() {
                    values[slot] = a + (b - a) * (k + 1) as f64 / span;
                }
            }
            (Some(a), None) => values[start..end].fill(a),
            (None, Some(b)) => values[start..end].fill(b),
            (None, None) => values[start..end].fill(0.0),
        }
    }
}

/// Writes a dataset back to the load CSV format. Floats keep full precision
/// so a round trip reproduces sample values exactly.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<(), IngestError> {
    let mut file = std::fs::File::create(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let has_voltage = dataset.days.values().any(|d| d.voltage.is_some());
    let mut out = String::new();
    out.push_str(if has_voltage {
        "timestamp,load_kw,temp_c,voltage_pu\n"
    } else {
        "timestamp,load_kw,temp_c\n"
    });
    let minutes = dataset.resolution.minutes();
    for day in dataset.days.values() {
        for (idx, load) in day.load.iter().enumerate() {
            let total = idx as u32 * minutes;
            out.push_str(&format!(
                "{}T{:02}:{:02},{},{}",
                day.date,
                total / 60,
                total % 60,
                load,
                day.temperature[idx]
            ));
            if has_voltage {
                let v = day.voltage.as_ref().map_or(1.0, |vv| vv[idx]);
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
    }
    file.write_all(out.as_bytes()).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct EventFileEntry {
    date: NaiveDate,
    start: String,
    end: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_v_pct: Option<f64>,
}

fn parse_hhmm(s: &str) -> Option<(u32, u32)> {
    let (h, m) = s.split_once(':')?;
    Some((h.parse().ok()?, m.parse().ok()?))
}

/// Attaches events from a JSON event file. End timestamps are exclusive of
/// the instant but inclusive of the last affected sample: "07:00 to 08:30"
/// at 5-min resolution covers samples 84..=101, so `len = duration / dt`.
pub fn load_events(
    path: &Path,
    dataset: &mut Dataset,
    context_len: usize,
) -> Result<(), IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let entries: Vec<EventFileEntry> =
        serde_json::from_str(&text).map_err(|e| IngestError::BadEventFile(e.to_string()))?;
    let res = dataset.resolution;
    for entry in entries {
        let (sh, sm) = parse_hhmm(&entry.start)
            .ok_or_else(|| IngestError::BadEventFile(format!("bad start time {}", entry.start)))?;
        let (eh, em) = parse_hhmm(&entry.end)
            .ok_or_else(|| IngestError::BadEventFile(format!("bad end time {}", entry.end)))?;
        let start_idx = res.index_of(sh, sm);
        let end_idx = res.index_of(eh, em); // first sample after the event
        if end_idx <= start_idx {
            return Err(IngestError::BadEventFile(format!(
                "event on {} has non-positive duration",
                entry.date
            )));
        }
        let event = CvrEvent {
            date: entry.date,
            cvr_window: Window::new(start_idx, end_idx - start_idx),
            delta_v_pct: entry.delta_v_pct,
            context_len,
        };
        let day = dataset
            .days
            .get_mut(&entry.date)
            .ok_or(IngestError::UnknownDate(entry.date))?;
        if !event.windows_fit(day.samples()) {
            return Err(IngestError::WindowDoesNotFit(entry.date));
        }
        day.kind = DayKind::Cvr;
        dataset.events.push(event);
    }
    Ok(())
}

/// Writes an event list in the JSON format `load_events` reads.
pub fn write_events(dataset: &Dataset, path: &Path) -> Result<(), IngestError> {
    let minutes = dataset.resolution.minutes();
    let entries: Vec<EventFileEntry> = dataset
        .events
        .iter()
        .map(|ev| {
            let s = ev.cvr_window.start as u32 * minutes;
            let e = ev.cvr_window.end() as u32 * minutes;
            EventFileEntry {
                date: ev.date,
                start: format!("{:02}:{:02}", s / 60, s % 60),
                end: format!("{:02}:{:02}", e / 60, e % 60),
                delta_v_pct: ev.delta_v_pct,
            }
        })
        .collect();
    std::fs::write(path, serde_json::to_string_pretty(&entries).expect("serializable"))
        .map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

/// Marks dates from a newline-separated holiday file.
pub fn apply_holidays(path: &Path, dataset: &mut Dataset) -> Result<usize, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut count = 0;
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let date: NaiveDate = trimmed.parse().map_err(|_| IngestError::MalformedRow {
            line: i + 1,
            reason: format!("bad holiday date {trimmed}"),
        })?;
        if let Some(day) = dataset.days.get_mut(&date) {
            day.kind = DayKind::Holiday;
            count += 1;
        }
    }
    Ok(count)
}
