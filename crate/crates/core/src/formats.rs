//! Readers and writers for the exchange formats.
//!
//! RTTM carries diarization output, one `SPEAKER` record per line:
//!
//! ```text
//! SPEAKER <session> <channel> <start> <duration> <NA> <NA> <speaker> <NA> <NA>
//! ```
//!
//! The segment-list ("SegLST") format is a JSON array of flat records with
//! the keys `session_id`, `speaker`, `start_time`, `end_time` and `words`.
//! UEM files list scored regions as `<session> <channel> <start> <end>`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::segment::{Interval, Segment, SegmentList};

const RTTM_MIN_FIELDS: usize = 9;

fn is_comment(line: &str) -> bool {
    line.starts_with('#') || line.starts_with(";;")
}

fn parse_time(raw: &str, line: usize, field: usize) -> Result<f64> {
    let value: f64 = raw.parse().map_err(|_| Error::Rttm {
        line,
        field,
        message: format!("`{raw}` is not a number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Rttm {
            line,
            field,
            message: format!("`{raw}` is not finite"),
        });
    }
    Ok(value)
}

/// Parses RTTM text. Line numbers in errors are 1-based, as are field numbers.
pub fn parse_rttm(text: &str) -> Result<SegmentList> {
    let mut segments = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || is_comment(line) {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < RTTM_MIN_FIELDS {
            return Err(Error::Rttm {
                line: line_no,
                field: fields.len() + 1,
                message: format!(
                    "expected at least {RTTM_MIN_FIELDS} fields, found {}",
                    fields.len()
                ),
            });
        }
        if fields[0] != "SPEAKER" {
            return Err(Error::Rttm {
                line: line_no,
                field: 1,
                message: format!("expected record type SPEAKER, found `{}`", fields[0]),
            });
        }
        let start = parse_time(fields[3], line_no, 4)?;
        let duration = parse_time(fields[4], line_no, 5)?;
        if start < 0.0 {
            return Err(Error::Rttm {
                line: line_no,
                field: 4,
                message: format!("negative start time {start}"),
            });
        }
        if duration <= 0.0 {
            return Err(Error::Rttm {
                line: line_no,
                field: 5,
                message: format!("duration must be positive, got {duration}"),
            });
        }
        let end = start + duration;
        if end <= start {
            return Err(Error::Rttm {
                line: line_no,
                field: 5,
                message: format!("duration {duration} vanishes at start {start}"),
            });
        }
        segments.push(Segment {
            session_id: fields[1].to_string(),
            speaker: fields[7].to_string(),
            start,
            end,
            words: None,
        });
    }
    Ok(SegmentList::new(segments))
}

/// Millisecond-exact times are written with three decimals; anything finer
/// falls back to the shortest representation that round-trips.
fn format_time(t: f64) -> String {
    let ms = (t * 1000.0).round() / 1000.0;
    if (ms - t).abs() <= 1e-9 {
        format!("{t:.3}")
    } else {
        format!("{t}")
    }
}

pub fn serialize_rttm(segs: &SegmentList) -> String {
    let mut out = String::new();
    for seg in segs {
        let _ = writeln!(
            out,
            "SPEAKER {} 1 {} {} <NA> <NA> {} <NA> <NA>",
            seg.session_id,
            format_time(seg.start),
            format_time(seg.end - seg.start),
            seg.speaker
        );
    }
    out
}

fn seglst_err(record: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Seglst {
        record,
        key: key.to_string(),
        message: message.into(),
    }
}

fn seglst_label(obj: &serde_json::Map<String, Value>, record: usize, key: &str) -> Result<String> {
    match obj.get(key) {
        None => Err(seglst_err(record, key, "missing")),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(other) => Err(seglst_err(
            record,
            key,
            format!("expected a string, found {other}"),
        )),
    }
}

fn seglst_time(obj: &serde_json::Map<String, Value>, record: usize, key: &str) -> Result<f64> {
    let value = match obj.get(key) {
        None => return Err(seglst_err(record, key, "missing")),
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) => s.trim().parse::<f64>().ok(),
        Some(_) => None,
    };
    match value {
        Some(v) if v.is_finite() => Ok(v),
        _ => Err(seglst_err(record, key, "not a finite number")),
    }
}

/// Parses a segment-list document. Record indices in errors are 0-based.
pub fn parse_seglst(text: &str) -> Result<SegmentList> {
    if text.trim().is_empty() {
        return Ok(SegmentList::default());
    }
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::SeglstDocument(e.to_string()))?;
    let records = doc
        .as_array()
        .ok_or_else(|| Error::SeglstDocument("top level must be an array of records".into()))?;
    let mut segments = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let obj = rec
            .as_object()
            .ok_or_else(|| seglst_err(i, "", "record is not an object"))?;
        let session_id = seglst_label(obj, i, "session_id")?;
        let speaker = seglst_label(obj, i, "speaker")?;
        let start = seglst_time(obj, i, "start_time")?;
        let end = seglst_time(obj, i, "end_time")?;
        let words = match obj.get("words") {
            None => return Err(seglst_err(i, "words", "missing")),
            Some(Value::String(s)) => s.clone(),
            Some(other) => {
                return Err(seglst_err(
                    i,
                    "words",
                    format!("expected a string, found {other}"),
                ))
            }
        };
        if start < 0.0 {
            return Err(seglst_err(
                i,
                "start_time",
                format!("negative time {start}"),
            ));
        }
        if end <= start {
            return Err(seglst_err(
                i,
                "end_time",
                format!("end {end} is not after start {start}"),
            ));
        }
        segments.push(Segment {
            session_id,
            speaker,
            start,
            end,
            words: Some(words),
        });
    }
    Ok(SegmentList::new(segments))
}

#[derive(Serialize)]
struct SeglstRecord<'a> {
    session_id: &'a str,
    speaker: &'a str,
    start_time: f64,
    end_time: f64,
    words: &'a str,
}

/// Writes a segment-list document. Segments without words are written with
/// an empty transcript.
pub fn serialize_seglst(segs: &SegmentList) -> String {
    let records: Vec<SeglstRecord<'_>> = segs
        .iter()
        .map(|s| SeglstRecord {
            session_id: &s.session_id,
            speaker: &s.speaker,
            start_time: s.start,
            end_time: s.end,
            words: s.words.as_deref().unwrap_or(""),
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&records).expect("records serialize");
    out.push('\n');
    out
}

/// Parses a UEM file into sorted scored regions per session.
pub fn parse_uem(text: &str) -> Result<BTreeMap<String, Vec<Interval>>> {
    let mut out: BTreeMap<String, Vec<Interval>> = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || is_comment(line) {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(Error::Uem {
                line: idx + 1,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let parse = |raw: &str| -> Result<f64> {
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Uem {
                    line: idx + 1,
                    message: format!("`{raw}` is not a finite number"),
                })
        };
        let start = parse(fields[2])?;
        let end = parse(fields[3])?;
        if end < start {
            return Err(Error::Uem {
                line: idx + 1,
                message: format!("end {end} precedes start {start}"),
            });
        }
        out.entry(fields[0].to_string())
            .or_default()
            .push(Interval::new(start, end));
    }
    for regions in out.values_mut() {
        regions.sort_by(|a, b| a.start.total_cmp(&b.start));
    }
    Ok(out)
}
