//! JSON-lines event protocol.
//!
//! One object per line, discriminated by `kind`:
//!
//! ```text
//! {"kind":"add_time_point","values":[1.0,2.0],"ts":5}
//! {"kind":"add_series","id":"s9","values":[...T values...]}
//! {"kind":"remove_time_point","index":0}
//! {"kind":"remove_series","id":"s9"}
//! ```
//!
//! `ts` is optional on every kind.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const KINDS: [&str; 4] = ["add_time_point", "add_series", "remove_time_point", "remove_series"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StreamEvent {
    AddTimePoint {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts: Option<f64>,
    },
    AddSeries {
        id: String,
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts: Option<f64>,
    },
    RemoveTimePoint {
        index: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts: Option<f64>,
    },
    RemoveSeries {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts: Option<f64>,
    },
}

impl StreamEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            StreamEvent::AddTimePoint { .. } => "add_time_point",
            StreamEvent::AddSeries { .. } => "add_series",
            StreamEvent::RemoveTimePoint { .. } => "remove_time_point",
            StreamEvent::RemoveSeries { .. } => "remove_series",
        }
    }

    pub fn event_time(&self) -> Option<f64> {
        match self {
            StreamEvent::AddTimePoint { ts, .. }
            | StreamEvent::AddSeries { ts, .. }
            | StreamEvent::RemoveTimePoint { ts, .. }
            | StreamEvent::RemoveSeries { ts, .. } => *ts,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

/// Parse one JSON line into an event.
pub fn parse_event_jsonl(line: &str) -> Result<StreamEvent> {
    parse_numbered(line, 1)
}

fn parse_numbered(line: &str, lineno: usize) -> Result<StreamEvent> {
    let err = |message: String| Error::Parse { line: lineno, message };
    let value: serde_json::Value = serde_json::from_str(line.trim()).map_err(|e| err(e.to_string()))?;
    let kind = value
        .get("kind")
        .ok_or_else(|| err("missing field \"kind\"".into()))?
        .as_str()
        .ok_or_else(|| err("field \"kind\" must be a string".into()))?;
    if !KINDS.contains(&kind) {
        return Err(err(format!("unknown kind \"{kind}\"")));
    }
    serde_json::from_value(value).map_err(|e| err(e.to_string()))
}

/// Parse every line of a reader; each line produces one event or one error.
pub fn read_events<R: BufRead>(reader: R) -> Vec<Result<StreamEvent>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, line)| match line {
            Ok(l) if l.trim().is_empty() => Err(Error::Parse { line: i + 1, message: "empty line".into() }),
            Ok(l) => parse_numbered(&l, i + 1),
            Err(e) => Err(Error::Parse { line: i + 1, message: e.to_string() }),
        })
        .collect()
}
