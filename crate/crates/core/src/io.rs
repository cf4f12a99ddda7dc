//! File formats. Instances, schedules, configs and summaries are JSON
//! documents carrying a `format_version` field; traces are JSON Lines with a
//! header record, one record per event and a footer record.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulator::{Trace, TraceEvent, TraceFooter, TraceHeader};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format_version {found} (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("malformed trace: {0}")]
    Trace(String),
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    format_version: u32,
    #[serde(flatten)]
    body: T,
}

fn check_version(found: u32) -> Result<(), IoError> {
    if found == FORMAT_VERSION {
        Ok(())
    } else {
        Err(IoError::Version { found })
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, IoError> {
    let doc = Versioned {
        format_version: FORMAT_VERSION,
        body: value,
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, IoError> {
    let doc: Versioned<T> = serde_json::from_str(text)?;
    check_version(doc.format_version)?;
    Ok(doc.body)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
enum Record {
    Header {
        format_version: u32,
        #[serde(flatten)]
        header: TraceHeader,
    },
    Event(TraceEvent),
    Footer(TraceFooter),
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
enum RecordRef<'a> {
    Header {
        format_version: u32,
        #[serde(flatten)]
        header: &'a TraceHeader,
    },
    Event(&'a TraceEvent),
    Footer(&'a TraceFooter),
}

pub fn write_trace<W: Write>(trace: &Trace, mut out: W) -> Result<(), IoError> {
    let mut line = |r: RecordRef<'_>| -> Result<(), IoError> {
        serde_json::to_writer(&mut out, &r)?;
        out.write_all(b"\n")?;
        Ok(())
    };
    line(RecordRef::Header {
        format_version: FORMAT_VERSION,
        header: &trace.header,
    })?;
    for e in &trace.events {
        line(RecordRef::Event(e))?;
    }
    line(RecordRef::Footer(&trace.footer))?;
    out.flush()?;
    Ok(())
}

pub fn trace_to_string(trace: &Trace) -> Result<String, IoError> {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf)?;
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Trace, IoError> {
    let mut header = None;
    let mut footer = None;
    let mut events = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if footer.is_some() {
            return Err(IoError::Trace(format!(
                "line {}: record after footer",
                k + 1
            )));
        }
        match serde_json::from_str::<Record>(&line)? {
            Record::Header {
                format_version,
                header: h,
            } => {
                check_version(format_version)?;
                if header.replace(h).is_some() {
                    return Err(IoError::Trace(format!("line {}: second header", k + 1)));
                }
            }
            Record::Event(e) if header.is_some() => events.push(e),
            Record::Event(_) => {
                return Err(IoError::Trace(format!(
                    "line {}: event before header",
                    k + 1
                )))
            }
            Record::Footer(f) => footer = Some(f),
        }
    }
    let header = header.ok_or_else(|| IoError::Trace("missing header".into()))?;
    let footer = footer.ok_or_else(|| IoError::Trace("missing footer".into()))?;
    Ok(Trace {
        header,
        events,
        footer,
    })
}
