//! JSON Lines trace files: one recorded node per line.
//!
//! ```text
//! {"id":"743cbe8a","step":1,"rule":"simplify","children":["…"],"flags":{"supporting":true,"complete":false}}
//! ```
//!
//! A child reference names the id of a record one step deeper.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::NodeId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFlags {
    #[serde(default)]
    pub supporting: bool,
    #[serde(default)]
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub id: NodeId,
    pub step: usize,
    pub rule: String,
    #[serde(default)]
    pub children: Vec<NodeId>,
    #[serde(default)]
    pub flags: TraceFlags,
}

pub fn write_trace<W: Write>(records: &[TraceRecord], mut out: W) -> Result<()> {
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a trace, checking each line's id against its rule text.
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceRecord>> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::TraceFormat { line: lineno, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::TraceFormat { line: lineno, message: e.to_string() })?;
        let expected = crate::tree::node_id(&record.rule)
            .map_err(|e| Error::TraceFormat { line: lineno, message: e.to_string() })?;
        if expected != record.id {
            return Err(Error::TraceFormat {
                line: lineno,
                message: format!("id {} does not hash rule {:?} (expected {expected})", record.id, record.rule),
            });
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::TraceFormat { line: 0, message: "trace contains no records".into() });
    }
    Ok(records)
}
