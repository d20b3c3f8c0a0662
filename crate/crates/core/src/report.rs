//! Emitted artifacts: per-epoch CSV rows and the final result JSON.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::EpochStats;
use crate::tree::{NodeId, ProofPath};

#[derive(Serialize)]
struct CsvRow {
    epoch: usize,
    eps: f64,
    loss: Option<f64>,
    transitions: usize,
    incorrect: usize,
    incomplete: usize,
    complete: usize,
    coverage: usize,
    wall_ms: u64,
}

/// Writes `epoch,eps,loss,transitions,incorrect,incomplete,complete,coverage,wall_ms`.
/// An epoch without training leaves `loss` empty.
pub fn write_stats_csv<W: Write>(rows: &[EpochStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["epoch", "eps", "loss", "transitions", "incorrect", "incomplete", "complete", "coverage", "wall_ms"])
            .map_err(csv_error)?;
    }
    for r in rows {
        w.serialize(CsvRow {
            epoch: r.epoch,
            eps: r.eps,
            loss: r.loss,
            transitions: r.transitions,
            incorrect: r.incorrect,
            incomplete: r.incomplete,
            complete: r.complete,
            coverage: r.coverage,
            wall_ms: r.wall_ms,
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathEntry {
    pub id: NodeId,
    pub step: usize,
    pub rule: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub verdict: String,
    pub path: Vec<PathEntry>,
    pub epochs: usize,
    pub coverage: usize,
    /// Nodes placed in any tree, including those never sent to the backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquired: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backtracks: Option<usize>,
}

impl RunResult {
    pub fn path_entries(path: Option<&ProofPath>) -> Vec<PathEntry> {
        path.map(|p| {
            p.nodes.iter().map(|n| PathEntry { id: n.id, step: n.step, rule: n.rule.clone() }).collect()
        })
        .unwrap_or_default()
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(out)?;
        Ok(())
    }
}
