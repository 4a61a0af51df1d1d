//! JSON-lines run archive: one line per generated design and one summary per
//! evolution. Evolution 0 holds the initial few-shots.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::queue::{EliteQueue, QueueSlot};
use crate::compiler::Corruption;
use crate::components::DesignRecord;
use crate::control::FitnessReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignLine {
    pub evolution: usize,
    pub slot: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<DesignRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<FitnessReport>,
    /// Screening fitness of the gait search's incumbent per generation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub training_history: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption: Option<Corruption>,
    /// Generator output, kept only when it could not be used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
    /// Offer number in the elite queue; absent for corrupted designs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offer: Option<u64>,
    pub accepted: bool,
    #[serde(default)]
    pub dead_end: bool,
}

impl DesignLine {
    pub fn fitness(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.fitness)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryLine {
    pub evolution: usize,
    /// Best fitness in the queue after this evolution.
    pub best: f64,
    /// Mean fitness of the designs evaluated in this evolution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    pub evaluated: usize,
    pub corrupted: usize,
    pub queue: Vec<QueueSlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TraceLine {
    Design(DesignLine),
    Summary(SummaryLine),
}

#[derive(Debug, Error)]
#[error("trace line {line}: {reason}")]
pub struct TraceError {
    pub line: usize,
    pub reason: String,
}

/// Receives trace lines as they are produced.
pub trait TraceSink {
    fn record(&mut self, line: &TraceLine) -> io::Result<()>;
}

impl TraceSink for Vec<TraceLine> {
    fn record(&mut self, line: &TraceLine) -> io::Result<()> {
        self.push(line.clone());
        Ok(())
    }
}

/// Writes and flushes one JSON object per line.
pub struct JsonLinesSink<W: Write>(pub W);

impl<W: Write> TraceSink for JsonLinesSink<W> {
    fn record(&mut self, line: &TraceLine) -> io::Result<()> {
        serde_json::to_writer(&mut self.0, line)?;
        self.0.write_all(b"\n")?;
        self.0.flush()
    }
}

/// Discards everything.
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _line: &TraceLine) -> io::Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub lines: Vec<TraceLine>,
}

impl EvolutionTrace {
    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| TraceError {
                    line: i + 1,
                    reason: e.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(EvolutionTrace { lines })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(&serde_json::to_string(line).expect("trace lines serialize"));
            out.push('\n');
        }
        out
    }

    pub fn designs(&self) -> impl Iterator<Item = &DesignLine> {
        self.lines.iter().filter_map(|l| match l {
            TraceLine::Design(d) => Some(d),
            _ => None,
        })
    }

    pub fn summaries(&self) -> impl Iterator<Item = &SummaryLine> {
        self.lines.iter().filter_map(|l| match l {
            TraceLine::Summary(s) => Some(s),
            _ => None,
        })
    }

    /// Queue best after each evolution, evolution 0 first.
    pub fn best_series(&self) -> Vec<f64> {
        self.summaries().map(|s| s.best).collect()
    }

    pub fn corrupted_total(&self) -> usize {
        self.summaries().map(|s| s.corrupted).sum()
    }

    /// Lines up to and including the last summary; a partial evolution at
    /// the end is dropped.
    pub fn complete_prefix(&self) -> EvolutionTrace {
        let end = self
            .lines
            .iter()
            .rposition(|l| matches!(l, TraceLine::Summary(_)))
            .map_or(0, |i| i + 1);
        EvolutionTrace {
            lines: self.lines[..end].to_vec(),
        }
    }

    /// The queue obtained by offering every usable design again, in order.
    pub fn replay_queue(&self, k: usize) -> EliteQueue {
        let mut queue = EliteQueue::new(k);
        for d in self.designs() {
            if let (Some(record), Some(report)) = (&d.record, &d.report) {
                queue.maybe_insert(report.fitness, record.clone());
            }
        }
        queue
    }
}
