use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Evaluation, OptimizerConfig};
use crate::error::{Error, Result};
use crate::genome::{KernelGenome, SearchSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub seed: u64,
    pub space: SearchSpace,
    pub config: OptimizerConfig,
}

impl TraceHeader {
    pub fn new(config: OptimizerConfig, space: SearchSpace, seed: u64) -> Self {
        Self { seed, space, config }
    }
}

/// One evaluation. `index` is the logical time of the evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub index: usize,
    pub flat: Vec<u32>,
    pub cost: f64,
    pub criteria: BTreeMap<String, f64>,
    /// Value came from a cache filled by an earlier run.
    pub cached: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub index: usize,
    pub flat: Vec<u32>,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub header: TraceHeader,
    pub evaluations: Vec<TraceRecord>,
    pub best: Option<BestRecord>,
    /// Incumbent cost after each committed step (greedy only).
    pub committed: Vec<f64>,
    pub notes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Line {
    Header(TraceHeader),
    Evaluation(TraceRecord),
    Summary {
        best: Option<BestRecord>,
        committed: Vec<f64>,
        notes: Vec<String>,
    },
}

impl OptimizationTrace {
    pub fn new(header: TraceHeader) -> Self {
        Self {
            header,
            evaluations: Vec::new(),
            best: None,
            committed: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, flat: Vec<u32>, eval: &Evaluation, cached: bool) {
        let index = self.evaluations.len();
        if self.best.as_ref().is_none_or(|b| eval.cost < b.cost) {
            self.best = Some(BestRecord {
                index,
                flat: flat.clone(),
                cost: eval.cost,
            });
        }
        self.evaluations.push(TraceRecord {
            index,
            flat,
            cost: eval.cost,
            criteria: eval.reports.iter().map(|r| (r.name.clone(), r.value)).collect(),
            cached,
        });
    }

    pub fn best_cost(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.cost)
    }

    pub fn best_genome(&self) -> Result<Option<KernelGenome>> {
        self.best
            .as_ref()
            .map(|b| KernelGenome::decode_flat(&b.flat, &self.header.space))
            .transpose()
    }

    /// Header line, one line per evaluation, then a summary line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = |l: &Line| -> Result<()> {
            let text = serde_json::to_string(l).map_err(|e| Error::Data(e.to_string()))?;
            writeln!(w, "{text}").map_err(|e| Error::Data(e.to_string()))
        };
        line(&Line::Header(self.header.clone()))?;
        for r in &self.evaluations {
            line(&Line::Evaluation(r.clone()))?;
        }
        line(&Line::Summary {
            best: self.best.clone(),
            committed: self.committed.clone(),
            notes: self.notes.clone(),
        })
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// Reads a trace written by [`OptimizationTrace::write_jsonl`]. A missing
/// summary line (interrupted run) is tolerated; `best` is then recomputed.
pub fn read_trace_jsonl(path: &Path) -> Result<OptimizationTrace> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut trace: Option<OptimizationTrace> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let parsed: Line = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        match (parsed, trace.as_mut()) {
            (Line::Header(h), None) => trace = Some(OptimizationTrace::new(h)),
            (Line::Evaluation(r), Some(t)) => {
                if r.index != t.evaluations.len() {
                    return Err(parse_err(format!("expected index {}, found {}", t.evaluations.len(), r.index)));
                }
                let eval = Evaluation::scalar(r.cost);
                let criteria = r.criteria.clone();
                t.push(r.flat, &eval, r.cached);
                t.evaluations.last_mut().expect("just pushed").criteria = criteria;
            }
            (Line::Summary { committed, notes, .. }, Some(t)) => {
                t.committed = committed;
                t.notes = notes;
            }
            (_, _) => return Err(parse_err("unexpected line".into())),
        }
    }
    let trace = trace.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: "empty trace".into(),
    })?;
    Ok(trace)
}
