//! Line-delimited trace persistence.
//!
//! A trace file holds one JSON record per line: a header with the run
//! coordinates and the full solver configuration (including the per-run
//! sketch seed, so the run can be replayed), one line per iteration, and a
//! footer with the final state and a record count for integrity. Floats use
//! the shortest round-tripping representation and parse back exactly, so
//! rewriting an unchanged run produces a byte-identical file and profiles
//! recomputed from disk match in-memory values bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::solver::{IterationRecord, RunTrace, SolverConfig, Termination};

use super::HarnessError;

pub const TRACE_SCHEMA: &str = "rsopt-trace/1";

/// Run coordinates stored alongside the solver trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    /// Solver-grid entry identifier.
    pub solver: String,
    /// Seed index within the experiment (not the derived sketch seed).
    pub seed: u32,
    /// Whether the problem's optimum is known to attain `f = 0`.
    pub zero_residual: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TraceLine {
    Header {
        schema: String,
        solver: String,
        seed: u32,
        zero_residual: bool,
        problem: String,
        dim: usize,
        f0: f64,
        config: Box<SolverConfig>,
    },
    Iteration {
        #[serde(flatten)]
        record: IterationRecord,
    },
    Footer {
        termination: Termination,
        final_value: f64,
        final_gradient_norm: Option<f64>,
        final_point: Vec<f64>,
        total_actions: u64,
        records: usize,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.to_path_buf(), source }
}

fn format_err(path: &Path, message: impl Into<String>) -> HarnessError {
    HarnessError::Trace { path: path.to_path_buf(), message: message.into() }
}

/// Writes `trace` to `path`, overwriting any existing file. `config` must be
/// the configuration the run executed with (its variant and sketch are the
/// trace's own).
pub fn write_trace(
    path: &Path,
    meta: &TraceMeta,
    config: &SolverConfig,
    trace: &RunTrace,
) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let mut emit = |line: &TraceLine| -> Result<(), HarnessError> {
        let json = serde_json::to_string(line)
            .map_err(|e| format_err(path, format!("serialization failed: {e}")))?;
        writeln!(out, "{json}").map_err(|e| io_err(path, e))
    };
    emit(&TraceLine::Header {
        schema: TRACE_SCHEMA.to_string(),
        solver: meta.solver.clone(),
        seed: meta.seed,
        zero_residual: meta.zero_residual,
        problem: trace.problem.clone(),
        dim: trace.dim,
        f0: trace.f0,
        config: Box::new(config.clone()),
    })?;
    for record in &trace.records {
        emit(&TraceLine::Iteration { record: record.clone() })?;
    }
    emit(&TraceLine::Footer {
        termination: trace.termination,
        final_value: trace.final_value,
        final_gradient_norm: trace.final_gradient_norm,
        final_point: trace.final_point.clone(),
        total_actions: trace.total_actions,
        records: trace.records.len(),
    })?;
    out.flush().map_err(|e| io_err(path, e))
}

/// Reads a trace file back into its meta, solver configuration, and payload.
pub fn read_trace(path: &Path) -> Result<(TraceMeta, SolverConfig, RunTrace), HarnessError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let parse = |line: std::io::Result<String>| -> Result<TraceLine, HarnessError> {
        let line = line.map_err(|e| io_err(path, e))?;
        serde_json::from_str(&line).map_err(|e| format_err(path, format!("bad record: {e}")))
    };
    let first = lines
        .next()
        .ok_or_else(|| format_err(path, "empty trace file"))
        .and_then(parse)?;
    let (meta, problem, dim, f0, config) = match first {
        TraceLine::Header { schema, solver, seed, zero_residual, problem, dim, f0, config } => {
            if schema != TRACE_SCHEMA {
                return Err(format_err(path, format!("unsupported schema {schema}")));
            }
            (TraceMeta { solver, seed, zero_residual }, problem, dim, f0, *config)
        }
        _ => return Err(format_err(path, "first record is not a header")),
    };
    let mut records = Vec::new();
    let mut footer = None;
    for line in lines {
        if footer.is_some() {
            return Err(format_err(path, "records after footer"));
        }
        match parse(line)? {
            TraceLine::Header { .. } => return Err(format_err(path, "duplicate header")),
            TraceLine::Iteration { record } => records.push(record),
            line @ TraceLine::Footer { .. } => footer = Some(line),
        }
    }
    let Some(TraceLine::Footer {
        termination,
        final_value,
        final_gradient_norm,
        final_point,
        total_actions,
        records: expected,
    }) = footer
    else {
        return Err(format_err(path, "missing footer"));
    };
    if expected != records.len() {
        return Err(format_err(
            path,
            format!("footer expects {expected} records, found {}", records.len()),
        ));
    }
    let trace = RunTrace {
        problem,
        variant: config.variant,
        sketch: config.sketch,
        dim,
        f0,
        final_value,
        final_point,
        final_gradient_norm,
        termination,
        total_actions,
        records,
    };
    Ok((meta, config, trace))
}
