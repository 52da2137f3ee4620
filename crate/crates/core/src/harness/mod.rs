//! Experiment configuration, parallel benchmark execution, and persistence.
//!
//! An [`ExperimentConfig`] names a problem set and a solver grid. Running it
//! executes every `(problem, solver, seed)` cell in parallel, writes one
//! trace file per cell plus an index, and is deterministic: each cell's
//! sketch seed is a hash of its coordinates, so a rerun reproduces every
//! trace byte for byte. Profiles are recomputed from the persisted traces,
//! never from transient state.

pub mod check;
pub mod profile;
pub mod trace;

pub use check::check_run;
pub use profile::{
    compute_profiles, emit_plot_data, read_profile_data, DataProfile, ProfileEntry,
    PROFILE_SCHEMA,
};
pub use trace::{read_trace, write_trace, TraceMeta, TRACE_SCHEMA};

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nls::suite;
use crate::sketch::{SketchKind, SketchSpec};
use crate::solver::{run, AdaptiveConfig, SolverConfig, SolverError, Stopping, Termination, Variant};

pub const INDEX_SCHEMA: &str = "rsopt-index/1";
pub const INDEX_FILE: &str = "index.jsonl";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error in {path}: {message}")]
    Trace { path: PathBuf, message: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl HarnessError {
    /// Process exit code: 1 for configuration errors, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}

fn default_seeds() -> u32 {
    1
}
fn default_tau() -> f64 {
    0.1
}
fn default_budget_multiplier() -> f64 {
    50.0
}
fn default_grad_tol() -> f64 {
    1e-10
}
fn default_l_fraction() -> f64 {
    1.0
}

/// A full experiment: problems, a solver grid, seeds, and accuracy/budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    /// Runs per (problem, solver) cell, seeded `0..seeds`.
    #[serde(default = "default_seeds")]
    pub seeds: u32,
    /// Solve-test accuracy in (0, 1).
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Action budget per run as a multiple of the problem dimension.
    #[serde(default = "default_budget_multiplier")]
    pub budget_multiplier: f64,
    /// Monitor-gradient stopping tolerance applied to every run (0 disables).
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    pub problems: Vec<ProblemEntry>,
    pub solvers: Vec<SolverEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemEntry {
    pub name: String,
    pub dim: usize,
}

/// One solver-grid entry; optional fields fall back to solver defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverEntry {
    /// Unique identifier; defaults to `{variant}_{ensemble}_l{l_fraction}`.
    #[serde(default)]
    pub id: Option<String>,
    pub variant: Variant,
    /// Sketch kind name as accepted by [`SketchKind::parse`].
    pub ensemble: String,
    /// Subspace size as a fraction of the dimension (identity ignores it).
    #[serde(default = "default_l_fraction")]
    pub l_fraction: f64,
    /// Nonzeros per column for the s-hashing ensemble.
    #[serde(default)]
    pub s: Option<usize>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub gamma1: Option<f64>,
    #[serde(default)]
    pub c: Option<u32>,
    #[serde(default)]
    pub p: Option<u32>,
    #[serde(default)]
    pub alpha_max: Option<f64>,
    #[serde(default)]
    pub kappa_t: Option<f64>,
    #[serde(default)]
    pub adaptive: Option<AdaptiveEntry>,
}

/// Subspace growth policy, sized relative to the problem dimension.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveEntry {
    /// Model-quality target in (0, 1); smaller demands more decrease.
    pub kappa: f64,
    /// Dimensions added per growth step, as a fraction of the dimension.
    pub increment_fraction: f64,
    /// Cap on the grown subspace, as a fraction of the dimension.
    #[serde(default)]
    pub l_max_fraction: Option<f64>,
}

impl SolverEntry {
    pub fn resolved_id(&self) -> String {
        self.id
            .clone()
            .unwrap_or_else(|| format!("{}_{}_l{}", self.variant, self.ensemble, self.l_fraction))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads and parses a config file; any failure is a configuration error.
    pub fn from_toml_file(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let config_err = |msg: String| Err(HarnessError::Config(msg));
        if self.seeds == 0 {
            return config_err("seeds must be at least 1".into());
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return config_err(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if !(self.budget_multiplier > 0.0 && self.budget_multiplier.is_finite()) {
            return config_err(format!(
                "budget_multiplier must be positive, got {}",
                self.budget_multiplier
            ));
        }
        if !(self.grad_tol >= 0.0 && self.grad_tol.is_finite()) {
            return config_err(format!("grad_tol must be nonnegative, got {}", self.grad_tol));
        }
        if self.problems.is_empty() {
            return config_err("at least one problem is required".into());
        }
        if self.solvers.is_empty() {
            return config_err("at least one solver is required".into());
        }
        for problem in &self.problems {
            suite::by_name(&problem.name, problem.dim)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        let mut ids = Vec::new();
        for entry in &self.solvers {
            let id = entry.resolved_id();
            if id.is_empty()
                || !id.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c))
            {
                return config_err(format!(
                    "solver id {id:?} must be nonempty and use only [A-Za-z0-9._-]"
                ));
            }
            if ids.contains(&id) {
                return config_err(format!("duplicate solver id {id:?}"));
            }
            ids.push(id);
            for problem in &self.problems {
                solver_config(entry, problem.dim, self)?;
            }
        }
        Ok(())
    }
}

/// Deterministic per-run sketch seed: FNV-1a over the cell coordinates.
fn run_seed(problem: &str, dim: usize, solver: &str, seed: u32) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in format!("{problem}/{dim}/{solver}/{seed}").bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Builds the per-run solver configuration for a grid entry at dimension
/// `dim`. The sketch seed is filled in per run.
fn solver_config(
    entry: &SolverEntry,
    dim: usize,
    experiment: &ExperimentConfig,
) -> Result<SolverConfig, HarnessError> {
    let config_err = |msg: String| HarnessError::Config(msg);
    let kind =
        SketchKind::parse(&entry.ensemble).map_err(|e| config_err(e.to_string()))?;
    if !(entry.l_fraction > 0.0 && entry.l_fraction <= 1.0) {
        return Err(config_err(format!(
            "l_fraction must lie in (0, 1], got {}",
            entry.l_fraction
        )));
    }
    let l = if kind == SketchKind::Identity {
        dim
    } else {
        ((entry.l_fraction * dim as f64).round() as usize).clamp(1, dim)
    };
    let mut sketch = SketchSpec::new(kind, l, dim);
    sketch.s = match entry.s {
        Some(s) if s >= 1 && s <= l => s,
        Some(s) => {
            return Err(config_err(format!(
                "s = {s} must lie in [1, l] with l = {l} at dimension {dim}"
            )))
        }
        None => 3.min(l),
    };
    let mut config = SolverConfig::new(entry.variant, sketch);
    if let Some(theta) = entry.theta {
        config.theta = theta;
    }
    if let Some(gamma1) = entry.gamma1 {
        config.gamma1 = gamma1;
    }
    if let Some(c) = entry.c {
        config.c = c;
    }
    if let Some(p) = entry.p {
        config.p = p;
    }
    if let Some(alpha_max) = entry.alpha_max {
        config.alpha_max = alpha_max;
    }
    if let Some(kappa_t) = entry.kappa_t {
        config.kappa_t = kappa_t;
    }
    let budget = (experiment.budget_multiplier * dim as f64).ceil() as u64;
    config.stopping = Stopping {
        grad_tol: experiment.grad_tol,
        target_value: None,
        // Every iteration consumes at least one action, so the budget always
        // binds first.
        max_iters: budget as usize + 1,
        action_budget: Some(budget),
    };
    if let Some(adaptive) = entry.adaptive {
        if !(adaptive.kappa > 0.0 && adaptive.kappa < 1.0) {
            return Err(config_err(format!(
                "adaptive.kappa must lie in (0, 1), got {}",
                adaptive.kappa
            )));
        }
        if !(adaptive.increment_fraction > 0.0 && adaptive.increment_fraction <= 1.0) {
            return Err(config_err(format!(
                "adaptive.increment_fraction must lie in (0, 1], got {}",
                adaptive.increment_fraction
            )));
        }
        let l_max = match adaptive.l_max_fraction {
            Some(fraction) if fraction > 0.0 && fraction <= 1.0 => {
                Some(((fraction * dim as f64).round() as usize).clamp(l, dim))
            }
            Some(fraction) => {
                return Err(config_err(format!(
                    "adaptive.l_max_fraction must lie in (0, 1], got {fraction}"
                )))
            }
            None => None,
        };
        config.adaptive = Some(AdaptiveConfig {
            kappa: adaptive.kappa,
            l_increment: ((adaptive.increment_fraction * dim as f64).round() as usize).max(1),
            l_max,
        });
    }
    config.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(config)
}

/// One row of the experiment index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub dim: usize,
    pub solver: String,
    pub seed: u32,
    /// Trace file path relative to the output directory.
    pub trace_file: String,
    pub termination: Termination,
    pub f0: f64,
    pub final_value: f64,
    pub total_actions: u64,
    pub iterations: usize,
    /// Wall-clock seconds; excluded from all determinism guarantees.
    pub wall_time_s: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum IndexLine {
    Header { schema: String, seeds: u32, tau: f64, budget_multiplier: f64 },
    Run {
        #[serde(flatten)]
        summary: RunSummary,
    },
}

/// Executes every cell of the experiment grid and persists traces plus an
/// index under `config.output_dir`. Returns the index rows in grid order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunSummary>, HarnessError> {
    config.validate()?;
    let traces_dir = config.output_dir.join("traces");
    fs::create_dir_all(&traces_dir)
        .map_err(|e| HarnessError::Io { path: traces_dir.clone(), source: e })?;
    let mut tasks = Vec::new();
    for problem in &config.problems {
        for solver in &config.solvers {
            for seed in 0..config.seeds {
                tasks.push((problem, solver, seed));
            }
        }
    }
    let summaries: Result<Vec<RunSummary>, HarnessError> = tasks
        .par_iter()
        .map(|(problem, solver, seed)| execute_run(config, problem, solver, *seed, &traces_dir))
        .collect();
    let summaries = summaries?;
    write_index(config, &summaries)?;
    Ok(summaries)
}

fn execute_run(
    config: &ExperimentConfig,
    entry: &ProblemEntry,
    solver: &SolverEntry,
    seed: u32,
    traces_dir: &Path,
) -> Result<RunSummary, HarnessError> {
    let problem = suite::by_name(&entry.name, entry.dim)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let id = solver.resolved_id();
    let mut solver_cfg = solver_config(solver, problem.dim(), config)?;
    solver_cfg.sketch.seed = run_seed(&entry.name, problem.dim(), &id, seed);
    let started = Instant::now();
    let trace = run(&problem, &solver_cfg)?;
    let wall_time_s = started.elapsed().as_secs_f64();
    let file_name = format!("{}_d{}_{}_seed{}.jsonl", entry.name, problem.dim(), id, seed);
    let meta = TraceMeta { solver: id.clone(), seed, zero_residual: problem.is_zero_residual() };
    write_trace(&traces_dir.join(&file_name), &meta, &solver_cfg, &trace)?;
    Ok(RunSummary {
        problem: entry.name.clone(),
        dim: problem.dim(),
        solver: id,
        seed,
        trace_file: format!("traces/{file_name}"),
        termination: trace.termination,
        f0: trace.f0,
        final_value: trace.final_value,
        total_actions: trace.total_actions,
        iterations: trace.records.len(),
        wall_time_s,
    })
}

fn write_index(config: &ExperimentConfig, summaries: &[RunSummary]) -> Result<(), HarnessError> {
    let path = config.output_dir.join(INDEX_FILE);
    let file = fs::File::create(&path)
        .map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
    let mut out = BufWriter::new(file);
    let mut emit = |line: &IndexLine| -> Result<(), HarnessError> {
        let json = serde_json::to_string(line)
            .map_err(|e| HarnessError::Trace { path: path.clone(), message: e.to_string() })?;
        writeln!(out, "{json}").map_err(|e| HarnessError::Io { path: path.clone(), source: e })
    };
    emit(&IndexLine::Header {
        schema: INDEX_SCHEMA.to_string(),
        seeds: config.seeds,
        tau: config.tau,
        budget_multiplier: config.budget_multiplier,
    })?;
    for summary in summaries {
        emit(&IndexLine::Run { summary: summary.clone() })?;
    }
    out.flush().map_err(|e| HarnessError::Io { path, source: e })
}

/// A persisted run loaded back into memory.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub meta: TraceMeta,
    /// The exact configuration the run executed with, including its derived
    /// sketch seed.
    pub config: SolverConfig,
    pub trace: crate::solver::RunTrace,
}

/// The readable part of a persisted experiment.
#[derive(Debug)]
pub struct LoadedRuns {
    pub runs: Vec<LoadedRun>,
    /// Trace files named by the index but missing or unreadable.
    pub missing: Vec<String>,
    pub seeds: u32,
    pub tau: f64,
    pub budget_multiplier: f64,
}

/// Loads an experiment's index and traces. Unreadable traces are reported in
/// `missing` rather than failing the load, so profiles can still be computed
/// over the available runs.
pub fn load_runs(output_dir: &Path) -> Result<LoadedRuns, HarnessError> {
    let path = output_dir.join(INDEX_FILE);
    let file = fs::File::open(&path)
        .map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
    let mut lines = BufReader::new(file).lines();
    let parse = |line: std::io::Result<String>| -> Result<IndexLine, HarnessError> {
        let line = line.map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
        serde_json::from_str(&line)
            .map_err(|e| HarnessError::Trace { path: path.clone(), message: e.to_string() })
    };
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Trace { path: path.clone(), message: "empty index".into() })
        .and_then(parse)?;
    let IndexLine::Header { schema, seeds, tau, budget_multiplier } = header else {
        return Err(HarnessError::Trace {
            path: path.clone(),
            message: "first record is not a header".into(),
        });
    };
    if schema != INDEX_SCHEMA {
        return Err(HarnessError::Trace {
            path: path.clone(),
            message: format!("unsupported schema {schema}"),
        });
    }
    let mut runs = Vec::new();
    let mut missing = Vec::new();
    for line in lines {
        let IndexLine::Run { summary } = parse(line)? else {
            return Err(HarnessError::Trace {
                path: path.clone(),
                message: "duplicate header".into(),
            });
        };
        match read_trace(&output_dir.join(&summary.trace_file)) {
            Ok((meta, config, trace)) => runs.push(LoadedRun { meta, config, trace }),
            Err(_) => missing.push(summary.trace_file),
        }
    }
    Ok(LoadedRuns { runs, missing, seeds, tau, budget_multiplier })
}
