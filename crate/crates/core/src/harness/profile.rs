//! Data profiles: fraction of runs solved as a function of normalized budget.
//!
//! A run counts as solved at accuracy `tau` once its objective reaches
//! `f* + tau * (f0 - f*)`, where `f*` is zero for zero-residual problems and
//! otherwise the best value any solver in the batch found on that problem.
//! Each randomized run (problem, seed) is its own instance; the profile
//! reports, for every normalized budget `alpha`, the fraction of instances
//! solved within `alpha * dim` Jacobian actions.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, LoadedRun};

pub const PROFILE_SCHEMA: &str = "rsopt-profile/1";

/// Solve cost of a single run at the profile's accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub problem: String,
    pub dim: usize,
    pub seed: u32,
    /// Jacobian actions to first pass the accuracy test, when that happened
    /// within the budget; `None` marks the run unsolved.
    pub actions: Option<u64>,
}

/// Step function `alpha -> fraction of instances solved within alpha * dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataProfile {
    pub solver: String,
    pub tau: f64,
    pub budget_multiplier: f64,
    pub entries: Vec<ProfileEntry>,
    /// Breakpoints `(alpha, fraction)`, non-decreasing in both coordinates,
    /// spanning `alpha in [0, budget_multiplier]`.
    pub breakpoints: Vec<(f64, f64)>,
}

impl DataProfile {
    /// Fraction of instances solved within `alpha * dim` actions.
    pub fn value_at(&self, alpha: f64) -> f64 {
        self.breakpoints
            .iter()
            .take_while(|(a, _)| *a <= alpha)
            .last()
            .map_or(0.0, |(_, fraction)| *fraction)
    }

    /// Profile value at the full budget.
    pub fn terminal(&self) -> f64 {
        self.breakpoints.last().map_or(0.0, |(_, fraction)| *fraction)
    }
}

/// Best-known objective value per problem instance across the whole run set.
///
/// Zero-residual problems resolve to exactly `0.0`; the rest resolve to the
/// smallest accepted value any run reached (traces are monotone, so that is
/// the smallest final value).
fn resolve_targets(runs: &[LoadedRun]) -> Vec<((String, usize), f64)> {
    let mut targets: Vec<((String, usize), f64)> = Vec::new();
    for run in runs {
        let key = (run.trace.problem.clone(), run.trace.dim);
        let value = if run.meta.zero_residual { 0.0 } else { run.trace.final_value };
        match targets.iter_mut().find(|(k, _)| *k == key) {
            Some((_, best)) => *best = best.min(value),
            None => targets.push((key, value)),
        }
    }
    targets
}

/// Computes one [`DataProfile`] per solver appearing in `runs`.
///
/// Pure function of the traces: recomputing from persisted files yields the
/// same profiles exactly.
pub fn compute_profiles(
    runs: &[LoadedRun],
    tau: f64,
    budget_multiplier: f64,
) -> Result<Vec<DataProfile>, HarnessError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(HarnessError::Config(format!("tau must lie in (0, 1), got {tau}")));
    }
    if !(budget_multiplier > 0.0 && budget_multiplier.is_finite()) {
        return Err(HarnessError::Config(format!(
            "budget_multiplier must be positive, got {budget_multiplier}"
        )));
    }
    let targets = resolve_targets(runs);
    let mut profiles: Vec<DataProfile> = Vec::new();
    for run in runs {
        let key = (run.trace.problem.clone(), run.trace.dim);
        let fstar = targets.iter().find(|(k, _)| *k == key).expect("target resolved").1;
        let cutoff = fstar + tau * (run.trace.f0 - fstar);
        let budget = budget_multiplier * run.trace.dim as f64;
        let actions = run
            .trace
            .actions_to_reach(cutoff)
            .filter(|&n| n as f64 <= budget);
        let entry = ProfileEntry {
            problem: run.trace.problem.clone(),
            dim: run.trace.dim,
            seed: run.meta.seed,
            actions,
        };
        match profiles.iter_mut().find(|p| p.solver == run.meta.solver) {
            Some(profile) => profile.entries.push(entry),
            None => profiles.push(DataProfile {
                solver: run.meta.solver.clone(),
                tau,
                budget_multiplier,
                entries: vec![entry],
                breakpoints: Vec::new(),
            }),
        }
    }
    for profile in &mut profiles {
        profile.breakpoints = breakpoints(&profile.entries, budget_multiplier);
    }
    Ok(profiles)
}

fn breakpoints(entries: &[ProfileEntry], budget_multiplier: f64) -> Vec<(f64, f64)> {
    let total = entries.len() as f64;
    let mut ratios: Vec<f64> = entries
        .iter()
        .filter_map(|e| e.actions.map(|n| n as f64 / e.dim as f64))
        .collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
    let mut points = vec![(0.0, 0.0)];
    let mut solved = 0usize;
    for &ratio in &ratios {
        solved += 1;
        let fraction = solved as f64 / total;
        match points.last_mut() {
            Some((alpha, f)) if *alpha == ratio => *f = fraction,
            _ => points.push((ratio, fraction)),
        }
    }
    if points.last().is_none_or(|(alpha, _)| *alpha < budget_multiplier) {
        let terminal = points.last().map_or(0.0, |(_, f)| *f);
        points.push((budget_multiplier, terminal));
    }
    points
}

/// Writes one delimited data file per profile plus a ready-to-run matplotlib
/// script; returns the created paths. An empty profile set writes nothing.
pub fn emit_plot_data(profiles: &[DataProfile], dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if profiles.is_empty() {
        return Ok(Vec::new());
    }
    fs::create_dir_all(dir)
        .map_err(|e| HarnessError::Io { path: dir.to_path_buf(), source: e })?;
    let mut written = Vec::new();
    for profile in profiles {
        let path = dir.join(format!("profile-{}.dat", profile.solver));
        let mut text = String::new();
        text.push_str(&format!("# {PROFILE_SCHEMA}\n"));
        text.push_str(&format!("# solver: {}\n", profile.solver));
        text.push_str(&format!("# tau: {}\n", profile.tau));
        text.push_str(&format!("# budget_multiplier: {}\n", profile.budget_multiplier));
        text.push_str(&format!("# runs: {}\n", profile.entries.len()));
        text.push_str("# columns: alpha fraction_solved\n");
        for (alpha, fraction) in &profile.breakpoints {
            text.push_str(&format!("{alpha} {fraction}\n"));
        }
        fs::write(&path, text).map_err(|e| HarnessError::Io { path: path.clone(), source: e })?;
        written.push(path);
    }
    let script = dir.join("plot_profiles.py");
    fs::write(&script, PLOT_SCRIPT)
        .map_err(|e| HarnessError::Io { path: script.clone(), source: e })?;
    written.push(script);
    Ok(written)
}

/// Parses the `(alpha, fraction)` rows of an emitted profile data file.
pub fn read_profile_data(path: &Path) -> Result<Vec<(f64, f64)>, HarnessError> {
    let text = fs::read_to_string(path)
        .map_err(|e| HarnessError::Io { path: path.to_path_buf(), source: e })?;
    let mut rows = Vec::new();
    for (number, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let parsed = fields
            .next()
            .zip(fields.next())
            .and_then(|(a, f)| Some((a.parse::<f64>().ok()?, f.parse::<f64>().ok()?)));
        match parsed {
            Some(row) if fields.next().is_none() => rows.push(row),
            _ => {
                return Err(HarnessError::Trace {
                    path: path.to_path_buf(),
                    message: format!("malformed profile row on line {}", number + 1),
                })
            }
        }
    }
    Ok(rows)
}

const PLOT_SCRIPT: &str = r##"#!/usr/bin/env python3
"""Plot the data-profile files sitting next to this script."""
import glob
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
fig, ax = plt.subplots(figsize=(7.0, 4.5))
for path in sorted(glob.glob(os.path.join(here, "profile-*.dat"))):
    label = os.path.basename(path)[len("profile-"):-len(".dat")]
    alphas, fractions = [], []
    with open(path) as handle:
        for line in handle:
            if line.startswith("#"):
                continue
            alpha, fraction = line.split()
            alphas.append(float(alpha))
            fractions.append(float(fraction))
    ax.step(alphas, fractions, where="post", label=label)
ax.set_xlabel("Jacobian actions / dimension")
ax.set_ylabel("fraction of instances solved")
ax.set_ylim(-0.02, 1.02)
ax.legend(loc="lower right", fontsize=8)
fig.tight_layout()
out = os.path.join(here, "profiles.png")
fig.savefig(out, dpi=150)
print(out)
"##;
