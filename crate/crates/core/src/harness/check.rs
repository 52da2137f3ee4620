//! Post-hoc invariant replay on persisted runs.
//!
//! Every update rule of the solver loop is recomputable from a trace and the
//! configuration stored in its header: the step-size lattice, the acceptance
//! test, the objective chain, and the action accounting. [`check_run`]
//! re-derives all of them and reports each disagreement, so a damaged or
//! hand-edited trace cannot pass silently.

use super::LoadedRun;

/// Replays the solver update rules against a loaded run; returns one message
/// per violated invariant (empty means the trace is internally consistent).
pub fn check_run(run: &LoadedRun) -> Vec<String> {
    let config = &run.config;
    let trace = &run.trace;
    let mut violations = Vec::new();
    if trace.dim != config.sketch.d {
        violations.push(format!(
            "header: dim {} disagrees with sketch width {}",
            trace.dim, config.sketch.d
        ));
    }
    let l_cap = match &config.adaptive {
        None => config.sketch.l,
        Some(adaptive) => adaptive.l_max.unwrap_or(trace.dim).max(config.sketch.l),
    };
    let mut expected_exponent = config.p;
    let mut expected_f = trace.f0;
    let mut last_actions = 0u64;
    for (k, r) in trace.records.iter().enumerate() {
        let mut note = |msg: String| violations.push(format!("record {k}: {msg}"));
        if r.k != k {
            note(format!("iteration index {} out of order", r.k));
        }
        if r.exponent != expected_exponent {
            note(format!("exponent {} off the lattice walk ({expected_exponent})", r.exponent));
        }
        let lattice_alpha = config.alpha_max * config.gamma1.powi(r.exponent as i32);
        if r.alpha.to_bits() != lattice_alpha.to_bits() {
            note(format!("alpha {} is not alpha_max*gamma1^{}", r.alpha, r.exponent));
        }
        if r.f_before.to_bits() != expected_f.to_bits() {
            note(format!("f_before {} breaks the objective chain ({expected_f})", r.f_before));
        }
        if !(r.model_decrease >= 0.0 && r.model_decrease.is_finite()) {
            note(format!("model decrease {} invalid", r.model_decrease));
        }
        let should_accept = r.f_trial.is_finite()
            && r.f_before - r.f_trial >= config.theta * r.model_decrease;
        if r.successful != should_accept {
            note(format!(
                "acceptance flag {} disagrees with the decrease test", r.successful
            ));
        }
        let expected_after = if r.successful { r.f_trial } else { r.f_before };
        if r.f_after.to_bits() != expected_after.to_bits() {
            note(format!("f_after {} not the accepted value {expected_after}", r.f_after));
        }
        if r.f_after > r.f_before {
            note(format!("objective increased: {} -> {}", r.f_before, r.f_after));
        }
        if r.subspace_dim < config.sketch.l.min(trace.dim) || r.subspace_dim > l_cap {
            note(format!("subspace size {} outside [{}, {l_cap}]", r.subspace_dim, config.sketch.l));
        }
        let actions = r.actions_after.saturating_sub(last_actions);
        let consistent = match config.adaptive {
            None => actions == r.subspace_dim as u64,
            Some(_) => actions >= r.subspace_dim as u64,
        };
        if !consistent {
            note(format!(
                "{actions} actions charged for a subspace of size {}", r.subspace_dim
            ));
        }
        expected_exponent = if r.successful {
            r.exponent.saturating_sub(config.c)
        } else {
            r.exponent + 1
        };
        expected_f = r.f_after;
        last_actions = r.actions_after;
    }
    if trace.final_value.to_bits() != expected_f.to_bits() {
        violations.push(format!(
            "footer: final value {} does not close the chain ({expected_f})",
            trace.final_value
        ));
    }
    if trace.total_actions != last_actions {
        violations.push(format!(
            "footer: total actions {} vs accumulated {last_actions}",
            trace.total_actions
        ));
    }
    violations
}
