//! Compare classical full-space Gauss-Newton with sketched variants on one
//! problem, counting Jacobian actions (matrix-vector products) to reach a
//! fixed accuracy. Sketched iterations are cheaper but less informed, so the
//! interesting quantity is actions, not iterations.

use rsopt::nls::{full_gn_reference, suite};
use rsopt::solver::{run, SolverConfig, Stopping, Variant};
use rsopt::{SketchKind, SketchSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = 100;
    let problem = suite::broyden_tridiagonal(d)?;
    let stopping = Stopping { grad_tol: 0.0, max_iters: 4000, action_budget: Some(200 * d as u64), ..Stopping::default() };

    let full = full_gn_reference(&problem, stopping)?;
    let cutoff = 1e-5 * full.f0; // accuracy target relative to f(x_0)

    println!("problem: {} (d = {d}), target f <= {cutoff:.3e}", problem.name());
    println!("{:<28} {:>6} {:>10} {:>16}", "solver", "iters", "actions", "actions to target");
    let report = |label: &str, trace: &rsopt::solver::RunTrace| {
        let reached = trace
            .actions_to_reach(cutoff)
            .map_or_else(|| "not reached".into(), |n| n.to_string());
        println!(
            "{:<28} {:>6} {:>10} {:>16}",
            label,
            trace.records.len(),
            trace.total_actions,
            reached,
        );
    };
    report("full Gauss-Newton", &full);

    for (label, kind, l) in [
        ("gaussian l = d/2", SketchKind::ScaledGaussian, d / 2),
        ("gaussian l = d/4", SketchKind::ScaledGaussian, d / 4),
        ("s-hashing l = d/2", SketchKind::SHashing, d / 2),
        ("sampling l = d/2", SketchKind::ScaledSampling, d / 2),
    ] {
        let spec = SketchSpec::new(kind, l, d).with_seed(11);
        let mut config = SolverConfig::new(Variant::TrustRegion, spec);
        config.stopping = stopping;
        report(label, &run(&problem, &config)?);
    }
    Ok(())
}
