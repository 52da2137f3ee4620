//! Minimize the extended Rosenbrock function with a sketched trust-region
//! Gauss-Newton solver working in random 50-dimensional subspaces of R^100.

use rsopt::nls::suite;
use rsopt::solver::{run, SolverConfig, Variant};
use rsopt::{SketchKind, SketchSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = suite::extended_rosenbrock(100)?;
    let spec = SketchSpec::new(SketchKind::ScaledGaussian, 50, 100).with_seed(3);

    let mut config = SolverConfig::new(Variant::TrustRegion, spec);
    config.stopping.grad_tol = 1e-10;
    config.stopping.max_iters = 400;

    let trace = run(&problem, &config)?;

    println!("{:>5} {:>14} {:>10} {:>9} {:>8}", "k", "f", "alpha", "success", "actions");
    for record in trace.records.iter().step_by(25) {
        println!(
            "{:>5} {:>14.6e} {:>10.3e} {:>9} {:>8}",
            record.k, record.f_after, record.alpha, record.successful, record.actions_after,
        );
    }
    println!(
        "\nterminated: {:?} after {} iterations, {} actions",
        trace.termination,
        trace.records.len(),
        trace.total_actions,
    );
    println!("f: {:.3e} -> {:.3e}", trace.f0, trace.final_value);
    if let Some(g) = trace.final_gradient_norm {
        println!("final ||grad f|| = {g:.3e}");
    }
    Ok(())
}
