//! Adaptive subspace sizing: start from a small sketch and let the solver
//! grow it whenever the reduced model cannot certify enough decrease. On a
//! stiff problem whose objective is dominated by a few hard directions, small
//! random subspaces cannot certify the target decrease, so the solver
//! escalates early and then converges at full Gauss-Newton speed — while any
//! fixed small size spends the whole action budget crawling.

use rsopt::nls::suite;
use rsopt::solver::{run, AdaptiveConfig, SolverConfig, Variant};
use rsopt::{SketchKind, SketchSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = 100;
    let problem = suite::bratu_2d(d)?;
    let budget = 30 * d as u64;

    let base = |l: usize| {
        let spec = SketchSpec::new(SketchKind::ScaledGaussian, l, d).with_seed(17);
        let mut config = SolverConfig::new(Variant::TrustRegion, spec);
        config.stopping.grad_tol = 0.0;
        config.stopping.max_iters = 10_000;
        config.stopping.action_budget = Some(budget);
        config
    };

    let mut adaptive = base(10);
    adaptive.adaptive = Some(AdaptiveConfig { kappa: 0.7, l_increment: 10, l_max: None });
    let trace = run(&problem, &adaptive)?;

    println!("problem: {} (d = {d}), budget = {budget} actions", problem.name());
    println!("\nadaptive run (l_0 = 10, +10 when the model certifies < 30% decrease):");
    println!("{:>5} {:>4} {:>14} {:>8}", "k", "l", "f", "actions");
    let mut last_l = 0;
    for record in &trace.records {
        if record.subspace_dim != last_l {
            println!(
                "{:>5} {:>4} {:>14.6e} {:>8}",
                record.k, record.subspace_dim, record.f_after, record.actions_after,
            );
            last_l = record.subspace_dim;
        }
    }
    println!("final f = {:.6e} after {} actions", trace.final_value, trace.total_actions);

    println!("\nfixed subspace sizes at the same budget:");
    println!("{:>5} {:>14} {:>7}", "l", "final f", "iters");
    for l in [10, 25, 50, 100] {
        let fixed = run(&problem, &base(l))?;
        println!("{:>5} {:>14.6e} {:>7}", l, fixed.final_value, fixed.records.len());
    }
    Ok(())
}
