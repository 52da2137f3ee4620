//! Solve one trust-region and one quadratic-regularization subproblem on a
//! sketched Gauss-Newton model and check the decrease guarantees each step
//! must satisfy.

use rsopt::model::{cauchy_decrease_bound, solve_qr_step, solve_tr_step, TrStepRule};
use rsopt::nls::{build_gn_model, suite, ActionCounter};
use rsopt::{SketchKind, SketchSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = 40;
    let problem = suite::broyden_banded(d)?;
    let spec = SketchSpec::new(SketchKind::ScaledGaussian, 12, d).with_seed(5);
    let sketch = spec.draw_seeded()?;

    let mut counter = ActionCounter::new();
    let gn = build_gn_model(&problem, problem.x0(), &sketch, &mut counter)?;
    let model = gn.model();
    println!(
        "reduced model at x_0: l = {}, f = {:.4}, ||S grad f|| = {:.4} ({} actions)",
        model.l(),
        model.f0,
        model.ghat.norm(),
        counter.count(),
    );

    let alpha = 1.0;
    let tr = solve_tr_step(model, &sketch, alpha, TrStepRule::Dogleg)?;
    let cauchy_floor = cauchy_decrease_bound(model, alpha);
    println!("\ntrust region (alpha = {alpha}):");
    println!("  branch          = {:?}", tr.diagnostics.branch);
    println!("  ||shat||        = {:.4} (must be <= {alpha})", tr.shat.norm());
    println!("  model decrease  = {:.6}", tr.model_decrease);
    println!("  Cauchy floor    = {:.6}", cauchy_floor);
    assert!(tr.shat.norm() <= alpha * (1.0 + 1e-12));
    assert!(tr.model_decrease >= cauchy_floor * (1.0 - 1e-12));

    let qr = solve_qr_step(model, &sketch, alpha, 0.01)?;
    // Guarantee: mhat(0) - mhat(shat) >= ||S^T shat||^2 / (2 alpha).
    let floor = model.prolonged_norm(&qr.shat).powi(2) / (2.0 * alpha);
    println!("\nquadratic regularization (alpha = {alpha}):");
    println!("  branch          = {:?}", qr.diagnostics.branch);
    println!("  model decrease  = {:.6}", qr.model_decrease);
    println!("  guarantee floor = {:.6}", floor);
    println!("  stationarity    = {:.3e}", qr.diagnostics.inner_residual);
    assert!(qr.model_decrease >= floor * (1.0 - 1e-10));

    println!("\nall step guarantees hold");
    Ok(())
}
