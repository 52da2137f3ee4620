//! Random-subspace solvers with adaptive step-size control.
//!
//! Each iteration draws a fresh `l x d` sketch `S_k`, builds the reduced
//! model `mhat_k` in the sketched subspace, solves a trust-region or
//! quadratic-regularization subproblem for `shat_k`, and prolongs the step
//! back as `s_k = S_k^T shat_k`. The step is accepted when the achieved
//! reduction covers a `theta` fraction of the model decrease:
//!
//! ```text
//! f(x_k) - f(x_k + s_k) >= theta * (mhat_k(0) - mhat_k(shat_k)).
//! ```
//!
//! The step-size parameter lives on an exact geometric lattice
//! `alpha = alpha_max * gamma1^m` with integer exponent `m >= 0`: successful
//! iterations move `m -> max(0, m - c)` (i.e. multiply by `gamma2 =
//! gamma1^{-c}`, capped at `alpha_max`), unsuccessful ones move `m -> m + 1`.
//! Tracking the exponent instead of the float keeps the lattice exact and
//! testable.
//!
//! Work is measured in Jacobian actions: building a reduced model with an
//! `l`-dimensional sketch charges exactly `l` actions, so runs with different
//! subspace sizes can be compared at equal budgets.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{solve_qr_step, solve_tr_step, ModelError, ReducedModel, TrStepRule};
use crate::nls::ActionCounter;
use crate::sketch::{SketchError, SketchMatrix, SketchSpec};

/// Errors raised by solver configuration or execution.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("objective evaluation failed: {0}")]
    Objective(String),
    #[error("objective is not finite at the starting point")]
    NonFiniteStart,
}

/// Anything the solver can minimize.
///
/// Implementations expose the ambient dimension, a starting point, plain
/// function evaluation, and a reduced-model oracle. The oracle must charge
/// the action counter for the sketched derivative work it performs — one
/// action per sketched column, i.e. `sketch.l()` per call — so that budgets
/// are comparable across objectives.
pub trait Objective {
    fn dim(&self) -> usize;

    fn label(&self) -> &str {
        "objective"
    }

    fn start(&self) -> DVector<f64>;

    /// Objective value; may return NaN/inf for points outside the domain.
    fn evaluate(&self, x: &DVector<f64>) -> f64;

    /// Reduced model of the objective at `x` in the subspace of `sketch`.
    fn reduced_model(
        &self,
        x: &DVector<f64>,
        sketch: &SketchMatrix,
        counter: &mut ActionCounter,
    ) -> Result<ReducedModel, SolverError>;

    /// Full gradient for monitoring and termination only. Never used to
    /// build models and never charged to the action counter.
    fn monitor_gradient(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }
}

/// Which subproblem shapes the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    TrustRegion,
    QuadraticRegularization,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::TrustRegion => f.write_str("trust_region"),
            Variant::QuadraticRegularization => f.write_str("quadratic_regularization"),
        }
    }
}

/// Termination checks; any disabled check is skipped.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Stopping {
    /// Stop once the monitor gradient norm drops to this value (0 disables).
    pub grad_tol: f64,
    /// Stop once `f(x_k)` reaches this value.
    pub target_value: Option<f64>,
    /// Hard cap on iterations.
    pub max_iters: usize,
    /// Stop once cumulative Jacobian actions reach this budget; the
    /// iteration in flight completes, so the final count may overshoot by at
    /// most one model build.
    pub action_budget: Option<u64>,
}

impl Default for Stopping {
    fn default() -> Self {
        Stopping {
            grad_tol: 1e-8,
            target_value: None,
            max_iters: 10_000,
            action_budget: None,
        }
    }
}

/// Reference quantities for classifying iterations as well-aligned.
///
/// An iteration counts as true when the sketched gradient captures at least
/// a `(1 - eps_s)` fraction of the squared gradient norm and the sketch
/// operator norm stays below `s_max`. Classification needs the monitor
/// gradient, so it is diagnostic only.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrueCheck {
    pub eps_s: f64,
    pub s_max: f64,
}

/// Growth policy for the adaptive subspace variant.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    /// Model-quality target: accept the current subspace once
    /// `mhat(shat) <= kappa * mhat(0)`.
    pub kappa: f64,
    /// How many dimensions to add per growth step.
    pub l_increment: usize,
    /// Cap on the subspace size (defaults to the ambient dimension).
    pub l_max: Option<usize>,
}

/// Full solver configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub variant: Variant,
    /// Sketch template; its seed drives the per-iteration draws.
    pub sketch: SketchSpec,
    /// Contraction factor in (0, 1).
    pub gamma1: f64,
    /// Expansion exponent: success multiplies alpha by `gamma1^{-c}`.
    pub c: u32,
    /// Initial exponent: `alpha_0 = alpha_max * gamma1^p`.
    pub p: u32,
    /// Sufficient-decrease fraction in (0, 1).
    pub theta: f64,
    /// Upper bound of the step-size lattice.
    pub alpha_max: f64,
    /// Stationarity tolerance for quadratic-regularization steps.
    pub kappa_t: f64,
    pub tr_rule: TrStepRule,
    pub stopping: Stopping,
    pub true_check: Option<TrueCheck>,
    pub adaptive: Option<AdaptiveConfig>,
}

impl SolverConfig {
    /// Defaults: `gamma1 = 1/2`, `c = p = 1`, `theta = 1e-4`,
    /// `alpha_max = 100`, `kappa_t = 0.01`, dogleg trust-region steps.
    pub fn new(variant: Variant, sketch: SketchSpec) -> Self {
        SolverConfig {
            variant,
            sketch,
            gamma1: 0.5,
            c: 1,
            p: 1,
            theta: 1e-4,
            alpha_max: 100.0,
            kappa_t: 0.01,
            tr_rule: TrStepRule::Dogleg,
            stopping: Stopping::default(),
            true_check: None,
            adaptive: None,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.gamma1 > 0.0 && self.gamma1 < 1.0) {
            return Err(SolverError::Config(format!(
                "gamma1 must lie in (0, 1), got {}",
                self.gamma1
            )));
        }
        if self.c == 0 {
            return Err(SolverError::Config(
                "c must be at least 1 so that successes expand alpha".into(),
            ));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(SolverError::Config(format!(
                "theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        if !(self.alpha_max > 0.0 && self.alpha_max.is_finite()) {
            return Err(SolverError::Config(format!(
                "alpha_max must be positive and finite, got {}",
                self.alpha_max
            )));
        }
        if !(self.kappa_t >= 0.0 && self.kappa_t.is_finite()) {
            return Err(SolverError::Config(format!(
                "kappa_t must be nonnegative, got {}",
                self.kappa_t
            )));
        }
        if let Some(tc) = &self.true_check {
            if !(tc.eps_s > 0.0 && tc.eps_s < 1.0 && tc.s_max > 0.0) {
                return Err(SolverError::Config(
                    "true-iteration check needs eps_s in (0, 1) and s_max > 0".into(),
                ));
            }
        }
        if let Some(ad) = &self.adaptive {
            if !(ad.kappa > 0.0 && ad.kappa < 1.0) {
                return Err(SolverError::Config(format!(
                    "adaptive kappa must lie in (0, 1), got {}",
                    ad.kappa
                )));
            }
            if ad.l_increment == 0 {
                return Err(SolverError::Config(
                    "adaptive l_increment must be positive".into(),
                ));
            }
        }
        if self.stopping.max_iters == 0 {
            return Err(SolverError::Config("max_iters must be positive".into()));
        }
        self.sketch.validate()?;
        Ok(())
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Monitor gradient reached `grad_tol`.
    GradientTolerance,
    /// Objective reached `target_value`.
    TargetValue,
    /// Iteration cap reached.
    MaxIterations,
    /// Action budget exhausted.
    ActionBudget,
    /// Alpha shrank below the representable range without a success.
    Stalled,
}

/// One iteration of a run, with everything needed to re-check the update
/// rules after the fact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub f_before: f64,
    /// Value at the trial point (NaN admissible).
    pub f_trial: f64,
    pub f_after: f64,
    /// Step-size parameter used this iteration.
    pub alpha: f64,
    /// Lattice exponent: `alpha = alpha_max * gamma1^exponent`.
    pub exponent: u32,
    pub successful: bool,
    /// `mhat(0) - mhat(shat)` reported by the subproblem solver.
    pub model_decrease: f64,
    /// Norm of the prolonged step `S^T shat`.
    pub step_norm: f64,
    /// Sketch rows used this iteration (varies under the adaptive policy).
    pub subspace_dim: usize,
    /// Cumulative Jacobian actions after this iteration.
    pub actions_after: u64,
    /// Alignment classification, when a [`TrueCheck`] was configured.
    pub true_iteration: Option<bool>,
}

/// Complete, serializable record of one solver run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunTrace {
    pub problem: String,
    pub variant: Variant,
    pub sketch: SketchSpec,
    pub dim: usize,
    pub f0: f64,
    pub final_value: f64,
    pub final_point: Vec<f64>,
    pub final_gradient_norm: Option<f64>,
    pub termination: Termination,
    pub total_actions: u64,
    pub records: Vec<IterationRecord>,
}

impl RunTrace {
    /// First cumulative action count at which the objective (evaluated at
    /// accepted iterates) reaches `cutoff`, if it ever does.
    pub fn actions_to_reach(&self, cutoff: f64) -> Option<u64> {
        if self.f0 <= cutoff {
            return Some(0);
        }
        self.records
            .iter()
            .find(|r| r.f_after <= cutoff)
            .map(|r| r.actions_after)
    }

    /// Fraction of classified iterations that were true.
    pub fn true_fraction(&self) -> Option<f64> {
        let classified: Vec<_> = self
            .records
            .iter()
            .filter_map(|r| r.true_iteration)
            .collect();
        if classified.is_empty() {
            return None;
        }
        Some(classified.iter().filter(|&&t| t).count() as f64 / classified.len() as f64)
    }
}

fn alpha_at(alpha_max: f64, gamma1: f64, exponent: u32) -> f64 {
    alpha_max * gamma1.powi(exponent as i32)
}

fn classify_true(
    ghat_norm_sq: f64,
    grad_norm_sq: f64,
    operator_norm: f64,
    check: &TrueCheck,
) -> bool {
    ghat_norm_sq >= (1.0 - check.eps_s) * grad_norm_sq
        && operator_norm <= check.s_max * (1.0 + 1e-12)
}

/// Minimize `problem` from its own starting point.
pub fn run<P: Objective + ?Sized>(
    problem: &P,
    config: &SolverConfig,
) -> Result<RunTrace, SolverError> {
    run_from(problem, problem.start(), config)
}

/// Minimize `problem` from an explicit starting point.
///
/// The per-iteration sketches are drawn from a single ChaCha8 stream seeded
/// with `config.sketch.seed`, so a run is fully determined by its
/// configuration.
pub fn run_from<P: Objective + ?Sized>(
    problem: &P,
    x0: DVector<f64>,
    config: &SolverConfig,
) -> Result<RunTrace, SolverError> {
    config.validate()?;
    let d = problem.dim();
    if config.sketch.d != d {
        return Err(SolverError::Config(format!(
            "sketch is built for dimension {}, problem has {}",
            config.sketch.d, d
        )));
    }
    if x0.len() != d {
        return Err(SolverError::Config(format!(
            "starting point has length {}, problem has dimension {}",
            x0.len(),
            d
        )));
    }

    let mut x = x0;
    let mut f = problem.evaluate(&x);
    if !f.is_finite() {
        return Err(SolverError::NonFiniteStart);
    }
    let f0 = f;

    let mut rng = ChaCha8Rng::seed_from_u64(config.sketch.seed);
    let mut counter = ActionCounter::new();
    let mut exponent: u32 = config.p;
    let mut subspace_dim = config.sketch.l;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut termination = Termination::MaxIterations;

    for k in 0..config.stopping.max_iters {
        if config.stopping.grad_tol > 0.0 {
            if let Some(g) = problem.monitor_gradient(&x) {
                if g.norm() <= config.stopping.grad_tol {
                    termination = Termination::GradientTolerance;
                    break;
                }
            }
        }
        if let Some(target) = config.stopping.target_value {
            if f <= target {
                termination = Termination::TargetValue;
                break;
            }
        }

        let alpha = alpha_at(config.alpha_max, config.gamma1, exponent);
        if alpha < 1e-200 {
            termination = Termination::Stalled;
            break;
        }
        let exponent_used = exponent;
        let f_before = f;

        let (sketch, model, step) = build_and_solve(
            problem,
            &x,
            f,
            config,
            alpha,
            &mut rng,
            &mut counter,
            &mut subspace_dim,
        )?;

        // Alignment is a property of the sketch at the model center, so it
        // is classified before the iterate moves.
        let true_iteration = config.true_check.as_ref().and_then(|tc| {
            problem.monitor_gradient(&x).map(|g| {
                classify_true(
                    model.ghat.norm_squared(),
                    g.norm_squared(),
                    sketch.operator_norm(),
                    tc,
                )
            })
        });

        let x_trial = &x + &step.s_full;
        let f_trial = problem.evaluate(&x_trial);
        let successful =
            f_trial.is_finite() && f_before - f_trial >= config.theta * step.model_decrease;

        if successful {
            x = x_trial;
            f = f_trial;
            exponent = exponent.saturating_sub(config.c);
        } else {
            exponent += 1;
        }

        records.push(IterationRecord {
            k,
            f_before,
            f_trial,
            f_after: f,
            alpha,
            exponent: exponent_used,
            successful,
            model_decrease: step.model_decrease,
            step_norm: step.s_full.norm(),
            subspace_dim: sketch.l(),
            actions_after: counter.count(),
            true_iteration,
        });

        if let Some(budget) = config.stopping.action_budget {
            if counter.count() >= budget {
                termination = Termination::ActionBudget;
                break;
            }
        }
    }

    let final_gradient_norm = problem.monitor_gradient(&x).map(|g| g.norm());
    Ok(RunTrace {
        problem: problem.label().to_string(),
        variant: config.variant,
        sketch: config.sketch,
        dim: d,
        f0,
        final_value: f,
        final_point: x.iter().copied().collect(),
        final_gradient_norm,
        termination,
        total_actions: counter.count(),
        records,
    })
}

#[allow(clippy::too_many_arguments)]
fn draw_build_solve<P: Objective + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    l: usize,
    config: &SolverConfig,
    alpha: f64,
    rng: &mut ChaCha8Rng,
    counter: &mut ActionCounter,
) -> Result<(SketchMatrix, ReducedModel, crate::model::StepResult), SolverError> {
    let mut spec = config.sketch;
    spec.l = l;
    if spec.s > l {
        spec.s = l;
    }
    let sketch = spec.draw(rng)?;
    let model = problem.reduced_model(x, &sketch, counter)?;
    let step = match config.variant {
        Variant::TrustRegion => solve_tr_step(&model, &sketch, alpha, config.tr_rule)?,
        Variant::QuadraticRegularization => solve_qr_step(&model, &sketch, alpha, config.kappa_t)?,
    };
    Ok((sketch, model, step))
}

/// Builds the model and step for one iteration, growing the subspace under
/// the adaptive policy.
///
/// Growth redraws a fresh, larger sketch and rebuilds the model from
/// scratch, paying the full `l_new` actions again; the grown size persists
/// into later iterations. The quality test `mhat(shat) <= kappa * mhat(0)`
/// assumes a nonnegative objective, as in nonlinear least squares.
#[allow(clippy::too_many_arguments)]
fn build_and_solve<P: Objective + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    f: f64,
    config: &SolverConfig,
    alpha: f64,
    rng: &mut ChaCha8Rng,
    counter: &mut ActionCounter,
    subspace_dim: &mut usize,
) -> Result<(SketchMatrix, ReducedModel, crate::model::StepResult), SolverError> {
    let mut out = draw_build_solve(problem, x, *subspace_dim, config, alpha, rng, counter)?;
    if let Some(ad) = &config.adaptive {
        let l_max = ad.l_max.unwrap_or(problem.dim()).min(problem.dim());
        while *subspace_dim < l_max {
            let model_value_at_step = f - out.2.model_decrease;
            if model_value_at_step <= ad.kappa * f {
                break;
            }
            *subspace_dim = (*subspace_dim + ad.l_increment).min(l_max);
            out = draw_build_solve(problem, x, *subspace_dim, config, alpha, rng, counter)?;
        }
    }
    Ok(out)
}
