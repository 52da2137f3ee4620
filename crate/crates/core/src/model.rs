//! Reduced quadratic models and subspace step solvers.
//!
//! A sketch `S` compresses the local quadratic model of `f` at `x` into
//! `mhat(shat) = f0 + <ghat, shat> + 1/2 <shat, Bhat shat>` with
//! `ghat = S grad f` and `Bhat = S B S^T`, both of size `l`. Steps are solved
//! entirely in the reduced space and prolonged back as `s = S^T shat`:
//!
//! * [`solve_qr_step`] minimizes the regularized model
//!   `qhat(shat) = mhat(shat) + 1/(2 alpha) ||S^T shat||^2`, whose curvature
//!   term uses the Gram matrix `S S^T`. The returned step satisfies the
//!   stationarity test `||grad qhat(shat)|| <= kappa_t ||S^T shat||` (up to a
//!   small absolute tolerance) and never increases `qhat`.
//! * [`solve_tr_step`] solves `min mhat(shat)` subject to `||shat|| <= alpha`,
//!   either with the exact Cauchy point or (default) a dogleg step that is
//!   accepted only when it achieves at least the Cauchy decrease, so the
//!   `1/2 ||ghat|| min(alpha, ||ghat||/||Bhat||)` guarantee always holds.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sketch::{SketchError, SketchMatrix};

/// Errors from model construction and step solves.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid reduced model: {0}")]
    Invalid(String),
    #[error("invalid step parameter: {0}")]
    BadParameter(String),
    #[error("sketch error: {0}")]
    Sketch(#[from] SketchError),
    #[error("linear solve failed: {0}")]
    Numerical(String),
}

/// The reduced quadratic model at the current iterate.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    /// Model value at `shat = 0`, i.e. `f(x)`.
    pub f0: f64,
    /// Sketched gradient `S grad f`, length `l`.
    pub ghat: DVector<f64>,
    /// Sketched curvature `S B S^T`, `l x l` symmetric.
    pub bhat: DMatrix<f64>,
    /// Gram matrix `S S^T`, `l x l` symmetric positive semidefinite.
    pub gram: DMatrix<f64>,
}

fn require_symmetric(m: &DMatrix<f64>, name: &str) -> Result<(), ModelError> {
    let scale = m.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1.0);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-8 * scale {
                return Err(ModelError::Invalid(format!(
                    "{name} is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

impl ReducedModel {
    pub fn new(
        f0: f64,
        ghat: DVector<f64>,
        bhat: DMatrix<f64>,
        gram: DMatrix<f64>,
    ) -> Result<Self, ModelError> {
        let l = ghat.len();
        if bhat.nrows() != l || bhat.ncols() != l || gram.nrows() != l || gram.ncols() != l {
            return Err(ModelError::Invalid(format!(
                "dimension mismatch: ghat has length {l}, bhat is {}x{}, gram is {}x{}",
                bhat.nrows(),
                bhat.ncols(),
                gram.nrows(),
                gram.ncols()
            )));
        }
        if !f0.is_finite()
            || ghat.iter().any(|x| !x.is_finite())
            || bhat.iter().any(|x| !x.is_finite())
            || gram.iter().any(|x| !x.is_finite())
        {
            return Err(ModelError::Invalid("non-finite model data".into()));
        }
        require_symmetric(&bhat, "bhat")?;
        require_symmetric(&gram, "gram")?;
        Ok(ReducedModel {
            f0,
            ghat,
            bhat,
            gram,
        })
    }

    /// Reduced dimension `l`.
    pub fn l(&self) -> usize {
        self.ghat.len()
    }

    /// Evaluate `mhat(shat)`.
    pub fn eval(&self, shat: &DVector<f64>) -> f64 {
        self.f0 + self.ghat.dot(shat) + 0.5 * quad_form(&self.bhat, shat)
    }

    /// Evaluate the regularized model `qhat(shat)`.
    pub fn eval_regularized(&self, shat: &DVector<f64>, alpha: f64) -> f64 {
        self.eval(shat) + quad_form(&self.gram, shat) / (2.0 * alpha)
    }

    /// Gradient of the regularized model at `shat`.
    pub fn regularized_gradient(&self, shat: &DVector<f64>, alpha: f64) -> DVector<f64> {
        &self.ghat + &self.bhat * shat + (&self.gram * shat) / alpha
    }

    /// `||S^T shat||`, computed from the Gram matrix.
    pub fn prolonged_norm(&self, shat: &DVector<f64>) -> f64 {
        quad_form(&self.gram, shat).max(0.0).sqrt()
    }
}

fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

/// Absolute tolerance for step-condition checks, scaled to the gradient.
pub fn condition_atol(ghat_norm: f64) -> f64 {
    1e-10 * ghat_norm.max(1.0)
}

/// Which internal branch produced a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepBranch {
    /// `ghat = 0`: the zero step.
    ZeroGradient,
    /// Regularized Newton solve without ridge.
    QrDirect,
    /// Regularized Newton solve after adding a ridge.
    QrRidge,
    /// Cauchy point interior to the trust region.
    CauchyInterior,
    /// Cauchy point clipped to the trust-region boundary.
    CauchyBoundary,
    /// Full Newton point inside the trust region.
    DoglegNewton,
    /// Dogleg interpolation hitting the boundary.
    DoglegBoundary,
}

/// Scalar diagnostics attached to a solved step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub branch: StepBranch,
    /// `||grad qhat(shat)||` for QR steps; 0 for TR steps.
    pub inner_residual: f64,
    /// Ridge added to make the QR system factorizable (0 if none).
    pub ridge: f64,
}

/// A solved subspace step.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// Reduced step `shat`, length `l`.
    pub shat: DVector<f64>,
    /// Prolonged step `S^T shat`, length `d`.
    pub s_full: DVector<f64>,
    /// `mhat(0) - mhat(shat)`, never negative.
    pub model_decrease: f64,
    pub diagnostics: StepDiagnostics,
}

fn zero_step(model: &ReducedModel, sketch: &SketchMatrix) -> StepResult {
    StepResult {
        shat: DVector::zeros(model.l()),
        s_full: DVector::zeros(sketch.d()),
        model_decrease: 0.0,
        diagnostics: StepDiagnostics {
            branch: StepBranch::ZeroGradient,
            inner_residual: 0.0,
            ridge: 0.0,
        },
    }
}

fn check_step_inputs(
    model: &ReducedModel,
    sketch: &SketchMatrix,
    alpha: f64,
) -> Result<(), ModelError> {
    if sketch.l() != model.l() {
        return Err(ModelError::Invalid(format!(
            "sketch has l = {}, model has l = {}",
            sketch.l(),
            model.l()
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ModelError::BadParameter(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    Ok(())
}

/// Solve the quadratic-regularization subproblem.
///
/// Factorizes `Bhat + (S S^T)/alpha`; when the factorization fails (the system
/// is semidefinite), a ridge starting at `1e-12` and escalating by `100x` is
/// added until it succeeds. The ridge keeps the stationarity residual at
/// `ridge * ||shat||`, far below the `kappa_t` test in practice.
pub fn solve_qr_step(
    model: &ReducedModel,
    sketch: &SketchMatrix,
    alpha: f64,
    kappa_t: f64,
) -> Result<StepResult, ModelError> {
    check_step_inputs(model, sketch, alpha)?;
    if !(kappa_t >= 0.0 && kappa_t.is_finite()) {
        return Err(ModelError::BadParameter(format!(
            "kappa_t must be nonnegative and finite, got {kappa_t}"
        )));
    }
    if model.ghat.norm() == 0.0 {
        return Ok(zero_step(model, sketch));
    }
    let l = model.l();
    let system = &model.bhat + &model.gram / alpha;
    let mut ridge = 0.0f64;
    let shat = loop {
        let mut m = system.clone();
        if ridge > 0.0 {
            for i in 0..l {
                m[(i, i)] += ridge;
            }
        }
        if let Some(chol) = m.cholesky() {
            break chol.solve(&(-&model.ghat));
        }
        ridge = if ridge == 0.0 { 1e-12 } else { ridge * 100.0 };
        if ridge > 1e6 {
            return Err(ModelError::Numerical(
                "regularized system could not be factorized".into(),
            ));
        }
    };
    let s_full = sketch.apply_transpose(&shat)?;
    let inner_residual = model.regularized_gradient(&shat, alpha).norm();
    let model_decrease = -(model.ghat.dot(&shat) + 0.5 * quad_form(&model.bhat, &shat));
    Ok(StepResult {
        shat,
        s_full,
        model_decrease,
        diagnostics: StepDiagnostics {
            branch: if ridge == 0.0 {
                StepBranch::QrDirect
            } else {
                StepBranch::QrRidge
            },
            inner_residual,
            ridge,
        },
    })
}

/// Step rule for the trust-region subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrStepRule {
    /// Exact Cauchy point (minimizer along `-ghat` within the region).
    Cauchy,
    /// Dogleg refinement; falls back to the Cauchy point whenever the dogleg
    /// candidate does not dominate its decrease.
    #[default]
    Dogleg,
}

/// Solve the trust-region subproblem `min mhat(shat)` s.t. `||shat|| <= alpha`.
pub fn solve_tr_step(
    model: &ReducedModel,
    sketch: &SketchMatrix,
    alpha: f64,
    rule: TrStepRule,
) -> Result<StepResult, ModelError> {
    check_step_inputs(model, sketch, alpha)?;
    let gnorm = model.ghat.norm();
    if gnorm == 0.0 {
        return Ok(zero_step(model, sketch));
    }
    let bg = &model.bhat * &model.ghat;
    let gbg = model.ghat.dot(&bg);

    let (t_cauchy, interior) = if gbg > 0.0 {
        let t_star = gnorm * gnorm / gbg;
        if t_star * gnorm <= alpha {
            (t_star, true)
        } else {
            (alpha / gnorm, false)
        }
    } else {
        (alpha / gnorm, false)
    };
    let cauchy = -&model.ghat * t_cauchy;
    let cauchy_decrease = t_cauchy * gnorm * gnorm - 0.5 * t_cauchy * t_cauchy * gbg;

    let mut shat = cauchy;
    let mut branch = if interior {
        StepBranch::CauchyInterior
    } else {
        StepBranch::CauchyBoundary
    };

    if rule == TrStepRule::Dogleg && gbg > 0.0 {
        if let Some((candidate, cand_branch)) = dogleg_candidate(model, alpha, gnorm, gbg) {
            let decrease =
                -(model.ghat.dot(&candidate) + 0.5 * quad_form(&model.bhat, &candidate));
            if decrease >= cauchy_decrease {
                shat = candidate;
                branch = cand_branch;
            }
        }
    }

    // Guard against rounding pushing the step a few ulps past the boundary.
    let norm = shat.norm();
    if norm > alpha {
        shat *= alpha / norm;
    }
    let model_decrease = -(model.ghat.dot(&shat) + 0.5 * quad_form(&model.bhat, &shat));
    let s_full = sketch.apply_transpose(&shat)?;
    Ok(StepResult {
        shat,
        s_full,
        model_decrease,
        diagnostics: StepDiagnostics {
            branch,
            inner_residual: 0.0,
            ridge: 0.0,
        },
    })
}

fn dogleg_candidate(
    model: &ReducedModel,
    alpha: f64,
    gnorm: f64,
    gbg: f64,
) -> Option<(DVector<f64>, StepBranch)> {
    let chol = model.bhat.clone().cholesky()?;
    let newton = chol.solve(&(-&model.ghat));
    if newton.norm() <= alpha {
        return Some((newton, StepBranch::DoglegNewton));
    }
    let t_star = gnorm * gnorm / gbg;
    let s_u = -&model.ghat * t_star;
    let u_norm = s_u.norm();
    if u_norm >= alpha {
        // Steepest-descent leg already reaches the boundary.
        return None;
    }
    let diff = &newton - &s_u;
    let a = diff.norm_squared();
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * s_u.dot(&diff);
    let c = u_norm * u_norm - alpha * alpha;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let tau = (-b + disc.sqrt()) / (2.0 * a);
    if !(0.0..=1.0).contains(&tau) {
        return None;
    }
    Some((s_u + diff * tau, StepBranch::DoglegBoundary))
}

/// Spectral norm (largest eigenvalue) of a symmetric positive semidefinite
/// matrix by power iteration with relative tolerance `rel_tol`.
pub fn spectral_norm_psd(m: &DMatrix<f64>, rel_tol: f64, max_iters: usize) -> f64 {
    let n = m.nrows();
    if n == 0 || m.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    // Deterministic start with varied components so it is not orthogonal to
    // the dominant eigenvector in structured cases.
    let mut v = DVector::from_fn(n, |i, _| {
        1.0 + ((i as u64).wrapping_mul(2654435761) % 97) as f64 / 97.0
    });
    v /= v.norm();
    let mut lambda = 0.0f64;
    for _ in 0..max_iters {
        let mut w = m * &v;
        if w.norm() == 0.0 {
            // Restart from a coordinate direction outside the null space.
            let i = (0..n).find(|&i| m.column(i).norm() > 0.0).unwrap_or(0);
            w = DVector::zeros(n);
            w[i] = 1.0;
        }
        let wn = w.norm();
        v = w / wn;
        let next = v.dot(&(m * &v));
        if (next - lambda).abs() <= rel_tol * next.abs() {
            return next.max(0.0);
        }
        lambda = next;
    }
    lambda.max(0.0)
}

/// The Cauchy decrease estimate `1/2 ||ghat|| min(alpha, ||ghat||/||Bhat||)`.
///
/// `||Bhat||` is estimated by power iteration at relative tolerance `1e-6`;
/// a zero curvature matrix yields the linear-model bound `1/2 ||ghat|| alpha`.
/// Power iteration approaches the spectral norm from below, so the returned
/// value sits at or slightly above the exact guarantee; certification tests
/// recompute the bound with an exact eigendecomposition.
pub fn cauchy_decrease_bound(model: &ReducedModel, alpha: f64) -> f64 {
    let gnorm = model.ghat.norm();
    if gnorm == 0.0 {
        return 0.0;
    }
    let bnorm = spectral_norm_psd(&model.bhat, 1e-6, 1000);
    let radius = if bnorm == 0.0 {
        alpha
    } else {
        alpha.min(gnorm / bnorm)
    };
    0.5 * gnorm * radius
}
