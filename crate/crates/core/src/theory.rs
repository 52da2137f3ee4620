//! Closed-form iteration-complexity calculators and a Monte Carlo check of
//! the concentration inequality behind them.
//!
//! [`ComplexityInputs::iteration_bound`] evaluates the high-probability bound:
//! after `N` iterations with `N >= n_star`, the probability that no iterate
//! has reached gradient norm `eps` is at most `exp(-concentration_rate * N)`.
//! The pieces (step-size floor, per-iteration decrease floor, success margin)
//! are exposed individually so tests and the CLI can report them.
//!
//! [`verify_chernoff`] simulates the underlying tail event directly: chains
//! of independent true/false iterations hit the low-count threshold no more
//! often than the closed-form tail predicts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sketch::EnsembleTheory;
use crate::solver::Variant;

/// Errors from the bound calculators.
#[derive(Debug, Error)]
pub enum TheoryError {
    /// An input is outside its admissible range.
    #[error("invalid input: {0}")]
    OutOfRange(String),
    /// The sketch failure rate is too large for the success margin to exist.
    #[error(
        "sketch failure rate delta_s = {delta_s} must satisfy delta_s < c/(c+1)^2 = {limit}"
    )]
    DeltaSTooLarge { delta_s: f64, limit: f64 },
    /// The margin denominator `(1-delta_s)(1-slack) - 1 + c/(c+1)^2` is not
    /// positive; the concentration argument needs a smaller slack or a more
    /// reliable sketch.
    #[error("success margin denominator {value} is not positive; reduce slack or delta_s")]
    MarginNotPositive { value: f64 },
}

/// Inputs to the complexity bound for one solver configuration.
///
/// `f0_gap` is `f(x0) - f_low` for a lower bound `f_low` on the objective;
/// `lipschitz` bounds the gradient Lipschitz constant and `b_max` the model
/// Hessian norms along the run. The remaining algorithm parameters mirror
/// [`crate::solver::SolverConfig`]. `slack` trades iteration count against
/// confidence: smaller slack lowers the bound but weakens the tail rate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ComplexityInputs {
    pub variant: Variant,
    pub eps: f64,
    pub f0_gap: f64,
    pub lipschitz: f64,
    pub b_max: f64,
    pub theta: f64,
    pub gamma1: f64,
    pub c: u32,
    pub p: u32,
    pub alpha_max: f64,
    pub kappa_t: f64,
    /// Fraction of the ideal subspace decrease the trust-region step achieves
    /// (`0.5` for a Cauchy-point argument); unused by quadratic regularization.
    pub cauchy_fraction: f64,
    /// Concentration slack in `(0, 1)`.
    pub slack: f64,
    pub ensemble: EnsembleTheory,
}

impl ComplexityInputs {
    /// Inputs with the solver's default algorithm parameters and unit
    /// smoothness constants.
    pub fn new(variant: Variant, eps: f64, f0_gap: f64, ensemble: EnsembleTheory) -> Self {
        ComplexityInputs {
            variant,
            eps,
            f0_gap,
            lipschitz: 1.0,
            b_max: 1.0,
            theta: 1e-4,
            gamma1: 0.5,
            c: 1,
            p: 1,
            alpha_max: 100.0,
            kappa_t: 0.01,
            cauchy_fraction: 0.5,
            slack: 0.1,
            ensemble,
        }
    }

    /// Initial step-size parameter `alpha_max * gamma1^p`.
    pub fn alpha0(&self) -> f64 {
        self.alpha_max * self.gamma1.powi(self.p as i32)
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        let range = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(TheoryError::OutOfRange(msg.to_string()))
            }
        };
        range(self.eps > 0.0 && self.eps.is_finite(), "eps must be positive and finite")?;
        range(self.f0_gap >= 0.0 && self.f0_gap.is_finite(), "f0_gap must be nonnegative")?;
        range(self.lipschitz >= 0.0 && self.lipschitz.is_finite(), "lipschitz must be >= 0")?;
        range(self.b_max >= 0.0 && self.b_max.is_finite(), "b_max must be >= 0")?;
        range(self.theta > 0.0 && self.theta < 1.0, "theta must lie in (0, 1)")?;
        range(self.gamma1 > 0.0 && self.gamma1 < 1.0, "gamma1 must lie in (0, 1)")?;
        range(self.c >= 1, "c must be >= 1")?;
        range(self.alpha_max > 0.0 && self.alpha_max.is_finite(), "alpha_max must be positive")?;
        range(self.kappa_t >= 0.0 && self.kappa_t.is_finite(), "kappa_t must be >= 0")?;
        range(
            self.cauchy_fraction > 0.0 && self.cauchy_fraction <= 1.0,
            "cauchy_fraction must lie in (0, 1]",
        )?;
        range(self.slack > 0.0 && self.slack < 1.0, "slack must lie in (0, 1)")?;
        let e = &self.ensemble;
        range(e.eps_s >= 0.0 && e.eps_s < 1.0, "ensemble eps_s must lie in [0, 1)")?;
        range(e.delta1 >= 0.0 && e.delta1 < 1.0, "ensemble delta1 must lie in [0, 1)")?;
        range(e.delta2 >= 0.0 && e.delta2 < 1.0, "ensemble delta2 must lie in [0, 1)")?;
        range(e.s_max > 0.0 && e.s_max.is_finite(), "ensemble s_max must be positive")?;
        Ok(())
    }

    /// Step size below which every true iteration is guaranteed successful.
    pub fn step_size_floor(&self) -> Result<f64, TheoryError> {
        self.validate()?;
        let floor = match self.variant {
            Variant::QuadraticRegularization => (1.0 - self.theta) / (self.lipschitz + self.b_max),
            Variant::TrustRegion => {
                let curvature = (self.lipschitz + self.b_max / 2.0)
                    * self.ensemble.s_max
                    * self.ensemble.s_max;
                let from_smoothness = self.cauchy_fraction * (1.0 - self.theta) / curvature;
                let from_model = if self.b_max > 0.0 { 1.0 / self.b_max } else { f64::INFINITY };
                (1.0 - self.ensemble.eps_s).sqrt() * self.eps * from_smoothness.min(from_model)
            }
        };
        if floor.is_finite() && floor > 0.0 {
            Ok(floor)
        } else {
            Err(TheoryError::OutOfRange(format!(
                "step-size floor {floor} is not positive and finite; check smoothness constants"
            )))
        }
    }

    /// Objective decrease guaranteed by a true successful iteration at step
    /// size `alpha`, while the gradient norm still exceeds `eps`.
    pub fn decrease_guarantee(&self, alpha: f64) -> Result<f64, TheoryError> {
        self.validate()?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(TheoryError::OutOfRange("alpha must be positive and finite".into()));
        }
        Ok(self.decrease_at(alpha))
    }

    fn decrease_at(&self, alpha: f64) -> f64 {
        let eps_s = self.ensemble.eps_s;
        match self.variant {
            Variant::QuadraticRegularization => {
                let reduced_sq = (1.0 - eps_s) * self.eps * self.eps;
                let denom =
                    self.ensemble.s_max * (self.b_max + alpha.recip()) + self.kappa_t;
                self.theta * reduced_sq / (2.0 * self.alpha_max * denom * denom)
            }
            Variant::TrustRegion => {
                let reduced = (1.0 - eps_s).sqrt() * self.eps;
                let quad = if self.b_max > 0.0 {
                    (1.0 - eps_s) * self.eps * self.eps / self.b_max
                } else {
                    f64::INFINITY
                };
                self.theta * self.cauchy_fraction * (reduced * alpha).min(quad)
            }
        }
    }

    /// Expected-success amplification factor; fails when the sketch is too
    /// unreliable for the concentration argument.
    pub fn success_margin(&self) -> Result<f64, TheoryError> {
        self.validate()?;
        let c = self.c as f64;
        let limit = c / ((c + 1.0) * (c + 1.0));
        let delta_s = self.ensemble.delta_s();
        if delta_s >= limit {
            return Err(TheoryError::DeltaSTooLarge { delta_s, limit });
        }
        let value = (1.0 - delta_s) * (1.0 - self.slack) - 1.0 + limit;
        if value <= 0.0 {
            return Err(TheoryError::MarginNotPositive { value });
        }
        Ok(value.recip())
    }

    /// Full high-probability iteration bound.
    pub fn iteration_bound(&self) -> Result<BoundReport, TheoryError> {
        let alpha_low = self.step_size_floor()?;
        let margin_factor = self.success_margin()?;
        let alpha0 = self.alpha0();
        let cap = self.gamma1.powi(self.c as i32);
        let ratio = (alpha_low / alpha0).min(cap);
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(TheoryError::OutOfRange(format!(
                "step-size ratio {ratio} out of range; alpha0 = {alpha0}"
            )));
        }
        let floor_exponent = if ratio >= cap {
            self.c
        } else {
            (ratio.ln() / self.gamma1.ln()).ceil() as u32
        };
        let alpha_floor = alpha0 * self.gamma1.powi(floor_exponent as i32);
        let worst_alpha = cap * alpha_floor;
        let decrease_floor = self.decrease_at(worst_alpha);
        if !(decrease_floor > 0.0 && decrease_floor.is_finite()) {
            return Err(TheoryError::OutOfRange(format!(
                "per-iteration decrease floor {decrease_floor} is vacuous at alpha = {worst_alpha}"
            )));
        }
        let delta_s = self.ensemble.delta_s();
        let gap_term = margin_factor * self.f0_gap;
        let warmup_term = margin_factor * floor_exponent as f64 / (1.0 + self.c as f64);
        let concentration_rate = self.slack * self.slack / 2.0 * (1.0 - delta_s);
        let n_star = gap_term / decrease_floor + warmup_term;
        if !n_star.is_finite() {
            return Err(TheoryError::OutOfRange("iteration bound overflowed".into()));
        }
        let iterations = n_star.ceil() as u64;
        Ok(BoundReport {
            variant: self.variant,
            eps: self.eps,
            alpha0,
            alpha_low,
            floor_exponent,
            alpha_floor,
            decrease_floor,
            delta_s,
            slack: self.slack,
            margin_factor,
            gap_term,
            warmup_term,
            concentration_rate,
            n_star,
            iterations,
            failure_probability: (-concentration_rate * iterations as f64).exp(),
        })
    }
}

/// Evaluated complexity bound with its intermediate quantities.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundReport {
    pub variant: Variant,
    pub eps: f64,
    /// Initial step-size parameter.
    pub alpha0: f64,
    /// Step size below which true iterations always succeed.
    pub alpha_low: f64,
    /// Shrink count after which the step-size lattice stays above its floor.
    pub floor_exponent: u32,
    /// Lattice value `alpha0 * gamma1^floor_exponent`.
    pub alpha_floor: f64,
    /// Guaranteed decrease of a true successful iteration at the worst
    /// lattice point reachable before termination.
    pub decrease_floor: f64,
    /// Sketch failure probability per iteration.
    pub delta_s: f64,
    /// Concentration slack.
    pub slack: f64,
    /// Amplification factor applied to both bound terms.
    pub margin_factor: f64,
    /// Iterations attributed to burning down the objective gap.
    pub gap_term: f64,
    /// Iterations attributed to walking the lattice down to its floor.
    pub warmup_term: f64,
    /// Tail exponent per iteration: failure probability is
    /// `exp(-concentration_rate * n)` for any `n >= n_star`.
    pub concentration_rate: f64,
    /// Real-valued iteration bound `gap_term / decrease_floor + warmup_term`.
    pub n_star: f64,
    /// `ceil(n_star)`.
    pub iterations: u64,
    /// Failure probability at exactly `iterations` iterations.
    pub failure_probability: f64,
}

impl BoundReport {
    /// Failure probability after `n >= n_star` iterations.
    pub fn failure_probability_at(&self, n: u64) -> f64 {
        (-self.concentration_rate * n as f64).exp()
    }

    /// Iterations needed to push the failure probability below `delta`.
    pub fn iterations_for_confidence(&self, delta: f64) -> Result<u64, TheoryError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(TheoryError::OutOfRange("delta must lie in (0, 1)".into()));
        }
        let tail = delta.recip().ln() / self.concentration_rate;
        let n = self.n_star.max(tail);
        if !n.is_finite() {
            return Err(TheoryError::OutOfRange("confidence target overflowed".into()));
        }
        Ok(n.ceil() as u64)
    }
}

/// Outcome of a Monte Carlo check of the iteration-count tail bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChernoffCheck {
    /// Iterations per simulated chain.
    pub chain_length: u64,
    /// Per-iteration probability of a non-true iteration.
    pub failure_rate: f64,
    /// Concentration slack.
    pub slack: f64,
    /// Chains whose true-iteration count is at most this hit the tail event.
    pub threshold: f64,
    /// Closed-form tail bound `exp(-slack^2/2 * (1-failure_rate) * n)`.
    pub bound: f64,
    pub trials: u64,
    pub hits: u64,
    pub empirical_rate: f64,
}

/// Simulates chains of independent iterations, each true with probability
/// `1 - failure_rate`, and counts how often the number of true iterations
/// falls at or below `(1 - failure_rate) * (1 - slack) * chain_length`.
///
/// Deterministic for a given seed: trials are split into fixed blocks, each
/// driven by its own counter-derived stream, so thread scheduling cannot
/// change the result.
pub fn verify_chernoff(
    failure_rate: f64,
    slack: f64,
    chain_length: u64,
    trials: u64,
    seed: u64,
) -> Result<ChernoffCheck, TheoryError> {
    if !(failure_rate > 0.0 && failure_rate < 1.0) {
        return Err(TheoryError::OutOfRange("failure_rate must lie in (0, 1)".into()));
    }
    if !(slack > 0.0 && slack < 1.0) {
        return Err(TheoryError::OutOfRange("slack must lie in (0, 1)".into()));
    }
    if chain_length == 0 || trials == 0 {
        return Err(TheoryError::OutOfRange("chain_length and trials must be positive".into()));
    }
    let success = 1.0 - failure_rate;
    let threshold = success * (1.0 - slack) * chain_length as f64;
    let bound = (-slack * slack / 2.0 * success * chain_length as f64).exp();
    const BLOCK: u64 = 4096;
    let blocks = trials.div_ceil(BLOCK);
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block);
            let in_block = BLOCK.min(trials - block * BLOCK);
            let mut hits = 0u64;
            for _ in 0..in_block {
                let mut true_count = 0u64;
                for _ in 0..chain_length {
                    if rng.gen::<f64>() < success {
                        true_count += 1;
                    }
                }
                if true_count as f64 <= threshold {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    Ok(ChernoffCheck {
        chain_length,
        failure_rate,
        slack,
        threshold,
        bound,
        trials,
        hits,
        empirical_rate: hits as f64 / trials as f64,
    })
}
