//! Random-subspace optimization for nonlinear least squares.
//!
//! The solvers here minimize `f(x) = 1/2 ||r(x)||^2` by working in a random
//! `l`-dimensional subspace per iteration: a sketch `S in R^{l x d}` is drawn,
//! a reduced Gauss-Newton model is built from `l` Jacobian actions, and a
//! trust-region or quadratic-regularization step is taken in the subspace and
//! prolonged back via `S^T`. Supporting components:
//!
//! * [`sketch`]: the sketching ensembles and their tail parameters.
//! * [`model`]: reduced quadratic models and subspace step solvers.
//! * [`solver`]: the outer adaptive loop, step acceptance, and run traces.
//! * [`nls`]: nonlinear least-squares problems, Jacobian-action accounting,
//!   and a benchmark suite.
//! * [`theory`]: closed-form iteration-complexity calculators and Monte Carlo
//!   verifiers for the supporting tail bounds.
//! * [`harness`]: experiment configs, parallel benchmark runs, data profiles,
//!   and plot-data emission.
//!
//! The `rsopt` binary exposes the harness as a small CLI (`run`, `profile`,
//! `theory`, `check`); the `examples/` directory demonstrates each capability
//! as a standalone program.

pub mod harness;
pub mod model;
pub mod nls;
pub mod sketch;
pub mod solver;
pub mod theory;

pub use sketch::{EnsembleTheory, SketchKind, SketchMatrix, SketchSpec};
