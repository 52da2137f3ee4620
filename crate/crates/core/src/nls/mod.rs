//! Nonlinear least-squares problems and their sketched Gauss-Newton models.
//!
//! A problem exposes its residual map `r : R^d -> R^n` together with exact
//! Jacobian-vector products `v -> J(x) v` and `u -> J(x)^T u`. The full
//! Jacobian is never formed: building a reduced Gauss-Newton model with an
//! `l x d` sketch `S` costs exactly `l` Jacobian actions, one per column of
//! `J S^T`. An [`ActionCounter`] tracks that cost so runs can be compared on
//! equal work budgets.
//!
//! The [`suite`] submodule provides a fixed collection of ten classic
//! large-scale test problems with analytic Jacobian actions.

pub mod suite;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{ModelError, ReducedModel};
use crate::sketch::SketchMatrix;

/// Errors from problem construction or model building.
#[derive(Debug, Error)]
pub enum ProblemError {
    /// The requested problem name is not in the suite.
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
    /// The requested dimension is not admissible for the problem.
    #[error("problem '{name}' does not support dimension {dim}: {reason}")]
    UnsupportedDimension {
        name: String,
        dim: usize,
        reason: String,
    },
    /// An input vector has the wrong length.
    #[error("dimension mismatch in '{context}': expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },
    /// A quantity that must be finite was not.
    #[error("non-finite value in {0}")]
    NonFinite(String),
    /// The sketch itself was malformed or incompatible.
    #[error(transparent)]
    Sketch(#[from] crate::sketch::SketchError),
    /// The assembled reduced model was rejected.
    #[error(transparent)]
    Model(#[from] ModelError),
}

type VectorFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type ActionFn = Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Counts Jacobian actions (products with `J` or `J^T`).
///
/// One reduced-model build with an `l x d` sketch adds exactly `l`.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ActionCounter {
    count: u64,
}

impl ActionCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Total actions recorded so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn add(&mut self, actions: u64) {
        self.count += actions;
    }
}

/// A nonlinear least-squares problem `min_x f(x) = 0.5 ||r(x)||^2`.
///
/// Jacobian access is matrix-free: only the actions `v -> J v` and
/// `u -> J^T u` are available, each counted as one Jacobian action.
pub struct NlsProblem {
    name: String,
    dim: usize,
    residual_dim: usize,
    x0: DVector<f64>,
    zero_residual: bool,
    residual: VectorFn,
    jac_action: ActionFn,
    jac_transpose_action: ActionFn,
}

impl std::fmt::Debug for NlsProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NlsProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("residual_dim", &self.residual_dim)
            .field("zero_residual", &self.zero_residual)
            .finish()
    }
}

impl NlsProblem {
    /// Assembles a problem from its residual map and exact Jacobian actions.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        residual_dim: usize,
        x0: DVector<f64>,
        residual: VectorFn,
        jac_action: ActionFn,
        jac_transpose_action: ActionFn,
    ) -> Result<Self, ProblemError> {
        let name = name.into();
        if x0.len() != dim {
            return Err(ProblemError::DimensionMismatch {
                context: format!("{name} starting point"),
                expected: dim,
                actual: x0.len(),
            });
        }
        if dim == 0 || residual_dim == 0 {
            return Err(ProblemError::UnsupportedDimension {
                name,
                dim,
                reason: "dimensions must be positive".into(),
            });
        }
        Ok(Self {
            name,
            dim,
            residual_dim,
            x0,
            zero_residual: false,
            residual,
            jac_action,
            jac_transpose_action,
        })
    }

    /// Marks the problem as having a zero-residual solution (`f^* = 0`).
    pub fn with_zero_residual(mut self) -> Self {
        self.zero_residual = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of variables `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of residual components `n`.
    pub fn residual_dim(&self) -> usize {
        self.residual_dim
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    /// Whether the optimal value is known to be exactly zero.
    pub fn is_zero_residual(&self) -> bool {
        self.zero_residual
    }

    /// Residual vector `r(x)`. Entries may be non-finite at wild points;
    /// callers decide how to treat such trial values.
    pub fn residual(&self, x: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        self.check_dim("residual input", self.dim, x.len())?;
        let r = (self.residual)(x);
        debug_assert_eq!(r.len(), self.residual_dim);
        Ok(r)
    }

    /// Objective value `f(x) = 0.5 ||r(x)||^2`.
    pub fn value(&self, x: &DVector<f64>) -> Result<f64, ProblemError> {
        Ok(0.5 * self.residual(x)?.norm_squared())
    }

    /// Jacobian action `J(x) v`. Counts as one action.
    pub fn jacobian_action(
        &self,
        x: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>, ProblemError> {
        self.check_dim("jacobian point", self.dim, x.len())?;
        self.check_dim("jacobian direction", self.dim, v.len())?;
        let out = (self.jac_action)(x, v);
        debug_assert_eq!(out.len(), self.residual_dim);
        Ok(out)
    }

    /// Adjoint action `J(x)^T u`. Counts as one action.
    pub fn jacobian_transpose_action(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<DVector<f64>, ProblemError> {
        self.check_dim("adjoint point", self.dim, x.len())?;
        self.check_dim("adjoint direction", self.residual_dim, u.len())?;
        let out = (self.jac_transpose_action)(x, u);
        debug_assert_eq!(out.len(), self.dim);
        Ok(out)
    }

    /// Full gradient `J(x)^T r(x)`, for monitoring and termination tests
    /// only; solvers never use it to build models.
    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        let r = self.residual(x)?;
        self.jacobian_transpose_action(x, &r)
    }

    fn check_dim(&self, context: &str, expected: usize, actual: usize) -> Result<(), ProblemError> {
        if expected == actual {
            Ok(())
        } else {
            Err(ProblemError::DimensionMismatch {
                context: format!("{} {context}", self.name),
                expected,
                actual,
            })
        }
    }
}

/// A reduced Gauss-Newton model together with the sketched Jacobian that
/// produced it.
///
/// With sketch `S` (`l x d`) and residual `r_0 = r(x)`, the stored matrix is
/// `JS = J(x) S^T` (`n x l`), so the model pieces are `ghat = JS^T r_0` and
/// `bhat = JS^T JS`. The identity `ghat = S (J^T r_0)` holds exactly, i.e.
/// the sketched gradient is recovered without ever forming the full gradient.
pub struct SketchedGnModel {
    sketched_jacobian: DMatrix<f64>,
    residual: DVector<f64>,
    model: ReducedModel,
}

impl SketchedGnModel {
    /// The `n x l` matrix `J(x) S^T`.
    pub fn sketched_jacobian(&self) -> &DMatrix<f64> {
        &self.sketched_jacobian
    }

    /// Residual `r(x)` at the model center.
    pub fn residual(&self) -> &DVector<f64> {
        &self.residual
    }

    pub fn model(&self) -> &ReducedModel {
        &self.model
    }

    pub fn into_model(self) -> ReducedModel {
        self.model
    }
}

/// Builds the reduced Gauss-Newton model of `problem` at `x` for the given
/// sketch, charging exactly `sketch.l()` Jacobian actions to `counter`.
///
/// The columns of `J S^T` are computed one Jacobian action at a time, so the
/// cost is `l` actions regardless of `d`; curvature `JS^T JS` is exactly
/// symmetric positive semidefinite by construction.
pub fn build_gn_model(
    problem: &NlsProblem,
    x: &DVector<f64>,
    sketch: &SketchMatrix,
    counter: &mut ActionCounter,
) -> Result<SketchedGnModel, ProblemError> {
    if sketch.d() != problem.dim() {
        return Err(ProblemError::DimensionMismatch {
            context: format!("{} sketch width", problem.name()),
            expected: problem.dim(),
            actual: sketch.d(),
        });
    }
    let r0 = problem.residual(x)?;
    if !r0.iter().all(|v| v.is_finite()) {
        return Err(ProblemError::NonFinite(format!(
            "residual of '{}' at model center",
            problem.name()
        )));
    }
    let l = sketch.l();
    let n = problem.residual_dim();
    let mut js = DMatrix::<f64>::zeros(n, l);
    let mut basis = DVector::<f64>::zeros(l);
    for i in 0..l {
        basis[i] = 1.0;
        let direction = sketch.apply_transpose(&basis)?;
        basis[i] = 0.0;
        let column = problem.jacobian_action(x, &direction)?;
        js.set_column(i, &column);
    }
    counter.add(l as u64);

    let f0 = 0.5 * r0.norm_squared();
    let ghat = js.tr_mul(&r0);
    let bhat = js.tr_mul(&js);
    let gram = sketch.gram();
    let model = ReducedModel::new(f0, ghat, bhat, gram)?;
    Ok(SketchedGnModel {
        sketched_jacobian: js,
        residual: r0,
        model,
    })
}

impl crate::solver::Objective for NlsProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> &str {
        &self.name
    }

    fn start(&self) -> DVector<f64> {
        self.x0.clone()
    }

    fn evaluate(&self, x: &DVector<f64>) -> f64 {
        match self.residual(x) {
            Ok(r) => 0.5 * r.norm_squared(),
            Err(_) => f64::NAN,
        }
    }

    fn reduced_model(
        &self,
        x: &DVector<f64>,
        sketch: &SketchMatrix,
        counter: &mut ActionCounter,
    ) -> Result<ReducedModel, crate::solver::SolverError> {
        build_gn_model(self, x, sketch, counter)
            .map(SketchedGnModel::into_model)
            .map_err(|e| crate::solver::SolverError::Objective(e.to_string()))
    }

    fn monitor_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.gradient(x)
            .ok()
            .filter(|g| g.iter().all(|v| v.is_finite()))
    }
}

/// Classical Gauss-Newton reference run: with the identity sketch every
/// model is full-dimensional, so this is a standard trust-region
/// Gauss-Newton method costing `d` actions per iteration.
pub fn full_gn_reference(
    problem: &NlsProblem,
    stopping: crate::solver::Stopping,
) -> Result<crate::solver::RunTrace, crate::solver::SolverError> {
    let spec = crate::sketch::SketchSpec::new(
        crate::sketch::SketchKind::Identity,
        problem.dim(),
        problem.dim(),
    );
    let mut config =
        crate::solver::SolverConfig::new(crate::solver::Variant::TrustRegion, spec);
    config.stopping = stopping;
    crate::solver::run(problem, &config)
}

#[cfg(test)]
mod tests {
    use super::suite::linear_least_squares;
    use super::*;
    use crate::sketch::{SketchKind, SketchSpec};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_problem() -> NlsProblem {
        // r(x) = (x1 - 1, x2^2, x1 x2) on R^2.
        NlsProblem::new(
            "toy",
            2,
            3,
            DVector::from_vec(vec![2.0, -1.0]),
            Box::new(|x: &DVector<f64>| {
                DVector::from_vec(vec![x[0] - 1.0, x[1] * x[1], x[0] * x[1]])
            }),
            Box::new(|x: &DVector<f64>, v: &DVector<f64>| {
                DVector::from_vec(vec![v[0], 2.0 * x[1] * v[1], x[1] * v[0] + x[0] * v[1]])
            }),
            Box::new(|x: &DVector<f64>, u: &DVector<f64>| {
                DVector::from_vec(vec![u[0] + x[1] * u[2], 2.0 * x[1] * u[1] + x[0] * u[2]])
            }),
        )
        .unwrap()
    }

    #[test]
    fn value_is_half_squared_residual_norm() {
        let p = toy_problem();
        let x = DVector::from_vec(vec![2.0, -1.0]);
        // r = (1, 1, -2), so f = 0.5 (1 + 1 + 4) = 3.
        assert_relative_eq!(p.value(&x).unwrap(), 3.0, max_relative = 1e-15);
    }

    #[test]
    fn gradient_matches_hand_computation() {
        let p = toy_problem();
        let x = DVector::from_vec(vec![2.0, -1.0]);
        // J^T r with r = (1, 1, -2): first entry 1 + x2*(-2) = 3,
        // second 2*x2*1 + x1*(-2) = -6.
        let g = p.gradient(&x).unwrap();
        assert_relative_eq!(g[0], 3.0, max_relative = 1e-15);
        assert_relative_eq!(g[1], -6.0, max_relative = 1e-15);
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let p = toy_problem();
        let bad = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            p.residual(&bad),
            Err(ProblemError::DimensionMismatch { .. })
        ));
        let x = DVector::from_vec(vec![1.0, 2.0]);
        assert!(p.jacobian_action(&x, &bad).is_err());
        let short = DVector::from_vec(vec![1.0, 2.0]);
        assert!(p.jacobian_transpose_action(&x, &short).is_err());
    }

    #[test]
    fn counter_accumulates_model_build_costs() {
        let p = linear_least_squares(
            DMatrix::from_fn(6, 4, |i, j| (i + 2 * j) as f64 / 7.0),
            DVector::from_element(6, 1.0),
        );
        let mut counter = ActionCounter::new();
        let x = p.x0().clone();
        for l in [1usize, 2, 4] {
            let sketch = SketchSpec::new(SketchKind::ScaledGaussian, l, 4)
                .with_seed(l as u64).draw_seeded()
                .unwrap();
            build_gn_model(&p, &x, &sketch, &mut counter).unwrap();
        }
        assert_eq!(counter.count(), 7);
    }

    #[test]
    fn gn_model_matches_dense_computation_for_identity_sketch() {
        let a = DMatrix::from_fn(5, 3, |i, j| ((2 * i + j) as f64).sin());
        let b = DVector::from_fn(5, |i, _| (i as f64 + 0.5).cos());
        let p = linear_least_squares(a.clone(), b.clone());
        let sketch = SketchSpec::new(SketchKind::Identity, 3, 3)
            .draw_seeded()
            .unwrap();
        let mut counter = ActionCounter::new();
        let x = DVector::from_vec(vec![0.3, -0.7, 1.1]);
        let gn = build_gn_model(&p, &x, &sketch, &mut counter).unwrap();

        let r0 = &a * &x - &b;
        let ghat = a.tr_mul(&r0);
        let bhat = a.tr_mul(&a);
        assert_relative_eq!(gn.model().ghat, ghat, max_relative = 1e-14);
        assert_relative_eq!(gn.model().bhat, bhat, max_relative = 1e-14);
        assert_relative_eq!(
            gn.model().f0,
            0.5 * r0.norm_squared(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn single_coordinate_sampling_sketch_extracts_scaled_jacobian_column() {
        let a = DMatrix::from_fn(4, 6, |i, j| ((i * 7 + j * 3) as f64 / 11.0).cos());
        let b = DVector::zeros(4);
        let p = linear_least_squares(a.clone(), b);
        let x = DVector::from_fn(6, |i, _| 0.1 * i as f64);
        let mut counter = ActionCounter::new();
        // With l = 1 the sampling sketch is sqrt(d) e_j^T for some j, so
        // J S^T must be sqrt(6) times column j of A.
        for seed in 0..20 {
            let sketch = SketchSpec::new(SketchKind::ScaledSampling, 1, 6)
                .with_seed(seed).draw_seeded()
                .unwrap();
            let gn = build_gn_model(&p, &x, &sketch, &mut counter).unwrap();
            let js = gn.sketched_jacobian();
            assert_eq!(js.ncols(), 1);
            let triplets = match sketch.triplets() {
                Some(t) => t,
                None => panic!("sampling sketch must expose triplets"),
            };
            assert_eq!(triplets.len(), 1);
            let j = triplets[0].1;
            let expected = a.column(j) * 6.0_f64.sqrt();
            assert_relative_eq!(
                DVector::from(js.column(0)),
                DVector::from(expected),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn sketched_gradient_identity_holds_for_all_kinds() {
        let p = toy_problem();
        let x = DVector::from_vec(vec![0.4, 1.7]);
        let full_gradient = p.gradient(&x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for kind in [
            SketchKind::ScaledGaussian,
            SketchKind::SHashing,
            SketchKind::StableOneHashing,
            SketchKind::ScaledSampling,
            SketchKind::Identity,
        ] {
            let l = if kind == SketchKind::Identity { 2 } else { 1 };
            for _ in 0..10 {
                let sketch = SketchSpec::new(kind, l, 2)
                    .with_s(1)
                    .with_seed(rng.gen())
                    .draw_seeded()
                    .unwrap();
                let mut counter = ActionCounter::new();
                let gn = build_gn_model(&p, &x, &sketch, &mut counter).unwrap();
                let sketched = sketch.apply(&full_gradient).unwrap();
                assert_relative_eq!(gn.model().ghat, sketched, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn gn_curvature_is_exactly_symmetric() {
        let p = toy_problem();
        let x = DVector::from_vec(vec![-0.3, 0.9]);
        let sketch = SketchSpec::new(SketchKind::ScaledGaussian, 2, 2)
            .with_seed(5).draw_seeded()
            .unwrap();
        let mut counter = ActionCounter::new();
        let gn = build_gn_model(&p, &x, &sketch, &mut counter).unwrap();
        let b = &gn.model().bhat;
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(b[(i, j)].to_bits(), b[(j, i)].to_bits());
            }
        }
    }

    #[test]
    fn non_finite_residual_at_center_is_rejected() {
        let p = NlsProblem::new(
            "blowup",
            1,
            1,
            DVector::from_vec(vec![0.0]),
            Box::new(|x: &DVector<f64>| DVector::from_vec(vec![1.0 / x[0]])),
            Box::new(|x: &DVector<f64>, v: &DVector<f64>| {
                DVector::from_vec(vec![-v[0] / (x[0] * x[0])])
            }),
            Box::new(|x: &DVector<f64>, u: &DVector<f64>| {
                DVector::from_vec(vec![-u[0] / (x[0] * x[0])])
            }),
        )
        .unwrap();
        let sketch = SketchSpec::new(SketchKind::Identity, 1, 1)
            .draw_seeded()
            .unwrap();
        let mut counter = ActionCounter::new();
        let x = DVector::from_vec(vec![0.0]);
        assert!(matches!(
            build_gn_model(&p, &x, &sketch, &mut counter),
            Err(ProblemError::NonFinite(_))
        ));
        assert_eq!(counter.count(), 0);
    }

    #[test]
    fn sketch_width_mismatch_is_rejected() {
        let p = toy_problem();
        let sketch = SketchSpec::new(SketchKind::ScaledGaussian, 2, 5)
            .with_seed(1).draw_seeded()
            .unwrap();
        let mut counter = ActionCounter::new();
        assert!(build_gn_model(&p, p.x0(), &sketch, &mut counter).is_err());
    }
}
