//! Release acceptance checks, one test per criterion. Each prints a
//! `criterion N (<name>): PASS` line on success (visible with
//! `cargo test --test acceptance -- --nocapture`).

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use once_cell::sync::Lazy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rsopt::harness::{check_run, compute_profiles, load_runs, run_experiment, ExperimentConfig, LoadedRun};
use rsopt::model::{condition_atol, solve_qr_step, solve_tr_step, ReducedModel, TrStepRule};
use rsopt::nls::{suite, NlsProblem};
use rsopt::sketch::{embedding_trial, theory_params};
use rsopt::solver::{run, AdaptiveConfig, SolverConfig, Variant};
use rsopt::theory::{verify_chernoff, ComplexityInputs};
use rsopt::{EnsembleTheory, SketchKind, SketchSpec};

// ---------------------------------------------------------------------------
// criterion 1: ensemble structure
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_ensemble_structure() {
    let start = Instant::now();
    let d = 100;
    let draws = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    for l in [5usize, 25, 75] {
        for kind in [
            SketchKind::ScaledGaussian,
            SketchKind::SHashing,
            SketchKind::StableOneHashing,
            SketchKind::ScaledSampling,
        ] {
            let s = 3;
            let spec = SketchSpec::new(kind, l, d).with_s(s);
            // Gaussian's norm bound is probabilistic; the other three are
            // deterministic and checked on every draw.
            let s_max = match kind {
                SketchKind::ScaledGaussian => f64::INFINITY,
                _ => theory_params(&spec, 0.5, None, Some(1.0)).unwrap().s_max,
            };
            for _ in 0..draws {
                let sketch = spec.draw(&mut rng).unwrap();
                assert_eq!((sketch.l(), sketch.d()), (l, d));
                match kind {
                    SketchKind::ScaledGaussian => {
                        assert!(sketch.triplets().is_none(), "gaussian must be dense");
                    }
                    SketchKind::SHashing => {
                        let t = sketch.triplets().unwrap();
                        assert_eq!(t.len(), d * s, "s nonzeros per column");
                        let val = 1.0 / (s as f64).sqrt();
                        for col in 0..d {
                            let block: Vec<_> =
                                t.iter().filter(|&&(_, c, _)| c == col).collect();
                            assert_eq!(block.len(), s);
                            for w in block.windows(2) {
                                assert!(w[0].0 < w[1].0, "rows distinct and sorted");
                            }
                            assert!(block.iter().all(|&&(_, _, v)| v.abs() == val));
                        }
                    }
                    SketchKind::StableOneHashing => {
                        let t = sketch.triplets().unwrap();
                        assert_eq!(t.len(), d, "one nonzero per column");
                        let mut row_counts = vec![0usize; l];
                        let mut seen_cols = vec![false; d];
                        for &(r, c, v) in t {
                            assert!(v == 1.0 || v == -1.0);
                            row_counts[r] += 1;
                            assert!(!seen_cols[c]);
                            seen_cols[c] = true;
                        }
                        let cap = d.div_ceil(l);
                        assert!(row_counts.iter().all(|&n| n <= cap), "row load capped");
                    }
                    SketchKind::ScaledSampling => {
                        let t = sketch.triplets().unwrap();
                        assert_eq!(t.len(), l, "one nonzero per row");
                        let val = (d as f64 / l as f64).sqrt();
                        let mut seen_rows = vec![false; l];
                        let mut seen_cols = vec![false; d];
                        for &(r, c, v) in t {
                            assert_eq!(v, val);
                            assert!(!seen_rows[r] && !seen_cols[c], "distinct coordinates");
                            seen_rows[r] = true;
                            seen_cols[c] = true;
                        }
                    }
                    SketchKind::Identity => unreachable!(),
                }
                if s_max.is_finite() {
                    let norm = sketch.operator_norm();
                    assert!(
                        norm <= s_max * (1.0 + 1e-10),
                        "{kind:?} l={l}: ||S|| = {norm} exceeds S_max = {s_max}"
                    );
                }
            }
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "structure checks took {elapsed:.1}s, budget is 10s");
    println!("criterion 1 (ensemble structure): PASS ({elapsed:.1}s for 12000 draws)");
}

// ---------------------------------------------------------------------------
// criterion 2: Gaussian embedding bound
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_gaussian_embedding_bound() {
    let start = Instant::now();
    let (l, d) = (64usize, 128usize);
    let eps_s = 0.5;
    let directions = 10;
    let trials_per_direction = 10_000usize;
    let total = (directions * trials_per_direction) as f64;

    let spec = SketchSpec::new(SketchKind::ScaledGaussian, l, d);
    let bound = theory_params(&spec, eps_s, Some(0.1), None).unwrap().delta1;
    assert!((bound - (-4.0f64).exp()).abs() < 1e-15, "Table value is e^-4");

    let mut master = ChaCha8Rng::seed_from_u64(202);
    let dirs: Vec<DVector<f64>> = (0..directions)
        .map(|_| DVector::from_fn(d, |_, _| master.gen_range(-1.0..1.0f64)).normalize())
        .collect();

    let failures: f64 = dirs
        .par_iter()
        .enumerate()
        .map(|(i, y)| {
            let mut rng = ChaCha8Rng::seed_from_u64(202);
            rng.set_stream(1 + i as u64);
            let rate = embedding_trial(&spec, y, eps_s, trials_per_direction, &mut rng).unwrap();
            rate * trials_per_direction as f64
        })
        .sum();

    let rate = failures / total;
    let sigma = (bound * (1.0 - bound) / total).sqrt();
    let limit = bound + 3.0 * sigma;
    assert!(
        rate <= limit,
        "empirical failure rate {rate:.5} exceeds e^-4 + 3 sigma = {limit:.5}"
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "embedding check took {elapsed:.1}s, budget is 60s");
    println!(
        "criterion 2 (gaussian embedding bound): PASS (rate {rate:.5} <= {limit:.5}, {elapsed:.1}s)"
    );
}

// ---------------------------------------------------------------------------
// criterion 3: step-condition certificates
// ---------------------------------------------------------------------------

/// Exact spectral norm of a symmetric PSD matrix, for recomputing the Cauchy
/// floor independently of the solver's power iteration.
fn exact_psd_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &x| acc.max(x))
        .max(0.0)
}

#[test]
fn criterion_3_step_condition_certificates() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let kinds = [
        SketchKind::ScaledGaussian,
        SketchKind::SHashing,
        SketchKind::StableOneHashing,
        SketchKind::ScaledSampling,
    ];
    let kappa_t = 0.01;
    let models = 1000;

    for index in 0..models {
        let l = rng.gen_range(1..=20usize);
        let d = rng.gen_range(l..=60usize);
        let kind = kinds[rng.gen_range(0..kinds.len())];
        let spec = SketchSpec::new(kind, l, d).with_s(1 + rng.gen_range(0..3.min(l)));
        let sketch = spec.draw(&mut rng).unwrap();

        // A genuine reduced Gauss-Newton model built through the sketch:
        // ghat = (J S^T)^T r, bhat = (J S^T)^T (J S^T). Few residuals (n < l)
        // make bhat rank-deficient so the solve leans on the Gram term.
        let n = rng.gen_range(1..=l + 10);
        let scale = if index % 7 == 0 { 0.0 } else { 10f64.powi(rng.gen_range(-2..3)) };
        let jac = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0f64));
        let residual = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0f64)) * scale;
        let js = &jac * sketch.to_dense().transpose();
        let ghat = js.transpose() * &residual;
        let bhat = js.transpose() * &js;
        let f0 = 0.5 * residual.norm_squared();
        let model = ReducedModel::new(f0, ghat, bhat, sketch.gram()).unwrap();

        let alpha = 10f64.powf(rng.gen_range(-3.0..2.0));
        let atol = condition_atol(model.ghat.norm());

        let qr = solve_qr_step(&model, &sketch, alpha, kappa_t).unwrap();
        let stationarity = model.regularized_gradient(&qr.shat, alpha).norm();
        let allowed = kappa_t * model.prolonged_norm(&qr.shat) + atol;
        assert!(
            stationarity <= allowed,
            "model {index}: QR stationarity {stationarity:.3e} > {allowed:.3e}"
        );
        let q_step = model.eval_regularized(&qr.shat, alpha);
        assert!(
            q_step <= model.f0 + atol,
            "model {index}: QR model value rose by {:.3e}",
            q_step - model.f0
        );

        let rule = if index % 2 == 0 { TrStepRule::Dogleg } else { TrStepRule::Cauchy };
        let tr = solve_tr_step(&model, &sketch, alpha, rule).unwrap();
        let norm = tr.shat.norm();
        assert!(
            norm <= alpha * (1.0 + 1e-12),
            "model {index}: TR step norm {norm} exceeds alpha {alpha}"
        );
        let gnorm = model.ghat.norm();
        let bnorm = exact_psd_norm(&model.bhat);
        let radius = if bnorm == 0.0 { alpha } else { alpha.min(gnorm / bnorm) };
        let floor = 0.5 * gnorm * radius;
        assert!(
            tr.model_decrease >= floor - atol,
            "model {index}: TR decrease {:.6e} below Cauchy floor {floor:.6e}",
            tr.model_decrease
        );
    }
    println!("criterion 3 (step-condition certificates): PASS ({models} models, 0 violations)");
}

// ---------------------------------------------------------------------------
// criterion 4: full-space equivalence against an independent classical TR-GN
// ---------------------------------------------------------------------------

/// Textbook trust-region Gauss-Newton with dogleg steps, written directly on
/// dense matrices without reusing the library's model or solver code.
fn classical_tr_gn(problem: &NlsProblem, iters: usize) -> (Vec<f64>, Vec<bool>) {
    let d = problem.dim();
    let n = problem.residual_dim();
    let (theta, gamma1, alpha_max) = (1e-4, 0.5f64, 100.0f64);
    let mut alpha = alpha_max * gamma1; // p = 1
    let mut x = problem.x0().clone();
    let mut f = problem.value(&x).unwrap();
    let mut values = Vec::with_capacity(iters);
    let mut accepted = Vec::with_capacity(iters);

    for _ in 0..iters {
        let r = problem.residual(&x).unwrap();
        let mut jac = DMatrix::zeros(n, d);
        for j in 0..d {
            let mut e = DVector::zeros(d);
            e[j] = 1.0;
            jac.set_column(j, &problem.jacobian_action(&x, &e).unwrap());
        }
        let g = jac.transpose() * &r;
        let b = jac.transpose() * &jac;

        let step = classical_dogleg(&g, &b, alpha);
        let decrease = -(g.dot(&step) + 0.5 * step.dot(&(&b * &step)));
        let trial = &x + &step;
        let f_trial = problem.value(&trial).unwrap();
        let success = f_trial.is_finite() && f - f_trial >= theta * decrease;
        if success {
            x = trial;
            f = f_trial;
            alpha = (alpha / gamma1).min(alpha_max); // c = 1
        } else {
            alpha *= gamma1;
        }
        values.push(f);
        accepted.push(success);
    }
    (values, accepted)
}

fn classical_dogleg(g: &DVector<f64>, b: &DMatrix<f64>, alpha: f64) -> DVector<f64> {
    let gnorm = g.norm();
    if gnorm == 0.0 {
        return DVector::zeros(g.len());
    }
    let gbg = g.dot(&(b * g));
    // Cauchy point: unconstrained minimizer along -g, clipped to the region.
    let t = if gbg > 0.0 {
        (gnorm * gnorm / gbg).min(alpha / gnorm)
    } else {
        alpha / gnorm
    };
    let cauchy = -g * t;
    if gbg <= 0.0 {
        return cauchy;
    }
    let Some(chol) = b.clone().cholesky() else {
        return cauchy;
    };
    let newton = chol.solve(&(-g));
    if newton.norm() <= alpha {
        return newton;
    }
    let t_star = gnorm * gnorm / gbg;
    let s_u = -g * t_star;
    let u_norm = s_u.norm();
    if u_norm >= alpha {
        return cauchy;
    }
    // ||s_u + tau (newton - s_u)|| = alpha with tau in [0, 1].
    let diff = &newton - &s_u;
    let a = diff.norm_squared();
    let bq = 2.0 * s_u.dot(&diff);
    let cq = u_norm * u_norm - alpha * alpha;
    let disc = (bq * bq - 4.0 * a * cq).max(0.0);
    let tau = (-bq + disc.sqrt()) / (2.0 * a);
    if !(0.0..=1.0).contains(&tau) {
        return cauchy;
    }
    let candidate = s_u + diff * tau;
    let cauchy_decrease = -(g.dot(&cauchy) + 0.5 * cauchy.dot(&(b * &cauchy)));
    let cand_decrease = -(g.dot(&candidate) + 0.5 * candidate.dot(&(b * &candidate)));
    if cand_decrease >= cauchy_decrease {
        candidate
    } else {
        cauchy
    }
}

#[test]
fn criterion_4_full_space_equivalence() {
    let iters = 100;
    for problem in [
        suite::broyden_tridiagonal(20).unwrap(),
        suite::discrete_boundary_value(20).unwrap(),
        suite::extended_rosenbrock(20).unwrap(),
    ] {
        let d = problem.dim();
        let spec = SketchSpec::new(SketchKind::Identity, d, d);
        let mut config = SolverConfig::new(Variant::TrustRegion, spec);
        config.stopping.grad_tol = 0.0;
        config.stopping.max_iters = iters;
        let trace = run(&problem, &config).unwrap();
        assert_eq!(trace.records.len(), iters, "{}: run stopped early", problem.name());

        let (classical_f, classical_ok) = classical_tr_gn(&problem, iters);
        for (k, record) in trace.records.iter().enumerate() {
            assert_eq!(
                record.successful,
                classical_ok[k],
                "{}: success pattern diverges at iteration {k}",
                problem.name()
            );
            let diff = (record.f_after - classical_f[k]).abs();
            let tol = 1e-12 * classical_f[k].abs().max(1.0);
            assert!(
                diff <= tol,
                "{}: f diverges at iteration {k}: {} vs {}",
                problem.name(),
                record.f_after,
                classical_f[k]
            );
        }
    }
    println!("criterion 4 (full-space equivalence): PASS (3 problems x {iters} iterations)");
}

// ---------------------------------------------------------------------------
// shared benchmark grid for criteria 5 and 6
// ---------------------------------------------------------------------------

struct Grid {
    _dir: tempfile::TempDir,
    runs: Vec<LoadedRun>,
    tau: f64,
    budget_multiplier: f64,
}

const GRID_PROBLEMS: [&str; 10] = [
    "broyden_tridiagonal",
    "broyden_banded",
    "extended_rosenbrock",
    "discrete_boundary_value",
    "discrete_integral_equation",
    "trigonometric",
    "bratu_2d",
    "oscillating_path",
    "chained_freudenstein_roth",
    "penalty_1",
];

static GRID: Lazy<Grid> = Lazy::new(|| {
    let mut toml = String::from(
        "output_dir = \"placeholder\"\nseeds = 20\ntau = 0.1\nbudget_multiplier = 50.0\n",
    );
    for problem in GRID_PROBLEMS {
        toml.push_str(&format!("\n[[problems]]\nname = \"{problem}\"\ndim = 100\n"));
    }
    toml.push_str("\n[[solvers]]\nvariant = \"trust_region\"\nensemble = \"identity\"\n");
    for ensemble in ["gaussian", "s_hashing", "stable_one_hashing", "sampling"] {
        for fraction in ["0.25", "0.5", "0.75"] {
            toml.push_str(&format!(
                "\n[[solvers]]\nvariant = \"trust_region\"\nensemble = \"{ensemble}\"\nl_fraction = {fraction}\n"
            ));
        }
    }
    let dir = tempfile::tempdir().expect("tempdir");
    let mut config = ExperimentConfig::from_toml(&toml).expect("grid config");
    config.output_dir = dir.path().join("bench");
    run_experiment(&config).expect("grid experiment");
    let loaded = load_runs(&config.output_dir).expect("load grid");
    assert!(loaded.missing.is_empty(), "missing traces: {:?}", loaded.missing);
    assert_eq!(loaded.runs.len(), GRID_PROBLEMS.len() * 13 * 20);
    Grid {
        _dir: dir,
        runs: loaded.runs,
        tau: loaded.tau,
        budget_multiplier: loaded.budget_multiplier,
    }
});

#[test]
fn criterion_5_monotone_decrease_and_lattice() {
    let grid = &*GRID;
    let violations: Vec<String> = grid
        .runs
        .par_iter()
        .flat_map(|run| {
            check_run(run)
                .into_iter()
                .map(|v| format!("{}/{}/seed{}: {v}", run.trace.problem, run.meta.solver, run.meta.seed))
                .collect::<Vec<_>>()
        })
        .collect();
    assert!(violations.is_empty(), "invariant violations:\n{}", violations.join("\n"));
    println!(
        "criterion 5 (monotone decrease + step-size lattice): PASS ({} runs, 0 violations)",
        grid.runs.len()
    );
}

#[test]
fn criterion_6_desk_scale_convergence() {
    let grid = &*GRID;
    let zero_residual: Vec<LoadedRun> = grid
        .runs
        .iter()
        .filter(|r| r.meta.zero_residual)
        .cloned()
        .collect();
    assert_eq!(zero_residual.len(), 8 * 13 * 20, "8 zero-residual problems expected");

    let profiles = compute_profiles(&zero_residual, grid.tau, grid.budget_multiplier).unwrap();
    assert_eq!(profiles.len(), 13);

    let full = profiles
        .iter()
        .find(|p| p.solver == "trust_region_identity_l1")
        .expect("full GN profile");
    let full_terminal = full.terminal();
    assert!(
        full_terminal >= 0.8,
        "full GN solves only {:.0}% within 50d actions",
        full_terminal * 100.0
    );

    for profile in &profiles {
        let fractions: Vec<f64> = profile.breakpoints.iter().map(|&(_, f)| f).collect();
        assert!(
            fractions.windows(2).all(|w| w[0] <= w[1]),
            "{}: data profile is not monotone",
            profile.solver
        );
        if profile.solver != full.solver {
            assert!(
                profile.terminal() <= full_terminal + 1e-12,
                "{}: terminal {:.3} exceeds full GN's {:.3}",
                profile.solver,
                profile.terminal(),
                full_terminal
            );
        }
    }
    println!(
        "criterion 6 (desk-scale convergence): PASS (full GN terminal {:.2}, 12 sketched profiles ordered)",
        full_terminal
    );
}

// ---------------------------------------------------------------------------
// criterion 7: Chernoff verifier
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_chernoff_tail_bound() {
    let trials = 100_000;
    for delta_s in [0.05, 0.1] {
        for delta1 in [0.2, 0.3] {
            for n in [100u64, 200] {
                let check = verify_chernoff(delta_s, delta1, n, trials, 707).unwrap();
                let sigma = (check.bound * (1.0 - check.bound) / trials as f64).sqrt();
                assert!(
                    check.empirical_rate <= check.bound + 3.0 * sigma,
                    "cell ({delta_s}, {delta1}, {n}): rate {:.3e} > bound {:.3e} + 3 sigma",
                    check.empirical_rate,
                    check.bound
                );
            }
        }
    }
    println!("criterion 7 (chernoff tail bound): PASS (8 cells x {trials} chains)");
}

// ---------------------------------------------------------------------------
// criterion 8: bound calculator fixtures and scaling
// ---------------------------------------------------------------------------

fn calculator_fixture(variant: Variant) -> ComplexityInputs {
    let ensemble = EnsembleTheory { eps_s: 0.5, delta1: 0.1, delta2: 0.0, s_max: 2.0, nu: None };
    let mut inputs = ComplexityInputs::new(variant, 1e-2, 10.0, ensemble);
    inputs.theta = 0.5;
    inputs
}

fn assert_close(label: &str, actual: f64, frozen: f64) {
    let diff = (actual - frozen).abs();
    assert!(
        diff <= 1e-12 * frozen.abs().max(1e-300),
        "{label}: {actual:.17e} deviates from frozen {frozen:.17e}"
    );
}

#[test]
fn criterion_8_bound_calculator() {
    // Frozen values computed independently from the closed-form expressions.
    let qr = calculator_fixture(Variant::QuadraticRegularization).iteration_bound().unwrap();
    assert_close("qr decrease floor", qr.decrease_floor, 2.471332053908253e-10);
    assert_close("qr n_star", qr.n_star, 674400133399.9995);
    assert_eq!(qr.iterations, 674400133400);

    let tr = calculator_fixture(Variant::TrustRegion).iteration_bound().unwrap();
    assert_close("tr alpha_low", tr.alpha_low, 2.9462782549439484e-4);
    assert_close("tr decrease floor", tr.decrease_floor, 1.6858739404357614e-7);
    assert_close("tr n_star", tr.n_star, 988607083.5859529);

    for variant in [Variant::QuadraticRegularization, Variant::TrustRegion] {
        // N grows monotonically as eps^-2 grows.
        let mut previous = 0.0;
        for k in 0..6 {
            let mut inputs = calculator_fixture(variant);
            inputs.eps = 1e-2 / 2f64.powi(k);
            let n = inputs.iteration_bound().unwrap().n_star;
            assert!(n > previous, "{variant}: N not increasing in eps^-2");
            previous = n;
        }
        // Halving eps roughly quadruples N while the decrease term dominates.
        let coarse = calculator_fixture(variant).iteration_bound().unwrap();
        let mut fine = calculator_fixture(variant);
        fine.eps /= 2.0;
        let ratio = fine.iteration_bound().unwrap().n_star / coarse.n_star;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "{variant}: eps-halving ratio {ratio} outside [3.5, 4.5]"
        );
    }

    // N shrinks monotonically as the per-iteration decrease floor h grows
    // (swept through kappa_t, which only enters through h).
    let mut sweep: Vec<(f64, f64)> = [1.0, 0.3, 0.1, 0.01, 0.001]
        .iter()
        .map(|&kappa_t| {
            let mut inputs = calculator_fixture(Variant::QuadraticRegularization);
            inputs.kappa_t = kappa_t;
            let report = inputs.iteration_bound().unwrap();
            (report.decrease_floor, report.n_star)
        })
        .collect();
    sweep.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    assert!(
        sweep.windows(2).all(|w| w[0].1 >= w[1].1),
        "N is not monotone decreasing in the decrease floor h"
    );

    println!("criterion 8 (bound calculator): PASS (frozen fixtures + scaling laws)");
}

// ---------------------------------------------------------------------------
// criterion 9: adaptive subspace growth
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_adaptive_beats_fixed() {
    let d = 100;
    let problem = suite::bratu_2d(d).unwrap();
    let budget = 50 * d as u64;
    let seeds = 20;

    let base = |seed: u64| {
        let spec = SketchSpec::new(SketchKind::ScaledGaussian, 10, d).with_seed(seed);
        let mut config = SolverConfig::new(Variant::TrustRegion, spec);
        config.stopping.grad_tol = 0.0;
        config.stopping.max_iters = 100_000;
        config.stopping.action_budget = Some(budget);
        config
    };

    let wins: usize = (0..seeds)
        .into_par_iter()
        .filter(|&seed| {
            let fixed = run(&problem, &base(seed)).unwrap();
            let mut config = base(seed);
            config.adaptive =
                Some(AdaptiveConfig { kappa: 0.7, l_increment: 10, l_max: None });
            let adaptive = run(&problem, &config).unwrap();
            adaptive.final_value <= fixed.final_value
        })
        .count();

    assert!(
        wins * 10 >= seeds as usize * 7,
        "adaptive no worse than fixed l on only {wins}/{seeds} seeds"
    );
    println!(
        "criterion 9 (adaptive subspace growth): PASS (adaptive <= fixed on {wins}/{seeds} seeds)"
    );
}
