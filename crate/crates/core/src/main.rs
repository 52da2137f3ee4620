//! Command-line front end: run experiments, compute data profiles, evaluate
//! complexity bounds, and re-check invariants on persisted runs.
//!
//! Exit codes: 0 on success, 1 for configuration errors (including argument
//! parsing), 2 for runtime failures (I/O, solver errors, failed checks).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use rsopt::harness::{
    check_run, compute_profiles, emit_plot_data, load_runs, run_experiment, ExperimentConfig,
    HarnessError, INDEX_FILE,
};
use rsopt::sketch::{theory_params, SketchKind, SketchSpec};
use rsopt::solver::Variant;
use rsopt::theory::{verify_chernoff, ComplexityInputs, TheoryError};

#[derive(Parser)]
#[command(
    name = "rsopt",
    version,
    about = "Random-subspace solvers for nonlinear least squares"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (problem, solver, seed) cell of an experiment config.
    Run(RunArgs),
    /// Compute data profiles from a persisted experiment and emit plot data.
    Profile(ProfileArgs),
    /// Evaluate the iteration-complexity bound for one configuration.
    Theory(TheoryArgs),
    /// Re-check invariants of persisted runs and the Monte Carlo tail bound.
    Check(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the number of seeds per cell.
    #[arg(long)]
    seeds: Option<u32>,
    /// Override the solve-test accuracy.
    #[arg(long)]
    tau: Option<f64>,
    /// Override the per-run action budget multiplier.
    #[arg(long)]
    budget_multiplier: Option<f64>,
}

#[derive(Args)]
struct ProfileArgs {
    /// Experiment output directory (contains index.jsonl).
    #[arg(long)]
    runs: PathBuf,
    /// Accuracy override; defaults to the experiment's own tau.
    #[arg(long)]
    tau: Option<f64>,
    /// Output directory for profile data; defaults to RUNS/profiles.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    /// Solver variant: trust_region or quadratic_regularization.
    #[arg(long)]
    variant: String,
    /// Sketch ensemble name (gaussian, s_hashing, stable_one_hashing,
    /// sampling, identity).
    #[arg(long)]
    ensemble: String,
    /// Ambient dimension.
    #[arg(long)]
    dim: usize,
    /// Subspace dimension l.
    #[arg(long)]
    subspace: usize,
    /// Nonzeros per column for s-hashing.
    #[arg(long)]
    s: Option<usize>,
    /// Embedding distortion of the ensemble.
    #[arg(long, default_value_t = 0.1)]
    eps_s: f64,
    /// Norm-bound failure probability (required for the gaussian ensemble).
    #[arg(long)]
    delta2: Option<f64>,
    /// Gradient flatness ratio (required for the sampling ensemble).
    #[arg(long)]
    nu: Option<f64>,
    /// Target gradient accuracy.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Objective gap f(x0) - f_low.
    #[arg(long, default_value_t = 1.0)]
    f0_gap: f64,
    /// Gradient Lipschitz estimate.
    #[arg(long, default_value_t = 1.0)]
    lipschitz: f64,
    /// Bound on model Hessian norms.
    #[arg(long, default_value_t = 1.0)]
    b_max: f64,
    /// Concentration slack in (0, 1).
    #[arg(long, default_value_t = 0.1)]
    slack: f64,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    c: Option<u32>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    alpha_max: Option<f64>,
    #[arg(long)]
    kappa_t: Option<f64>,
    /// Also report the iterations needed for this failure probability.
    #[arg(long)]
    confidence: Option<f64>,
}

#[derive(Args)]
struct CheckArgs {
    /// Persisted experiment to replay invariants on.
    #[arg(long)]
    runs: Option<PathBuf>,
    /// Monte Carlo chains per tail-bound cell.
    #[arg(long, default_value_t = 20_000)]
    trials: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Skip the Monte Carlo tail check.
    #[arg(long)]
    skip_chernoff: bool,
}

/// A command failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<HarnessError> for Failure {
    fn from(err: HarnessError) -> Self {
        Failure { code: err.exit_code() as u8, message: err.to_string() }
    }
}

impl From<TheoryError> for Failure {
    fn from(err: TheoryError) -> Self {
        Failure::config(err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Profile(args) => cmd_profile(args),
        Command::Theory(args) => cmd_theory(args),
        Command::Check(args) => cmd_check(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let mut config = ExperimentConfig::from_toml_file(&args.config)?;
    if let Some(output_dir) = args.output_dir {
        config.output_dir = output_dir;
    }
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    if let Some(tau) = args.tau {
        config.tau = tau;
    }
    if let Some(budget_multiplier) = args.budget_multiplier {
        config.budget_multiplier = budget_multiplier;
    }
    let summaries = run_experiment(&config)?;
    println!("wrote {} traces under {}", summaries.len(), config.output_dir.display());
    let mut solvers: Vec<&str> = Vec::new();
    for summary in &summaries {
        if !solvers.contains(&summary.solver.as_str()) {
            solvers.push(&summary.solver);
        }
    }
    for solver in solvers {
        let rows: Vec<_> = summaries.iter().filter(|s| s.solver == solver).collect();
        let mean_final = rows.iter().map(|s| s.final_value).sum::<f64>() / rows.len() as f64;
        let mean_actions =
            rows.iter().map(|s| s.total_actions).sum::<u64>() as f64 / rows.len() as f64;
        println!(
            "  {solver}: {} runs, mean final f = {mean_final:.6e}, mean actions = {mean_actions:.1}",
            rows.len()
        );
    }
    println!("index: {}", config.output_dir.join(INDEX_FILE).display());
    Ok(())
}

fn cmd_profile(args: ProfileArgs) -> Result<(), Failure> {
    let loaded = load_runs(&args.runs)?;
    for file in &loaded.missing {
        eprintln!("warning: missing trace {file}");
    }
    if loaded.runs.is_empty() {
        return Err(Failure::runtime("no readable runs in the experiment directory"));
    }
    let tau = args.tau.unwrap_or(loaded.tau);
    let profiles = compute_profiles(&loaded.runs, tau, loaded.budget_multiplier)?;
    println!("data profiles at tau = {tau} over {} runs", loaded.runs.len());
    println!("{:<45} {:>8} {:>9}", "solver", "solved", "terminal");
    for profile in &profiles {
        let solved = profile.entries.iter().filter(|e| e.actions.is_some()).count();
        println!(
            "{:<45} {:>5}/{:<3} {:>8.3}",
            profile.solver,
            solved,
            profile.entries.len(),
            profile.terminal()
        );
    }
    let out = args.out.unwrap_or_else(|| args.runs.join("profiles"));
    let written = emit_plot_data(&profiles, &out)?;
    println!("wrote {} files under {}", written.len(), out.display());
    Ok(())
}

fn parse_variant(name: &str) -> Result<Variant, Failure> {
    match name {
        "trust_region" | "tr" => Ok(Variant::TrustRegion),
        "quadratic_regularization" | "qr" => Ok(Variant::QuadraticRegularization),
        other => Err(Failure::config(format!(
            "unknown variant {other:?}; use trust_region or quadratic_regularization"
        ))),
    }
}

fn cmd_theory(args: TheoryArgs) -> Result<(), Failure> {
    let variant = parse_variant(&args.variant)?;
    let kind = SketchKind::parse(&args.ensemble).map_err(|e| Failure::config(e.to_string()))?;
    let mut spec = SketchSpec::new(kind, args.subspace, args.dim);
    if let Some(s) = args.s {
        spec = spec.with_s(s);
    }
    let ensemble = theory_params(&spec, args.eps_s, args.delta2, args.nu)
        .map_err(|e| Failure::config(e.to_string()))?;
    let mut inputs = ComplexityInputs::new(variant, args.eps, args.f0_gap, ensemble);
    inputs.lipschitz = args.lipschitz;
    inputs.b_max = args.b_max;
    inputs.slack = args.slack;
    if let Some(theta) = args.theta {
        inputs.theta = theta;
    }
    if let Some(gamma1) = args.gamma1 {
        inputs.gamma1 = gamma1;
    }
    if let Some(c) = args.c {
        inputs.c = c;
    }
    if let Some(p) = args.p {
        inputs.p = p;
    }
    if let Some(alpha_max) = args.alpha_max {
        inputs.alpha_max = alpha_max;
    }
    if let Some(kappa_t) = args.kappa_t {
        inputs.kappa_t = kappa_t;
    }
    let report = inputs.iteration_bound()?;
    let confidence_iterations = args
        .confidence
        .map(|delta| report.iterations_for_confidence(delta))
        .transpose()?;
    let mut output = serde_json::json!({ "inputs": inputs, "report": report });
    if let (Some(delta), Some(n)) = (args.confidence, confidence_iterations) {
        output["iterations_for_confidence"] =
            serde_json::json!({ "delta": delta, "iterations": n });
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&output).map_err(|e| Failure::runtime(e.to_string()))?
    );
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<(), Failure> {
    let mut failed = false;
    if let Some(runs_dir) = &args.runs {
        let loaded = load_runs(runs_dir)?;
        let mut violations = 0usize;
        for run in &loaded.runs {
            for violation in check_run(run) {
                let trace = format!(
                    "{}/{}/seed{}",
                    run.trace.problem, run.meta.solver, run.meta.seed
                );
                println!("violation in {trace}: {violation}");
                violations += 1;
            }
        }
        for file in &loaded.missing {
            println!("violation: missing trace {file}");
            violations += 1;
        }
        println!(
            "replayed {} traces: {violations} violations",
            loaded.runs.len()
        );
        failed |= violations > 0;
    }
    if !args.skip_chernoff {
        for failure_rate in [0.05, 0.1] {
            for slack in [0.2, 0.3] {
                for chain_length in [100u64, 200] {
                    let check = verify_chernoff(
                        failure_rate,
                        slack,
                        chain_length,
                        args.trials,
                        args.seed,
                    )?;
                    let sigma =
                        (check.bound * (1.0 - check.bound) / args.trials as f64).sqrt();
                    let ok = check.empirical_rate <= check.bound + 3.0 * sigma;
                    println!(
                        "tail cell (delta_s={failure_rate}, slack={slack}, n={chain_length}): \
                         empirical {:.5} vs bound {:.5} {}",
                        check.empirical_rate,
                        check.bound,
                        if ok { "OK" } else { "EXCEEDED" }
                    );
                    failed |= !ok;
                }
            }
        }
    }
    if failed {
        Err(Failure::runtime("check failed"))
    } else {
        println!("check passed");
        Ok(())
    }
}
