//! Run a small benchmarking experiment in-process and compute data profiles:
//! for each solver, the fraction of (problem, seed) runs solved to accuracy
//! tau within `alpha * d` Jacobian actions, as a function of alpha.

use rsopt::harness::{compute_profiles, emit_plot_data, load_runs, ExperimentConfig};

const CONFIG: &str = r#"
output_dir = "target/data_profiles_example"
seeds = 5
tau = 0.1
budget_multiplier = 50.0

[[problems]]
name = "broyden_tridiagonal"
dim = 60

[[problems]]
name = "discrete_boundary_value"
dim = 60

[[problems]]
name = "extended_rosenbrock"
dim = 60

[[solvers]]
variant = "trust_region"
ensemble = "identity"

[[solvers]]
variant = "trust_region"
ensemble = "gaussian"
l_fraction = 0.5

[[solvers]]
variant = "trust_region"
ensemble = "s_hashing"
l_fraction = 0.5
s = 3
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig::from_toml(CONFIG)?;
    let summaries = rsopt::harness::run_experiment(&config)?;
    println!("ran {} traces into {}", summaries.len(), config.output_dir.display());

    let loaded = load_runs(&config.output_dir)?;
    let profiles = compute_profiles(&loaded.runs, loaded.tau, loaded.budget_multiplier)?;

    println!("\ntau = {}, budget = {} * d actions", loaded.tau, loaded.budget_multiplier);
    println!("{:<38} {:>9} {:>9} {:>9}", "solver", "alpha=5", "alpha=20", "alpha=50");
    for profile in &profiles {
        println!(
            "{:<38} {:>9.3} {:>9.3} {:>9.3}",
            profile.solver,
            profile.value_at(5.0),
            profile.value_at(20.0),
            profile.terminal(),
        );
    }

    let out = config.output_dir.join("profiles");
    let files = emit_plot_data(&profiles, &out)?;
    println!("\nwrote {} plot files under {}", files.len(), out.display());
    Ok(())
}
