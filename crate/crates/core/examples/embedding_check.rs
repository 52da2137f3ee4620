//! Monte Carlo check of the one-sided embedding property: for a Gaussian
//! sketch, `||S v||^2 >= (1 - eps_s) ||v||^2` fails with probability at most
//! `exp(-eps_s^2 l / 4)` for any fixed vector `v`.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsopt::sketch::theory_params;
use rsopt::{SketchKind, SketchSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (l, d) = (64, 256);
    let eps_s = 0.5;
    let trials = 20_000;

    let spec = SketchSpec::new(SketchKind::ScaledGaussian, l, d);
    let bound = theory_params(&spec, eps_s, Some(0.1), None)?.delta1;

    // A fixed direction; sketches are rotation-invariant so any choice works.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let v = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0)).normalize();

    let mut failures = 0u64;
    for _ in 0..trials {
        let sketch = spec.draw(&mut rng)?;
        let embedded = sketch.apply(&v)?;
        if embedded.norm_squared() < 1.0 - eps_s {
            failures += 1;
        }
    }

    let rate = failures as f64 / trials as f64;
    let sigma = (bound * (1.0 - bound) / trials as f64).sqrt();
    println!("l = {l}, d = {d}, eps_s = {eps_s}, trials = {trials}");
    println!("theoretical bound  exp(-eps_s^2 l / 4) = {bound:.6}");
    println!("empirical failure rate                 = {rate:.6}");
    println!("bound + 3 sigma                        = {:.6}", bound + 3.0 * sigma);
    assert!(rate <= bound + 3.0 * sigma, "embedding failed more often than theory allows");
    println!("within tolerance: yes");
    Ok(())
}
