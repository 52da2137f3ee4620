//! Draw one sketch of each ensemble kind and print its shape, sparsity, and
//! operator norm next to the ensemble's theoretical norm bound.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsopt::sketch::theory_params;
use rsopt::{SketchKind, SketchSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (l, d) = (6, 24);
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    println!("{:<22} {:>5} {:>8} {:>10} {:>10}", "kind", "l x d", "nnz", "||S||_2", "S_max");
    for kind in [
        SketchKind::ScaledGaussian,
        SketchKind::SHashing,
        SketchKind::StableOneHashing,
        SketchKind::ScaledSampling,
    ] {
        let spec = SketchSpec::new(kind, l, d).with_s(3);
        let sketch = spec.draw(&mut rng)?;
        let nnz = match sketch.triplets() {
            Some(t) => t.len(),
            None => sketch.l() * sketch.d(),
        };
        let theory = theory_params(&spec, 0.5, Some(0.1), Some(2.0))?;
        println!(
            "{:<22} {:>2}x{:<3} {:>8} {:>10.4} {:>10.4}",
            kind.name(),
            sketch.l(),
            sketch.d(),
            nnz,
            sketch.operator_norm(),
            theory.s_max,
        );
    }

    // Sparse kinds keep exactly the advertised structure.
    let hashing = SketchSpec::new(SketchKind::SHashing, l, d).with_s(3).draw(&mut rng)?;
    let per_col = hashing.triplets().unwrap().len() / d;
    println!("\ns-hashing: {per_col} nonzeros per column, entries +-1/sqrt(3)");
    Ok(())
}
