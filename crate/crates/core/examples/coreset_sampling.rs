//! Compares the greedy coreset, a uniform sample and the exhaustive oracle
//! on the same pool.
//!
//!     cargo run -p sevbench --example coreset_sampling

use sevbench::coreset::{solve_giga, solve_oracle, solve_uniform, Atoms};
use sevbench::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pool = generate(&SynthConfig {
        n: 12,
        dim: 4,
        clusters: 3,
        seed: 5,
        ..SynthConfig::default()
    })?;
    let atoms = Atoms::from_vectors(&pool.vectors)?;
    let scale = atoms.total().iter().map(|x| x * x).sum::<f64>();

    println!("{:>2}  {:>10}  {:>10}  {:>10}", "k", "giga", "uniform", "oracle");
    for k in 1..=4 {
        let giga = solve_giga(&pool.vectors, k)?;
        let uniform = solve_uniform(pool.vectors.len(), k, 0)?.evaluate(&atoms)?;
        let oracle = solve_oracle(&pool.vectors, k)?;
        let rel = |o: Option<f64>| o.unwrap_or(f64::NAN) / scale;
        println!(
            "{k:>2}  {:>10.2e}  {:>10.2e}  {:>10.2e}",
            rel(giga.objective),
            rel(uniform.objective),
            rel(oracle.objective)
        );
    }

    let giga = solve_giga(&pool.vectors, 5)?;
    println!("support at k=5: {:?}", giga.support);
    for (i, w) in &giga.weights {
        println!("  {} -> {w:.3}", pool.vectors[*i].interaction_id);
    }
    Ok(())
}
