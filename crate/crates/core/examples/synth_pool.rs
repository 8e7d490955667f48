//! Generates a clustered synthetic pool with known severity labels.
//!
//!     cargo run -p sevbench --example synth_pool

use sevbench::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pool = generate(&SynthConfig {
        n: 400,
        clusters: 4,
        seed: 11,
        ..SynthConfig::default()
    })?;

    println!("{} interactions, {}-d vectors", pool.interactions.len(), pool.vectors[0].dim());
    let first = &pool.interactions[0];
    println!("first: {} | {:?} -> {:?}", first.id, first.query, first.answer);
    for (label, p) in &pool.truth().category_proportions {
        println!("  {label:?}: {p:.3}");
    }
    Ok(())
}
