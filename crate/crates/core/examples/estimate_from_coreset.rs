//! Selects a weighted coreset, labels only its support and estimates the
//! pool's severity distribution.
//!
//!     cargo run -p sevbench --release --example estimate_from_coreset

use std::collections::BTreeMap;

use sevbench::coreset::{solve_giga, solve_uniform};
use sevbench::estimation::{estimate_proportions, rmse};
use sevbench::model::{EstimatorKind, SeverityLabel};
use sevbench::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pool = generate(&SynthConfig {
        n: 600,
        dim: 128,
        seed: 3,
        ..SynthConfig::default()
    })?;
    let truth = pool.truth();
    let ids: Vec<String> = pool.interactions.iter().map(|i| i.id.clone()).collect();
    let gold = pool.label_map();

    for k in [50, 150] {
        let coreset = solve_giga(&pool.vectors, k)?;
        let uniform = solve_uniform(ids.len(), k, 1)?;
        // Only the sampled items would be sent for annotation.
        let labelled = |support: &[usize]| -> BTreeMap<String, SeverityLabel> {
            support.iter().map(|&i| (ids[i].clone(), gold[&ids[i]])).collect()
        };
        let c = estimate_proportions(&labelled(&coreset.support), &coreset, &ids, EstimatorKind::Coreset)?;
        let u = estimate_proportions(&labelled(&uniform.support), &uniform, &ids, EstimatorKind::Uniform)?;
        println!(
            "k={k:<4} coreset support {:>3}  rmse {:.4}   uniform rmse {:.4}",
            coreset.support.len(),
            rmse(&c, &truth)?,
            rmse(&u, &truth)?
        );
    }
    println!("truth: {:?}", truth.as_array());
    Ok(())
}
