//! Bootstrapped error curves for coreset and uniform sampling, plus the
//! uniform budget each coreset budget is worth.
//!
//!     cargo run -p sevbench --release --example bootstrap_curves

use sevbench::estimation::{bootstrap_compare, reduction_table, write_reductions_csv, BootstrapConfig, LabeledPool};
use sevbench::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let synth = generate(&SynthConfig {
        n: 500,
        seed: 2,
        ..SynthConfig::default()
    })?;
    let pool = LabeledPool::new(synth.vectors.clone(), &synth.label_map())?;

    let mut cfg = BootstrapConfig::new(vec![20, 40, 80], 50, 9);
    cfg.uniform_extra_ks = (1..=16).map(|i| i * 25).collect();
    cfg.parallel = true;
    let curves = bootstrap_compare(&pool, &cfg)?;

    for k in curves.coreset.ks() {
        println!(
            "k={k:<4} coreset {:.4}  uniform {:.4}",
            curves.coreset.at(k).unwrap(),
            curves.uniform.at(k).unwrap()
        );
    }
    let rows = reduction_table(&curves.coreset, &curves.uniform);
    write_reductions_csv(&rows, std::io::stdout())?;
    Ok(())
}
