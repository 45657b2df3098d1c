//! Compact GA on OneMax with and without sample reuse.
//!
//! cargo run --release --example cga_onemax

use igo_reuse::harness::{run_experiment, ExperimentConfig};
use igo_reuse::{Benchmark, Variant};

fn main() -> igo_reuse::Result<()> {
    let d = 128;
    for k in [0, 1, 3] {
        let mut config = ExperimentConfig::new(Benchmark::OneMax, d, Variant::Cga);
        config.k = k;
        config.eta = Some(1.0 / d as f64);
        config.trials = 20;
        let s = run_experiment(&config)?;
        println!(
            "K={k}: {}/{} solved, {:.0} evaluations per success",
            s.successes,
            s.trials.len(),
            s.performance_metric.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
