//! A small K sweep through the harness, persisted as CSV + JSON.
//!
//! cargo run --release --example k_sweep -- [output-dir]

use std::path::PathBuf;

use igo_reuse::harness::{persist_results, run_experiment, ExperimentConfig};
use igo_reuse::{Benchmark, Variant};

fn main() -> igo_reuse::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("igo-k-sweep"));
    for k in [0, 1, 2, 3, 5] {
        let mut config = ExperimentConfig::new(Benchmark::LeadingOnes, 32, Variant::Pbil);
        config.lambda = Some(4);
        config.k = k;
        config.eta = Some(2.0 / 32.0);
        config.trials = 10;
        let s = run_experiment(&config)?;
        let (csv, _) = persist_results(&s, &out, &format!("leadingones_K{k}"))?;
        println!(
            "K={k}: {}/10, performance {:>8.0}  -> {}",
            s.successes,
            s.performance_metric.unwrap_or(f64::NAN),
            csv.display()
        );
    }
    Ok(())
}
