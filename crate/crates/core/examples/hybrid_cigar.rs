//! The rank-one + rank-μ hybrid against reuse variant D on the Cigar.
//!
//! cargo run --release --example hybrid_cigar

use igo_reuse::harness::{run_experiment, ExperimentConfig};
use igo_reuse::{Benchmark, CmaVariant, Variant};

fn main() -> igo_reuse::Result<()> {
    for (variant, k) in [(CmaVariant::PureRankMu, 0), (CmaVariant::Hybrid, 0), (CmaVariant::ReuseD, 0), (CmaVariant::ReuseD, 3)] {
        let mut config = ExperimentConfig::new(Benchmark::Cigar, 20, Variant::Cma(variant));
        config.k = k;
        config.trials = 5;
        let s = run_experiment(&config)?;
        println!(
            "{:>14} K={k}: {}/5 solved, mean evaluations {:.0}",
            variant.name(),
            s.successes,
            s.mean_evals_success.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
