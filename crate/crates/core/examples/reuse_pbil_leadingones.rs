//! Driving PBIL by hand through ask/tell on LeadingOnes.
//!
//! cargo run --release --example reuse_pbil_leadingones

use igo_reuse::algorithms::Pbil;
use igo_reuse::benchmarks::leading_ones;
use igo_reuse::{BernoulliParams, TrialRng};
use rand::SeedableRng;

fn main() -> igo_reuse::Result<()> {
    let d = 32;
    let mut rng = TrialRng::seed_from_u64(3);
    // λ = 8, η = 4/d, reuse the last two populations, step threshold T = 0.25
    let mut pbil = Pbil::new(BernoulliParams::uniform(d, 0.5)?, 8, 4.0 / d as f64, 2, 0.25, true)?;
    let mut evaluations = 0;
    for gen in 0.. {
        let xs = pbil.ask(&mut rng);
        let fs: Vec<f64> = xs.iter().map(|x| leading_ones(x)).collect();
        evaluations += xs.len();
        let best = fs.iter().copied().fold(0.0, f64::max);
        if gen % 50 == 0 || best == d as f64 {
            let mean_theta = pbil.theta().theta().iter().sum::<f64>() / d as f64;
            println!("gen {gen:4}  best {best:2}  mean θ {mean_theta:.3}  evals {evaluations}");
        }
        if best == d as f64 {
            break;
        }
        pbil.tell(xs, &fs)?;
    }
    Ok(())
}
