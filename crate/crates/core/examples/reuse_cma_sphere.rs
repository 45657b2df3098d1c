//! Reuse variant A of the rank-μ CMA-ES on the Sphere, K = 0 against K = 5.
//!
//! cargo run --release --example reuse_cma_sphere

use igo_reuse::algorithms::{Cma, CmaVariant};
use igo_reuse::benchmarks::sphere;
use igo_reuse::distributions::min_eigenvalue;
use igo_reuse::harness::default_lambda;
use igo_reuse::{GaussianParams, TrialRng};
use nalgebra::DVector;
use rand::SeedableRng;

fn solve(k: usize, seed: u64) -> igo_reuse::Result<usize> {
    let d = 20;
    let mut rng = TrialRng::seed_from_u64(seed);
    let start = GaussianParams::isotropic(DVector::from_element(d, 3.0), 2.0)?;
    let mut cma = Cma::new(start, default_lambda(d), k, CmaVariant::ReuseA)?;
    let mut f = |x: &DVector<f64>| sphere(x.as_slice());
    let mut evaluations = 0;
    loop {
        let report = cma.step(&mut f, &mut rng)?;
        evaluations += report.evaluations;
        if report.best_f.is_some_and(|b| b < 1e-10) || min_eigenvalue(cma.params().cov()) < 1e-30 {
            return Ok(evaluations);
        }
    }
}

fn main() -> igo_reuse::Result<()> {
    for k in [0, 5] {
        let runs: Vec<usize> = (0..5).map(|s| solve(k, s)).collect::<Result<_, _>>()?;
        let mean = runs.iter().sum::<usize>() as f64 / runs.len() as f64;
        println!("K={k}: evaluations {runs:?}, mean {mean:.0}");
    }
    Ok(())
}
