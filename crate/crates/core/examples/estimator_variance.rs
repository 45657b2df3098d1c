//! Two ways to average importance-sampling estimates over several proposals.
//! Weighting by the mixture density (IS2) never has more variance than
//! averaging per-proposal estimates (IS1).
//!
//! cargo run --release --example estimator_variance

use igo_reuse::reuse::estimators::{estimator_is1, estimator_is2};
use igo_reuse::{GaussianParams, SearchDistribution, TrialRng};
use nalgebra::DVector;
use rand::SeedableRng;

fn main() -> igo_reuse::Result<()> {
    let gauss = |m: f64| GaussianParams::isotropic(DVector::from_element(1, m), 1.0);
    let target = gauss(0.0)?;
    let proposals = [gauss(0.0)?, gauss(1.0)?, gauss(2.0)?];
    let mix = [1.0 / 3.0; 3];
    let mut rng = TrialRng::seed_from_u64(0);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for _ in 0..5_000 {
        let samples: Vec<_> = proposals.iter().map(|p| p.sample(50, &mut rng)).collect();
        a.push(estimator_is1(|x| x[0] * x[0], &target, &proposals, &samples, &mix)?);
        b.push(estimator_is2(|x| x[0] * x[0], &target, &proposals, &samples, &mix)?);
    }
    for (name, v) in [("IS1", &a), ("IS2", &b)] {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        println!("{name}: E[x²] ≈ {m:.4}, variance {var:.2e}");
    }
    Ok(())
}
