//! Importance mixing recycles part of the previous population, so a step can
//! cost fewer than λ evaluations. With a small population most points end up
//! recycled and the covariance tends to collapse before the optimum; a larger
//! population avoids that.
//!
//! cargo run --release --example importance_mixing

use igo_reuse::algorithms::{Cma, CmaVariant};
use igo_reuse::benchmarks::ellipsoid;
use igo_reuse::distributions::min_eigenvalue;
use igo_reuse::{Error, GaussianParams, TrialRng};
use nalgebra::DVector;
use rand::SeedableRng;

fn main() -> igo_reuse::Result<()> {
    let d = 10;
    let start = GaussianParams::isotropic(DVector::from_element(d, 3.0), 2.0)?;
    for lambda in [10, 80] {
        for variant in [CmaVariant::PureRankMu, CmaVariant::ImportanceMixing] {
            let mut rng = TrialRng::seed_from_u64(11);
            let mut cma = Cma::new(start.clone(), lambda, 0, variant)?;
            let mut f = |x: &DVector<f64>| ellipsoid(x.as_slice());
            let (mut evaluations, mut steps, mut best) = (0, 0, f64::INFINITY);
            let outcome = loop {
                match cma.step(&mut f, &mut rng) {
                    Ok(report) => {
                        evaluations += report.evaluations;
                        steps += 1;
                        best = report.best_f.map_or(best, |b| b.min(best));
                    }
                    Err(Error::NotPositiveDefinite) => break "covariance collapsed",
                    Err(e) => return Err(e),
                }
                if best < 1e-10 {
                    break "solved";
                }
                if min_eigenvalue(cma.params().cov()) < 1e-30 {
                    break "covariance collapsed";
                }
            };
            println!(
                "λ={lambda:3} {:>17}: {outcome} after {steps} steps, {evaluations} evaluations ({:.1} per step), best {best:.2e}",
                variant.name(),
                evaluations as f64 / steps.max(1) as f64
            );
        }
    }
    Ok(())
}
