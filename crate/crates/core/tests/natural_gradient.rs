mod common;

use common::{bernoulli_fisher_nat_grad, gaussian_fisher_nat_grad, random_spd, relative_error};
use igo_reuse::{BernoulliParams, GaussianParams, SearchDistribution, TrialRng};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

#[test]
fn bernoulli_closed_form_matches_fisher_oracle() {
    let mut rng = TrialRng::seed_from_u64(31);
    for d in 1..=3 {
        for _ in 0..30 {
            let theta: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..0.95)).collect();
            let p = BernoulliParams::new(theta.clone()).unwrap();
            let x = p.sample(1, &mut rng).pop().unwrap();
            let want = bernoulli_fisher_nat_grad(&theta, &x);
            let got = p.nat_grad(&x).unwrap();
            assert!(relative_error(&got, &want) < 1e-4, "d={d} θ={theta:?} x={x:?}");
        }
    }
}

#[test]
fn gaussian_closed_form_matches_fisher_oracle() {
    let mut rng = TrialRng::seed_from_u64(32);
    for d in 1..=3 {
        for _ in 0..10 {
            let mean = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let cov = random_spd(&mut rng, d, 0.5);
            let g = GaussianParams::new(mean.clone(), cov.clone()).unwrap();
            let x = g.sample(1, &mut rng).pop().unwrap();
            let (want_m, want_c) = gaussian_fisher_nat_grad(&mean, &cov, &x);
            let got_m = g.nat_grad_mean(&x).unwrap();
            let got_c = g.nat_grad_cov(&x).unwrap();
            let mut got = got_m.as_slice().to_vec();
            got.extend_from_slice(got_c.as_slice());
            let mut want = want_m.as_slice().to_vec();
            want.extend_from_slice(want_c.as_slice());
            assert!(relative_error(&got, &want) < 1e-4, "d={d}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bernoulli_nat_grad_is_bounded(theta in proptest::collection::vec(0.001f64..0.999, 1..20), seed in any::<u64>()) {
        let p = BernoulliParams::new(theta).unwrap();
        let x = p.sample(1, &mut TrialRng::seed_from_u64(seed)).pop().unwrap();
        for g in p.nat_grad(&x).unwrap() {
            prop_assert!(g > -1.0 && g < 1.0);
        }
    }

    #[test]
    fn gaussian_cov_grad_is_exactly_symmetric(seed in any::<u64>(), d in 1usize..6) {
        let mut rng = TrialRng::seed_from_u64(seed);
        let g = GaussianParams::new(DVector::zeros(d), random_spd(&mut rng, d, 0.1)).unwrap();
        let x = g.sample(1, &mut rng).pop().unwrap();
        let m = g.nat_grad_cov(&x).unwrap();
        prop_assert_eq!(&m, &m.transpose());
    }
}
