//! Parametric search distributions.
//!
//! Both families expose sampling, log-density, and the natural gradient of the
//! log-likelihood `F⁻¹ ∇ ln p_θ(x)` in closed form. For the Bernoulli family
//! this is `x - θ`; for the Gaussian family it is `x - m` for the mean and
//! `(x - m)(x - m)ᵀ - C` for the covariance.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A candidate on `{0, 1}^d`.
pub type BitString = Vec<bool>;

/// A family member that can be sampled and evaluated.
pub trait SearchDistribution: Clone + std::fmt::Debug {
    type Point: Clone + std::fmt::Debug;

    fn dim(&self) -> usize;

    /// Draws `count` independent points.
    fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Self::Point>;

    /// Natural-log probability mass or density of `x`.
    fn log_density(&self, x: &Self::Point) -> Result<f64>;
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Independent Bernoulli bits; `theta[i]` is the probability that bit `i` is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliParams {
    theta: Vec<f64>,
}

impl BernoulliParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidParameter("Bernoulli dimension must be >= 1".into()));
        }
        for (index, &value) in theta.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::InvalidProbability { index, value });
            }
        }
        Ok(Self { theta })
    }

    /// All probabilities equal to `p`.
    pub fn uniform(d: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; d])
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `x - θ`.
    pub fn nat_grad(&self, x: &[bool]) -> Result<Vec<f64>> {
        check_dim(self.theta.len(), x.len())?;
        Ok(x.iter()
            .zip(&self.theta)
            .map(|(&b, &t)| if b { 1.0 - t } else { -t })
            .collect())
    }
}

impl SearchDistribution for BernoulliParams {
    type Point = BitString;

    fn dim(&self) -> usize {
        self.theta.len()
    }

    fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<BitString> {
        (0..count)
            .map(|_| self.theta.iter().map(|&t| rng.random::<f64>() < t).collect())
            .collect()
    }

    fn log_density(&self, x: &BitString) -> Result<f64> {
        check_dim(self.theta.len(), x.len())?;
        Ok(x.iter()
            .zip(&self.theta)
            .map(|(&b, &t)| if b { t.ln() } else { (1.0 - t).ln() })
            .sum())
    }
}

/// Projects every probability onto `[1/d, 1 - 1/d]`.
pub fn clamp_bernoulli(theta: &[f64], d: usize) -> Result<BernoulliParams> {
    check_dim(d, theta.len())?;
    if d < 2 {
        return Err(Error::InvalidParameter(
            "Bernoulli clamping needs d >= 2 (the range [1/d, 1-1/d] is empty otherwise)".into(),
        ));
    }
    let lo = 1.0 / d as f64;
    let hi = 1.0 - lo;
    Ok(BernoulliParams {
        theta: theta.iter().map(|&t| t.clamp(lo, hi)).collect(),
    })
}

/// Multivariate normal `N(m, C)` with a cached lower Cholesky factor.
#[derive(Clone, Debug)]
pub struct GaussianParams {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl GaussianParams {
    /// Symmetrizes `cov` and factorizes it.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidParameter("Gaussian dimension must be >= 1".into()));
        }
        check_dim(d, cov.nrows())?;
        check_dim(d, cov.ncols())?;
        let cov = symmetrize(cov);
        let chol = cov
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .unpack();
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self {
            mean,
            cov,
            chol,
            log_det,
        })
    }

    /// `N(m, σ² I)`.
    pub fn isotropic(mean: DVector<f64>, sigma: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, DMatrix::identity(d, d) * (sigma * sigma))
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower-triangular `L` with `L Lᵀ = C`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `x - m`.
    pub fn nat_grad_mean(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.mean.len(), x.len())?;
        Ok(x - &self.mean)
    }

    /// `(x - m)(x - m)ᵀ - C`, symmetric bit-for-bit.
    pub fn nat_grad_cov(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let y = self.nat_grad_mean(x)?;
        Ok(&y * y.transpose() - &self.cov)
    }
}

impl SearchDistribution for GaussianParams {
    type Point = DVector<f64>;

    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<DVector<f64>> {
        let d = self.mean.len();
        (0..count)
            .map(|_| {
                let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                &self.mean + &self.chol * z
            })
            .collect()
    }

    fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        let d = self.mean.len();
        check_dim(d, x.len())?;
        // forward substitution L z = x - m
        let mut z = x - &self.mean;
        for i in 0..d {
            let mut acc = z[i];
            for j in 0..i {
                acc -= self.chol[(i, j)] * z[j];
            }
            z[i] = acc / self.chol[(i, i)];
        }
        let maha = z.norm_squared();
        Ok(-0.5 * (d as f64 * (2.0 * PI).ln() + self.log_det + maha))
    }
}

/// `(C + Cᵀ) / 2`.
pub fn symmetrize(c: DMatrix<f64>) -> DMatrix<f64> {
    let t = c.transpose();
    (c + t) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(c: &DMatrix<f64>) -> f64 {
    c.clone().symmetric_eigen().eigenvalues.min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn rng(seed: u64) -> crate::TrialRng {
        crate::TrialRng::seed_from_u64(seed)
    }

    #[test]
    fn bernoulli_log_density_hand_values() {
        let p = BernoulliParams::new(vec![0.5, 0.5]).unwrap();
        assert_relative_eq!(p.log_density(&vec![true, false]).unwrap(), 0.25f64.ln(), epsilon = 1e-15);
        let p = BernoulliParams::new(vec![0.9, 0.1]).unwrap();
        assert_relative_eq!(p.log_density(&vec![true, false]).unwrap(), 0.81f64.ln(), epsilon = 1e-15);
        let p = BernoulliParams::uniform(17, 0.5).unwrap();
        let x: BitString = (0..17).map(|i| i % 3 == 0).collect();
        assert_relative_eq!(p.log_density(&x).unwrap(), -17.0 * 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn bernoulli_mass_sums_to_one() {
        let mut r = rng(3);
        for d in 1..=12 {
            let theta: Vec<f64> = (0..d).map(|_| r.random_range(0.05..0.95)).collect();
            let p = BernoulliParams::new(theta).unwrap();
            let total: f64 = (0u32..(1 << d))
                .map(|bits| {
                    let x: BitString = (0..d).map(|i| bits >> i & 1 == 1).collect();
                    p.log_density(&x).unwrap().exp()
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "d={d}: {total}");
        }
    }

    #[test]
    fn bernoulli_nat_grad_values() {
        let p = BernoulliParams::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(p.nat_grad(&[true, false]).unwrap(), vec![0.5, -0.5]);
        let eps = 1e-9;
        let p = BernoulliParams::new(vec![1.0 - eps, 1.0 - eps]).unwrap();
        for g in p.nat_grad(&[true, true]).unwrap() {
            assert_relative_eq!(g, eps, max_relative = 1e-6);
        }
        assert!(matches!(
            p.nat_grad(&[true]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn bernoulli_sampling() {
        let d = 1000;
        let p = BernoulliParams::uniform(d, 1.0 - 1.0 / d as f64).unwrap();
        let x = &p.sample(1, &mut rng(1))[0];
        let zeros = x.iter().filter(|&&b| !b).count();
        assert!(zeros < 10, "{zeros} zeros");

        let p = BernoulliParams::uniform(2, 0.5).unwrap();
        let xs = p.sample(100_000, &mut rng(2));
        for i in 0..2 {
            let mean = xs.iter().filter(|x| x[i]).count() as f64 / 1e5;
            assert!((mean - 0.5).abs() < 0.01, "{mean}");
        }
        assert_eq!(p.sample(50, &mut rng(9)), p.sample(50, &mut rng(9)));
    }

    #[test]
    fn bernoulli_rejects_boundary_probabilities() {
        assert!(BernoulliParams::new(vec![0.5, 1.0]).is_err());
        assert!(BernoulliParams::new(vec![0.0]).is_err());
        assert!(BernoulliParams::new(vec![]).is_err());
    }

    #[test]
    fn clamp_projects_onto_range() {
        let mut theta = vec![0.5; 10];
        theta[0] = 1.2;
        theta[1] = -0.1;
        let p = clamp_bernoulli(&theta, 10).unwrap();
        assert_relative_eq!(p.theta()[0], 0.9);
        assert_relative_eq!(p.theta()[1], 0.1);
        assert_eq!(p.theta()[2], 0.5);
        assert!(clamp_bernoulli(&[0.5], 1).is_err());
    }

    #[test]
    fn gaussian_log_density_hand_values() {
        let g = GaussianParams::new(DVector::from_element(1, 0.0), DMatrix::identity(1, 1)).unwrap();
        assert_relative_eq!(
            g.log_density(&DVector::from_element(1, 0.0)).unwrap(),
            -0.918_938_533_204_672_7,
            epsilon = 1e-14
        );
        let g = GaussianParams::new(
            DVector::zeros(2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
        )
        .unwrap();
        let expected = -0.5 * (2.0 * (2.0 * PI).ln() + 4f64.ln() + 1.0);
        assert_relative_eq!(
            g.log_density(&DVector::from_vec(vec![0.0, 2.0])).unwrap(),
            expected,
            epsilon = 1e-14
        );
        // x = m leaves only the normalizer
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let m = DVector::from_vec(vec![1.0, -1.0]);
        let g = GaussianParams::new(m.clone(), c.clone()).unwrap();
        assert_relative_eq!(
            g.log_density(&m).unwrap(),
            -0.5 * (2.0 * (2.0 * PI).ln() + c.determinant().ln()),
            epsilon = 1e-13
        );
    }

    #[test]
    fn gaussian_density_integrates_to_one() {
        // d = 1, midpoint rule on a 6σ box
        let g = GaussianParams::new(DVector::from_element(1, 0.7), DMatrix::from_element(1, 1, 2.25)).unwrap();
        let n = 20_000;
        let (lo, hi) = (0.7 - 9.0, 0.7 + 9.0);
        let h = (hi - lo) / n as f64;
        let total: f64 = (0..n)
            .map(|i| g.log_density(&DVector::from_element(1, lo + (i as f64 + 0.5) * h)).unwrap().exp() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");

        // d = 2 with correlation, 6σ box in each axis
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.5]);
        let g = GaussianParams::new(DVector::zeros(2), c).unwrap();
        let n = 800;
        let (s0, s1) = (6.0, 6.0 * 0.5f64.sqrt());
        let (h0, h1) = (2.0 * s0 / n as f64, 2.0 * s1 / n as f64);
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = DVector::from_vec(vec![-s0 + (i as f64 + 0.5) * h0, -s1 + (j as f64 + 0.5) * h1]);
                total += g.log_density(&x).unwrap().exp() * h0 * h1;
            }
        }
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn gaussian_sampling_moments_and_determinism() {
        let d = 3;
        let g = GaussianParams::new(DVector::zeros(d), DMatrix::identity(d, d)).unwrap();
        let xs = g.sample(100_000, &mut rng(5));
        let n = xs.len() as f64;
        let mean = xs.iter().fold(DVector::zeros(d), |acc, x| acc + x) / n;
        let cov = xs
            .iter()
            .fold(DMatrix::zeros(d, d), |acc, x| acc + (x - &mean) * (x - &mean).transpose())
            / n;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - target).abs() < 0.05, "{cov}");
            }
        }
        assert_eq!(g.sample(10, &mut rng(11)), g.sample(10, &mut rng(11)));

        let m = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let tight = GaussianParams::isotropic(m.clone(), 1e-12).unwrap();
        let x = &tight.sample(1, &mut rng(0))[0];
        assert!((x - m).norm() < 1e-10);
    }

    #[test]
    fn gaussian_nat_grads() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let m = DVector::from_vec(vec![0.5, -1.0]);
        let g = GaussianParams::new(m.clone(), c.clone()).unwrap();
        assert_eq!(g.nat_grad_mean(&m).unwrap(), DVector::zeros(2));
        assert_eq!(g.nat_grad_cov(&m).unwrap(), -c);

        let g = GaussianParams::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert_eq!(g.nat_grad_mean(&DVector::from_vec(vec![1.0, 2.0])).unwrap(), DVector::from_vec(vec![1.0, 2.0]));
        let gc = g.nat_grad_cov(&DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(gc, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]));

        let mut r = rng(8);
        let c = DMatrix::from_fn(4, 4, |_, _| r.random_range(-1.0..1.0));
        let c = &c * c.transpose() + DMatrix::identity(4, 4);
        let g = GaussianParams::new(DVector::zeros(4), c).unwrap();
        let x = DVector::from_fn(4, |_, _| r.random_range(-3.0..3.0));
        let gc = g.nat_grad_cov(&x).unwrap();
        assert_eq!(gc, gc.transpose());
    }

    #[test]
    fn non_pd_covariance_is_rejected() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GaussianParams::new(DVector::zeros(2), c),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn min_eigenvalue_cases() {
        assert_relative_eq!(min_eigenvalue(&DMatrix::identity(4, 4)), 1.0, epsilon = 1e-14);
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![1e6, 250.0, 1.0]));
        assert_relative_eq!(min_eigenvalue(&diag), 1.0, max_relative = 1e-10);
    }
}
