// Independent oracles shared by the integration targets. Nothing here calls
// into the library's update code; only distributions are borrowed for
// log-densities.
#![allow(dead_code)]

use igo_reuse::{GaussianParams, SearchDistribution};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Textbook compact GA on OneMax-like maximization, sharing the caller's
/// random stream: two samples per step, bitwise `θ < u` draws in order.
pub struct ReferenceCga {
    pub theta: Vec<f64>,
    pub step: f64,
    lo: f64,
    hi: f64,
}

impl ReferenceCga {
    pub fn new(d: usize) -> Self {
        Self {
            theta: vec![0.5; d],
            step: 1.0 / (2.0 * d as f64),
            lo: 1.0 / d as f64,
            hi: 1.0 - 1.0 / d as f64,
        }
    }

    pub fn step<R: Rng>(&mut self, rng: &mut R, f: impl Fn(&[bool]) -> f64) {
        let a: Vec<bool> = self.theta.iter().map(|&t| rng.random::<f64>() < t).collect();
        let b: Vec<bool> = self.theta.iter().map(|&t| rng.random::<f64>() < t).collect();
        let (fa, fb) = (f(&a), f(&b));
        if fa == fb {
            return;
        }
        let (win, lose) = if fa > fb { (a, b) } else { (b, a) };
        for i in 0..self.theta.len() {
            if win[i] && !lose[i] {
                self.theta[i] = (self.theta[i] + self.step).clamp(self.lo, self.hi);
            } else if !win[i] && lose[i] {
                self.theta[i] = (self.theta[i] - self.step).clamp(self.lo, self.hi);
            }
        }
    }
}

fn bernoulli_logp(theta: &[f64], x: &[bool]) -> f64 {
    theta
        .iter()
        .zip(x)
        .map(|(t, &b)| if b { t.ln() } else { (1.0 - t).ln() })
        .sum()
}

/// `F⁻¹ ∇l(x)` for the Bernoulli family with the Fisher matrix summed over
/// all `2^d` points and the score taken by central differences.
pub fn bernoulli_fisher_nat_grad(theta: &[f64], x: &[bool]) -> Vec<f64> {
    let d = theta.len();
    let h = 1e-6;
    let score = |y: &[bool]| -> DVector<f64> {
        DVector::from_fn(d, |i, _| {
            let mut up = theta.to_vec();
            let mut dn = theta.to_vec();
            up[i] += h;
            dn[i] -= h;
            (bernoulli_logp(&up, y) - bernoulli_logp(&dn, y)) / (2.0 * h)
        })
    };
    let mut fisher = DMatrix::zeros(d, d);
    for mask in 0..(1u32 << d) {
        let y: Vec<bool> = (0..d).map(|i| mask >> i & 1 == 1).collect();
        let s = score(&y);
        fisher += &s * s.transpose() * bernoulli_logp(theta, &y).exp();
    }
    fisher.lu().solve(&score(x)).expect("Fisher matrix invertible").as_slice().to_vec()
}

/// Coordinates of the Gaussian family used by the oracle: the mean, then the
/// upper triangle of `C` row by row (each off-diagonal entry sets both
/// symmetric cells).
pub fn gaussian_coords(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect()
}

fn gaussian_from(d: usize, p: &[f64]) -> GaussianParams {
    let mean = DVector::from_column_slice(&p[..d]);
    let mut cov = DMatrix::zeros(d, d);
    for (k, &(i, j)) in gaussian_coords(d).iter().enumerate() {
        cov[(i, j)] = p[d + k];
        cov[(j, i)] = p[d + k];
    }
    GaussianParams::new(mean, cov).expect("perturbation keeps C positive definite")
}

/// `F⁻¹ ∇l(x)` for the Gaussian family. The score and Hessian of `l` come
/// from central differences; `F = -E[∇²l]` is averaged over the `2d` sigma
/// points `m ± sqrt(d) L e_i`, which integrate the (at most quadratic in
/// `x - m`) Hessian exactly.
pub fn gaussian_fisher_nat_grad(mean: &DVector<f64>, cov: &DMatrix<f64>, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let d = mean.len();
    let coords = gaussian_coords(d);
    let n = d + coords.len();
    let mut p0 = mean.as_slice().to_vec();
    p0.extend(coords.iter().map(|&(i, j)| cov[(i, j)]));
    let l = |p: &[f64], y: &DVector<f64>| gaussian_from(d, p).log_density(y).unwrap();
    let h = 1e-4;

    let score = |y: &DVector<f64>| {
        DVector::from_fn(n, |a, _| {
            let mut up = p0.clone();
            let mut dn = p0.clone();
            up[a] += h;
            dn[a] -= h;
            (l(&up, y) - l(&dn, y)) / (2.0 * h)
        })
    };
    let hessian = |y: &DVector<f64>| {
        DMatrix::from_fn(n, n, |a, b| {
            let at = |sa: f64, sb: f64| {
                let mut p = p0.clone();
                p[a] += sa * h;
                p[b] += sb * h;
                l(&p, y)
            };
            (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h)
        })
    };

    let chol = cov.clone().cholesky().expect("positive definite").l();
    let mut fisher = DMatrix::zeros(n, n);
    let scale = (d as f64).sqrt();
    for i in 0..d {
        let col = chol.column(i) * scale;
        for sign in [1.0, -1.0] {
            let y = mean + &col * sign;
            fisher -= hessian(&y);
        }
    }
    fisher /= (2 * d) as f64;
    let nat = fisher.clone().lu().solve(&score(x)).expect("Fisher matrix invertible");

    let mut grad_c = DMatrix::zeros(d, d);
    for (k, &(i, j)) in coords.iter().enumerate() {
        grad_c[(i, j)] = nat[d + k];
        grad_c[(j, i)] = nat[d + k];
    }
    (nat.rows(0, d).into_owned(), grad_c)
}

pub fn relative_error(got: &[f64], want: &[f64]) -> f64 {
    let diff: f64 = got.iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = want.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}

/// Two-sided Mann-Whitney U test with the normal approximation and tie
/// correction. Returns `(U_a, p)`.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mut all: Vec<(f64, usize)> = a.iter().map(|&v| (v, 0)).chain(b.iter().map(|&v| (v, 1))).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = all.len();
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for r in &mut ranks[i..=j] {
            *r = avg;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let r1: f64 = all.iter().zip(&ranks).filter(|(s, _)| s.1 == 0).map(|(_, r)| r).sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let mu = n1 * n2 / 2.0;
    let nn = n1 + n2;
    let sigma = (n1 * n2 / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)))).sqrt();
    let z = (u - mu) / sigma;
    let p = 2.0 * (1.0 - Normal::standard().cdf(z.abs()));
    (u, p)
}

pub fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Random symmetric positive-definite matrix `A Aᵀ + shift I`.
pub fn random_spd<R: Rng>(rng: &mut R, d: usize, shift: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(d, d) * shift
}
