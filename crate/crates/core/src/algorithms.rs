//! Optimizers built on the IGO update.
//!
//! [`Pbil`] is PBIL on bit strings (the compact GA when `λ = 2`, `K = 0`,
//! `T = 0.25`). [`Cma`] covers the pure rank-μ update CMA-ES, the four reuse
//! variants, the rank-one hybrid, and importance mixing. Neither has a
//! step-size: the covariance matrix alone carries the scale.
//!
//! Both expose an ask/tell interface next to a one-shot [`Pbil::step`] /
//! [`Cma::step`]. Importance mixing interleaves sampling and evaluation and is
//! only available through `step`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::distributions::{clamp_bernoulli, BernoulliParams, BitString, GaussianParams, SearchDistribution};
use crate::error::{Error, Result};
use crate::reuse::{weighted_gradient_sum, ReuseArchive, SampleRecord};
use crate::utility::{cma_rank_coefficients, cma_standard_weights, mueff, WeightScheme};

/// CMA-ES update rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CmaVariant {
    /// Weighted recombination and rank-μ update from the current population.
    PureRankMu,
    /// (A) mean and covariance from the reuse estimator.
    ReuseA,
    /// (B) covariance from the reuse estimator, mean from the current population.
    ReuseB,
    /// Pure rank-μ plus the rank-one update.
    Hybrid,
    /// (C) variant A plus the rank-one update.
    ReuseC,
    /// (D) variant B plus the rank-one update.
    ReuseD,
    /// Pure rank-μ on a population recycled by importance mixing.
    ImportanceMixing,
}

impl CmaVariant {
    pub const ALL: [CmaVariant; 7] = [
        Self::PureRankMu,
        Self::ReuseA,
        Self::ReuseB,
        Self::Hybrid,
        Self::ReuseC,
        Self::ReuseD,
        Self::ImportanceMixing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::PureRankMu => "pure-rank-mu",
            Self::ReuseA => "reuse-a",
            Self::ReuseB => "reuse-b",
            Self::Hybrid => "hybrid",
            Self::ReuseC => "reuse-c",
            Self::ReuseD => "reuse-d",
            Self::ImportanceMixing => "importance-mixing",
        }
    }

    /// Whether the variant draws on the reuse archive.
    pub fn uses_archive(self) -> bool {
        matches!(self, Self::ReuseA | Self::ReuseB | Self::ReuseC | Self::ReuseD)
    }

    fn reuses_mean(self) -> bool {
        matches!(self, Self::ReuseA | Self::ReuseC)
    }

    pub fn has_rank_one(self) -> bool {
        matches!(self, Self::Hybrid | Self::ReuseC | Self::ReuseD)
    }
}

/// Algorithm selector used by the harness and CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Variant {
    /// PBIL with any `λ >= 2`.
    Pbil,
    /// PBIL restricted to `λ = 2`, i.e. the compact GA when `K = 0`.
    Cga,
    Cma(CmaVariant),
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pbil => "pbil",
            Self::Cga => "cga",
            Self::Cma(v) => v.name(),
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, Self::Pbil | Self::Cga)
    }

    pub fn valid_names() -> String {
        let mut names = vec!["pbil", "cga"];
        names.extend(CmaVariant::ALL.iter().map(|v| v.name()));
        names.join(", ")
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v = match s.trim().to_ascii_lowercase().as_str() {
            "pbil" => Self::Pbil,
            "cga" => Self::Cga,
            "pure-rank-mu" | "rank-mu" => Self::Cma(CmaVariant::PureRankMu),
            "reuse-a" | "a" => Self::Cma(CmaVariant::ReuseA),
            "reuse-b" | "b" => Self::Cma(CmaVariant::ReuseB),
            "hybrid" => Self::Cma(CmaVariant::Hybrid),
            "reuse-c" | "c" => Self::Cma(CmaVariant::ReuseC),
            "reuse-d" | "d" => Self::Cma(CmaVariant::ReuseD),
            "importance-mixing" | "im" => Self::Cma(CmaVariant::ImportanceMixing),
            _ => {
                return Err(Error::UnknownVariant {
                    name: s.to_string(),
                    valid: Self::valid_names(),
                })
            }
        };
        Ok(v)
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.name().to_string()
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Outcome of one generation.
#[derive(Clone, Debug)]
pub struct StepReport<D> {
    /// Objective calls made during the step.
    pub evaluations: usize,
    /// Best objective value among the points evaluated in this step.
    pub best_f: Option<f64>,
    pub params_after: D,
}

fn evaluate<P, F>(points: &[P], objective: &mut F) -> Result<Vec<f64>>
where
    F: FnMut(&P) -> f64,
{
    points
        .iter()
        .map(|x| {
            let f = objective(x);
            if f.is_nan() {
                Err(Error::NanObjective)
            } else {
                Ok(f)
            }
        })
        .collect()
}

fn best_of(fvals: &[f64], minimize: bool) -> Option<f64> {
    fvals.iter().copied().reduce(|a, b| {
        if (minimize && b < a) || (!minimize && b > a) {
            b
        } else {
            a
        }
    })
}

fn records<P: Clone>(points: &[P], fvals: &[f64], generation: u64) -> Vec<SampleRecord<P>> {
    points
        .iter()
        .zip(fvals)
        .map(|(x, &f)| SampleRecord { x: x.clone(), f, generation })
        .collect()
}

/// Flattened `(coefficient, point)` pairs of the reuse update, newest generation first.
fn reuse_terms<D: SearchDistribution>(
    archive: &ReuseArchive<D>,
    scheme: &WeightScheme,
    minimize: bool,
) -> Result<(Vec<f64>, Vec<D::Point>)> {
    let rhat = archive.rhat(scheme, minimize)?;
    let coeffs = archive.coefficients(&rhat).into_iter().flatten().collect();
    let points = archive
        .generations()
        .flat_map(|g| g.samples.iter().map(|s| s.x.clone()))
        .collect();
    Ok((coeffs, points))
}

/// `θ + η Σ c_i (x_i - θ)`, before clamping.
pub fn bernoulli_update(theta: &BernoulliParams, eta: f64, coeffs: &[f64], points: &[BitString]) -> Result<Vec<f64>> {
    let grad = weighted_gradient_sum(coeffs.iter().copied().zip(points), |x| theta.nat_grad(x))?;
    Ok(theta
        .theta()
        .iter()
        .zip(&grad)
        .map(|(t, g)| t + eta * g)
        .collect())
}

#[derive(Clone, Debug)]
pub struct Pbil {
    theta: BernoulliParams,
    lambda: usize,
    eta: f64,
    scheme: WeightScheme,
    maximize: bool,
    archive: ReuseArchive<BernoulliParams>,
    iteration: u64,
}

impl Pbil {
    /// `k` is the number of past generations reused, `t` the step-threshold.
    pub fn new(theta: BernoulliParams, lambda: usize, eta: f64, k: usize, t: f64, maximize: bool) -> Result<Self> {
        if lambda < 2 {
            return Err(Error::InvalidParameter(format!("lambda must be >= 2, got {lambda}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
        }
        let d = theta.dim();
        let theta = clamp_bernoulli(theta.theta(), d)?;
        Ok(Self {
            theta,
            lambda,
            eta,
            scheme: WeightScheme::step(t)?,
            maximize,
            archive: ReuseArchive::new(k),
            iteration: 0,
        })
    }

    pub fn theta(&self) -> &BernoulliParams {
        &self.theta
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn archive(&self) -> &ReuseArchive<BernoulliParams> {
        &self.archive
    }

    pub fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<BitString> {
        self.theta.sample(self.lambda, rng)
    }

    /// Archives the evaluated population and moves `θ`.
    pub fn tell(&mut self, points: Vec<BitString>, fvals: &[f64]) -> Result<()> {
        if points.len() != self.lambda || fvals.len() != self.lambda {
            return Err(Error::DimensionMismatch {
                expected: self.lambda,
                found: points.len().min(fvals.len()),
            });
        }
        if fvals.iter().any(|f| f.is_nan()) {
            return Err(Error::NanObjective);
        }
        self.archive
            .push(self.theta.clone(), records(&points, fvals, self.iteration))?;
        let (coeffs, pts) = reuse_terms(&self.archive, &self.scheme, !self.maximize)?;
        let raw = bernoulli_update(&self.theta, self.eta, &coeffs, &pts)?;
        self.theta = clamp_bernoulli(&raw, self.theta.dim())?;
        self.iteration += 1;
        Ok(())
    }

    pub fn step<R, F>(&mut self, objective: &mut F, rng: &mut R) -> Result<StepReport<BernoulliParams>>
    where
        R: Rng + ?Sized,
        F: FnMut(&BitString) -> f64,
    {
        let points = self.ask(rng);
        let fvals = evaluate(&points, objective)?;
        let best_f = best_of(&fvals, !self.maximize);
        self.tell(points, &fvals)?;
        Ok(StepReport {
            evaluations: self.lambda,
            best_f,
            params_after: self.theta.clone(),
        })
    }
}

/// Learning rates of the Gaussian updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CmaRates {
    pub c_m: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
}

fn rank_mu_rate(d: usize, mueff: f64) -> f64 {
    let d = d as f64;
    2.0 * (mueff - 2.0 + 1.0 / mueff) / ((d + 2.0).powi(2) + 2.0 * mueff / 2.0)
}

/// `c_m = 1` and the default rank-μ rate; no rank-one term.
pub fn learning_rates_rank_mu(d: usize, _lambda: usize, mueff: f64) -> CmaRates {
    CmaRates {
        c_m: 1.0,
        c_c: 0.0,
        c_1: 0.0,
        c_mu: rank_mu_rate(d, mueff),
    }
}

/// Rates of the rank-one + rank-μ hybrid.
pub fn learning_rates_hybrid(d: usize, lambda: usize, mueff: f64) -> CmaRates {
    let (df, lf) = (d as f64, lambda as f64);
    let c_c = (4.0 + mueff / df) / (lf + 4.0 + 2.0 * mueff / lf);
    let c_1 = 2.0 / ((df + 1.3).powi(2) + mueff);
    CmaRates {
        c_m: 1.0,
        c_c,
        c_1,
        c_mu: (1.0 - c_1).min(rank_mu_rate(d, mueff)),
    }
}

/// `(1 - c_c) p_c + sqrt(c_c (2 - c_c) μ_eff) · step`.
pub fn evolution_path_update(path: &DVector<f64>, c_c: f64, mueff: f64, weighted_step: &DVector<f64>) -> DVector<f64> {
    path * (1.0 - c_c) + weighted_step * (c_c * (2.0 - c_c) * mueff).sqrt()
}

/// One Gaussian IGO update.
///
/// `mean_terms` and `cov_terms` are `(coefficient, x)` pairs; steps are taken
/// from the current mean. `rank_one` adds `c_1 (p pᵀ - C)`.
pub fn gaussian_update(
    params: &GaussianParams,
    c_m: f64,
    c_mu: f64,
    mean_terms: (&[f64], &[DVector<f64>]),
    cov_terms: (&[f64], &[DVector<f64>]),
    rank_one: Option<(f64, &DVector<f64>)>,
) -> Result<GaussianParams> {
    let d = params.dim();
    let mean_grad = weighted_gradient_sum(mean_terms.0.iter().copied().zip(mean_terms.1), |x| {
        Ok(params.nat_grad_mean(x)?.as_slice().to_vec())
    })?;
    let cov_grad = weighted_gradient_sum(cov_terms.0.iter().copied().zip(cov_terms.1), |x| {
        Ok(params.nat_grad_cov(x)?.as_slice().to_vec())
    })?;
    let mean = params.mean() + DVector::from_vec(mean_grad) * c_m;
    let mut cov = params.cov().clone();
    if let Some((c_1, path)) = rank_one {
        cov += (path * path.transpose() - params.cov()) * c_1;
    }
    cov += DMatrix::from_vec(d, d, cov_grad) * c_mu;
    GaussianParams::new(mean, cov)
}

#[derive(Clone, Debug)]
pub struct Cma {
    params: GaussianParams,
    path: DVector<f64>,
    variant: CmaVariant,
    rates: CmaRates,
    mueff: f64,
    lambda: usize,
    alpha: f64,
    archive: ReuseArchive<GaussianParams>,
    previous: Option<(GaussianParams, Vec<SampleRecord<DVector<f64>>>)>,
    iteration: u64,
}

/// Attempts per iteration before importance mixing forces an acceptance.
pub const IM_DRAW_GUARD_PER_LAMBDA: usize = 1000;

impl Cma {
    /// Minimization with default learning rates for the variant.
    pub fn new(params: GaussianParams, lambda: usize, k: usize, variant: CmaVariant) -> Result<Self> {
        if lambda < 2 {
            return Err(Error::InvalidParameter(format!("lambda must be >= 2, got {lambda}")));
        }
        let d = params.dim();
        let mueff = mueff(&cma_standard_weights(lambda))?;
        let rates = if variant.has_rank_one() {
            learning_rates_hybrid(d, lambda, mueff)
        } else {
            learning_rates_rank_mu(d, lambda, mueff)
        };
        Ok(Self {
            path: DVector::zeros(d),
            params,
            variant,
            rates,
            mueff,
            lambda,
            alpha: 0.0,
            archive: ReuseArchive::new(if variant.uses_archive() { k } else { 0 }),
            previous: None,
            iteration: 0,
        })
    }

    pub fn with_rates(mut self, rates: CmaRates) -> Self {
        self.rates = rates;
        self
    }

    /// Minimal refresh rate of importance mixing.
    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("alpha must be in [0, 1], got {alpha}")));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn params(&self) -> &GaussianParams {
        &self.params
    }

    pub fn path(&self) -> &DVector<f64> {
        &self.path
    }

    pub fn rates(&self) -> CmaRates {
        self.rates
    }

    pub fn mueff(&self) -> f64 {
        self.mueff
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn variant(&self) -> CmaVariant {
        self.variant
    }

    pub fn archive(&self) -> &ReuseArchive<GaussianParams> {
        &self.archive
    }

    /// Seeds the previous population used by importance mixing.
    pub fn set_previous_population(&mut self, params: GaussianParams, population: Vec<(DVector<f64>, f64)>) {
        let recs = population
            .into_iter()
            .map(|(x, f)| SampleRecord { x, f, generation: self.iteration })
            .collect();
        self.previous = Some((params, recs));
    }

    pub fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<DVector<f64>> {
        self.params.sample(self.lambda, rng)
    }

    /// Applies the variant's update to an evaluated population drawn from the
    /// current distribution.
    pub fn tell(&mut self, points: Vec<DVector<f64>>, fvals: &[f64]) -> Result<()> {
        if self.variant == CmaVariant::ImportanceMixing {
            return Err(Error::InvalidParameter(
                "importance mixing evaluates while sampling; use step()".into(),
            ));
        }
        if points.len() != self.lambda || fvals.len() != self.lambda {
            return Err(Error::DimensionMismatch {
                expected: self.lambda,
                found: points.len().min(fvals.len()),
            });
        }
        let current = cma_rank_coefficients(fvals, true)?;
        let reuse = if self.variant.uses_archive() {
            self.archive
                .push(self.params.clone(), records(&points, fvals, self.iteration))?;
            Some(reuse_terms(&self.archive, &WeightScheme::LogHalf, true)?)
        } else {
            None
        };

        let current_terms = (current.as_slice(), points.as_slice());
        let reuse_terms = reuse.as_ref().map(|(c, p)| (c.as_slice(), p.as_slice()));
        let mean_terms = match reuse_terms {
            Some(t) if self.variant.reuses_mean() => t,
            _ => current_terms,
        };
        let cov_terms = reuse_terms.unwrap_or(current_terms);

        let rank_one = if self.variant.has_rank_one() {
            let step = DVector::from_vec(weighted_gradient_sum(current.iter().copied().zip(&points), |x| {
                Ok(self.params.nat_grad_mean(x)?.as_slice().to_vec())
            })?);
            self.path = evolution_path_update(&self.path, self.rates.c_c, self.mueff, &step);
            Some((self.rates.c_1, &self.path))
        } else {
            None
        };

        self.params = gaussian_update(
            &self.params,
            self.rates.c_m,
            self.rates.c_mu,
            mean_terms,
            cov_terms,
            rank_one,
        )?;
        self.iteration += 1;
        Ok(())
    }

    pub fn step<R, F>(&mut self, objective: &mut F, rng: &mut R) -> Result<StepReport<GaussianParams>>
    where
        R: Rng + ?Sized,
        F: FnMut(&DVector<f64>) -> f64,
    {
        if self.variant == CmaVariant::ImportanceMixing {
            return self.importance_mixing_step(objective, rng);
        }
        let points = self.ask(rng);
        let fvals = evaluate(&points, objective)?;
        let best_f = best_of(&fvals, true);
        self.tell(points, &fvals)?;
        Ok(StepReport {
            evaluations: self.lambda,
            best_f,
            params_after: self.params.clone(),
        })
    }

    /// Recycles the previous population by rejection, refills it from the
    /// current distribution, and applies the pure rank-μ update.
    pub fn importance_mixing_step<R, F>(&mut self, objective: &mut F, rng: &mut R) -> Result<StepReport<GaussianParams>>
    where
        R: Rng + ?Sized,
        F: FnMut(&DVector<f64>) -> f64,
    {
        let current = &self.params;
        let mut population: Vec<SampleRecord<DVector<f64>>> = Vec::with_capacity(self.lambda);
        let mut fresh_f = Vec::new();

        match self.previous.take() {
            None => {
                let points = current.sample(self.lambda, rng);
                let fvals = evaluate(&points, objective)?;
                population = records(&points, &fvals, self.iteration);
                fresh_f = fvals;
            }
            Some((prev_params, prev_pop)) => {
                for rec in prev_pop {
                    let ratio = (current.log_density(&rec.x)? - prev_params.log_density(&rec.x)?).exp();
                    let accept = (1.0 - self.alpha) * ratio;
                    if rng.random::<f64>() < accept.min(1.0) {
                        population.push(rec);
                    }
                }
                let guard = IM_DRAW_GUARD_PER_LAMBDA * self.lambda;
                let mut attempts = 0;
                while population.len() < self.lambda {
                    let x = current.sample(1, rng).pop().expect("one sample");
                    attempts += 1;
                    let back = (prev_params.log_density(&x)? - current.log_density(&x)?).exp();
                    let accept = self.alpha.max(1.0 - back);
                    let u: f64 = rng.random();
                    if u < accept || attempts > guard {
                        attempts = 0;
                        let f = evaluate(std::slice::from_ref(&x), objective)?[0];
                        fresh_f.push(f);
                        population.push(SampleRecord { x, f, generation: self.iteration });
                    }
                }
            }
        }

        let points: Vec<DVector<f64>> = population.iter().map(|r| r.x.clone()).collect();
        let fvals: Vec<f64> = population.iter().map(|r| r.f).collect();
        let coeffs = cma_rank_coefficients(&fvals, true)?;
        let terms = (coeffs.as_slice(), points.as_slice());
        let updated = gaussian_update(current, self.rates.c_m, self.rates.c_mu, terms, terms, None)?;
        self.previous = Some((self.params.clone(), population));
        self.params = updated;
        self.iteration += 1;
        Ok(StepReport {
            evaluations: fresh_f.len(),
            best_f: best_of(&fresh_f, true),
            params_after: self.params.clone(),
        })
    }
}
