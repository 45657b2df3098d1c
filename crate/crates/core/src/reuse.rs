//! Sample reuse through importance sampling.
//!
//! [`ReuseArchive`] keeps the last `K + 1` generations (newest first) and a
//! cache `L[k][l][i] = ln p_{θ(t-k)}(x_i^(t-l))`. The likelihood ratio of a
//! sample against the uniform mixture of the retained distributions is then
//!
//! ```text
//! p_t(x) / p̄(x) = (K_eff + 1) / Σ_l exp(L[l][k][i] - L[0][k][i])
//! ```
//!
//! evaluated with a max-shift. Each push costs `O(λ K)` log-density calls.
//! Before `K` past generations exist, `K_eff` is the number actually stored
//! minus one.

use std::collections::VecDeque;

use crate::distributions::SearchDistribution;
use crate::error::{Error, Result};
use crate::utility::{is_quantiles, utility_hat_is, WeightScheme};

/// One evaluated candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord<P> {
    pub x: P,
    pub f: f64,
    /// Iteration index at which `x` was drawn.
    pub generation: u64,
}

/// The distribution a population was drawn from, plus that population.
#[derive(Clone, Debug)]
pub struct GenerationRecord<D: SearchDistribution> {
    pub params: D,
    pub samples: Vec<SampleRecord<D::Point>>,
}

#[derive(Clone, Debug)]
pub struct ReuseArchive<D: SearchDistribution> {
    max_past: usize,
    generations: VecDeque<GenerationRecord<D>>,
    loglik: Vec<Vec<Vec<f64>>>,
}

impl<D: SearchDistribution> ReuseArchive<D> {
    /// Archive that keeps the current generation and up to `max_past` older ones.
    pub fn new(max_past: usize) -> Self {
        Self {
            max_past,
            generations: VecDeque::with_capacity(max_past + 1),
            loglik: Vec::new(),
        }
    }

    pub fn max_past(&self) -> usize {
        self.max_past
    }

    /// Number of stored generations, `K_eff + 1`.
    pub fn len(&self) -> usize {
        self.generations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generations.is_empty()
    }

    /// Population size, or zero when empty.
    pub fn lambda(&self) -> usize {
        self.generations.front().map_or(0, |g| g.samples.len())
    }

    /// Stored generations, newest first.
    pub fn generations(&self) -> impl Iterator<Item = &GenerationRecord<D>> {
        self.generations.iter()
    }

    pub fn generation(&self, k: usize) -> Option<&GenerationRecord<D>> {
        self.generations.get(k)
    }

    /// `ln p_{θ(t-k)}(x_i^(t-l))`.
    pub fn loglik(&self, k: usize, l: usize, i: usize) -> f64 {
        self.loglik[k][l][i]
    }

    /// Inserts the newest generation, evicting beyond `K + 1`, and updates the
    /// log-likelihood cache.
    pub fn push(&mut self, params: D, samples: Vec<SampleRecord<D::Point>>) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("a generation needs at least one sample".into()));
        }
        if let Some(front) = self.generations.front() {
            if front.samples.len() != samples.len() {
                return Err(Error::DimensionMismatch {
                    expected: front.samples.len(),
                    found: samples.len(),
                });
            }
            if front.params.dim() != params.dim() {
                return Err(Error::DimensionMismatch {
                    expected: front.params.dim(),
                    found: params.dim(),
                });
            }
        }
        if samples.iter().any(|s| !s.f.is_finite()) {
            return Err(Error::InvalidParameter("archived objective values must be finite".into()));
        }

        self.generations.push_front(GenerationRecord { params, samples });
        self.generations.truncate(self.max_past + 1);
        let n = self.generations.len();

        let mut table = vec![vec![Vec::new(); n]; n];
        let newest = &self.generations[0];
        // row 0: every retained sample under the newest distribution
        for (l, generation) in self.generations.iter().enumerate() {
            table[0][l] = generation
                .samples
                .iter()
                .map(|s| newest.params.log_density(&s.x))
                .collect::<Result<_>>()?;
        }
        for k in 1..n {
            // column 0: the new samples under older distributions
            table[k][0] = newest
                .samples
                .iter()
                .map(|s| self.generations[k].params.log_density(&s.x))
                .collect::<Result<_>>()?;
            for l in 1..n {
                table[k][l] = std::mem::take(&mut self.loglik[k - 1][l - 1]);
            }
        }
        self.loglik = table;
        Ok(())
    }

    /// `ρ[k][i] = p_t(x_i^(t-k)) / p̄(x_i^(t-k))`.
    pub fn likelihood_ratios(&self) -> Result<Vec<Vec<f64>>> {
        if self.is_empty() {
            return Err(Error::EmptyArchive);
        }
        let n = self.generations.len();
        let lambda = self.lambda();
        Ok((0..n)
            .map(|k| {
                (0..lambda)
                    .map(|i| {
                        let own = self.loglik[0][k][i];
                        let shift = (0..n)
                            .map(|l| self.loglik[l][k][i] - own)
                            .fold(f64::NEG_INFINITY, f64::max);
                        let scaled: f64 = (0..n).map(|l| (self.loglik[l][k][i] - own - shift).exp()).sum();
                        n as f64 * (-shift).exp() / scaled
                    })
                    .collect()
            })
            .collect())
    }

    /// Objective values of every stored sample, newest generation first.
    pub fn pooled_fvals(&self) -> Vec<f64> {
        self.generations
            .iter()
            .flat_map(|g| g.samples.iter().map(|s| s.f))
            .collect()
    }

    /// `r̂[k][i] = ŵ_i^(t-k) · ρ[k][i]` with importance-sampled utilities.
    pub fn rhat(&self, scheme: &WeightScheme, minimize: bool) -> Result<Vec<Vec<f64>>> {
        let ratios = self.likelihood_ratios()?;
        let flat_ratios: Vec<f64> = ratios.iter().flatten().copied().collect();
        let quantiles = is_quantiles(&self.pooled_fvals(), &flat_ratios, minimize)?;
        let lambda = self.lambda();
        ratios
            .iter()
            .enumerate()
            .map(|(k, row)| {
                row.iter()
                    .enumerate()
                    .map(|(i, &rho)| {
                        let q = quantiles[k * lambda + i];
                        if rho == 0.0 {
                            Ok(0.0)
                        } else if !(q.le > q.lt) {
                            // ratio absorbed by rounding; the interval average tends to w(q)
                            Ok(scheme.w(q.le) * rho)
                        } else {
                            Ok(utility_hat_is(q, scheme)? * rho)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// `r̂ / (λ (K_eff + 1))`, the per-sample coefficients of the reuse update.
    pub fn coefficients(&self, rhat: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let norm = (self.lambda() * self.len()) as f64;
        rhat.iter()
            .map(|row| row.iter().map(|r| r / norm).collect())
            .collect()
    }

    /// `(1 / (λ (K_eff + 1))) Σ_k Σ_i r̂[k][i] grad(x_i^(t-k))`.
    pub fn nat_grad_estimate<F>(&self, rhat: &[Vec<f64>], grad: F) -> Result<Vec<f64>>
    where
        F: FnMut(&D::Point) -> Result<Vec<f64>>,
    {
        let coeffs = self.coefficients(rhat);
        let terms = self
            .generations
            .iter()
            .zip(&coeffs)
            .flat_map(|(g, row)| row.iter().copied().zip(g.samples.iter().map(|s| &s.x)));
        weighted_gradient_sum(terms, grad)
    }

    /// Both sides of the weight-sum identity:
    /// `Σ r̂ / (λ (K+1))` and `W(max q̄≤) - W(0)`.
    pub fn weight_sum_identity(&self, rhat: &[Vec<f64>], scheme: &WeightScheme) -> Result<(f64, f64)> {
        if self.is_empty() {
            return Err(Error::EmptyArchive);
        }
        let lhs: f64 = self.coefficients(rhat).iter().flatten().sum();
        let ratios = self.likelihood_ratios()?;
        let n = (self.lambda() * self.len()) as f64;
        let q_max = ratios.iter().flatten().sum::<f64>() / n;
        Ok((lhs, scheme.integral(q_max) - scheme.integral(0.0)))
    }
}

/// `Σ c · grad(x)` accumulated in iteration order.
///
/// Both the plain and the reuse update paths go through this function.
pub fn weighted_gradient_sum<'a, P: 'a, I, F>(terms: I, mut grad: F) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = (f64, &'a P)>,
    F: FnMut(&P) -> Result<Vec<f64>>,
{
    let mut acc: Option<Vec<f64>> = None;
    for (c, x) in terms {
        let g = grad(x)?;
        let acc = acc.get_or_insert_with(|| vec![0.0; g.len()]);
        if acc.len() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: acc.len(),
                found: g.len(),
            });
        }
        for (a, v) in acc.iter_mut().zip(&g) {
            *a += c * v;
        }
    }
    acc.ok_or(Error::EmptyArchive)
}

/// Mixture importance-sampling estimators used to check the variance claim.
///
/// `samples[j]` are draws from `proposals[j]`; `mix[j]` are the mixing
/// coefficients `c_j`, nonnegative and summing to one.
pub mod estimators {
    use super::*;

    fn validate<D: SearchDistribution>(proposals: &[D], samples: &[Vec<D::Point>], mix: &[f64]) -> Result<()> {
        if proposals.len() != samples.len() || proposals.len() != mix.len() || proposals.is_empty() {
            return Err(Error::InvalidParameter(
                "proposals, sample sets, and mixing coefficients must have equal nonzero length".into(),
            ));
        }
        if mix.iter().any(|&c| !(c >= 0.0)) || (mix.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("mixing coefficients must be >= 0 and sum to 1".into()));
        }
        if samples.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidParameter("every proposal needs at least one sample".into()));
        }
        Ok(())
    }

    /// Average of per-proposal importance-sampling estimates:
    /// `Σ_j (1/n_j) Σ_i g(x) c_j p_t(x) / p_j(x)`.
    pub fn estimator_is1<D, G>(g: G, target: &D, proposals: &[D], samples: &[Vec<D::Point>], mix: &[f64]) -> Result<f64>
    where
        D: SearchDistribution,
        G: Fn(&D::Point) -> f64,
    {
        validate(proposals, samples, mix)?;
        let mut total = 0.0;
        for ((p, xs), &c) in proposals.iter().zip(samples).zip(mix) {
            let mut part = 0.0;
            for x in xs {
                let lp = p.log_density(x)?;
                if lp == f64::NEG_INFINITY {
                    return Err(Error::ZeroProposalDensity);
                }
                part += g(x) * c * (target.log_density(x)? - lp).exp();
            }
            total += part / xs.len() as f64;
        }
        Ok(total)
    }

    /// Mixture (balance-heuristic) estimator:
    /// `Σ_j (1/n_j) Σ_i g(x) c_j p_t(x) / Σ_k c_k p_k(x)`.
    pub fn estimator_is2<D, G>(g: G, target: &D, proposals: &[D], samples: &[Vec<D::Point>], mix: &[f64]) -> Result<f64>
    where
        D: SearchDistribution,
        G: Fn(&D::Point) -> f64,
    {
        validate(proposals, samples, mix)?;
        let log_mix: Vec<f64> = mix.iter().map(|c| c.ln()).collect();
        let mut total = 0.0;
        for (xs, &c) in samples.iter().zip(mix) {
            let mut part = 0.0;
            for x in xs {
                let terms: Vec<f64> = proposals
                    .iter()
                    .zip(&log_mix)
                    .map(|(p, lc)| Ok(lc + p.log_density(x)?))
                    .collect::<Result<_>>()?;
                let shift = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if shift == f64::NEG_INFINITY {
                    return Err(Error::ZeroProposalDensity);
                }
                let lse = shift + terms.iter().map(|t| (t - shift).exp()).sum::<f64>().ln();
                part += g(x) * c * (target.log_density(x)? - lse).exp();
            }
            total += part / xs.len() as f64;
        }
        Ok(total)
    }
}
