//! Quantile-based utilities.
//!
//! A utility is described by a non-increasing weight function `w` on
//! `[0, ∞)` and its integral `W(s) = ∫₀ˢ w`. A candidate whose quantile
//! interval is `[q_lt, q_le]` receives the integral average of `w` over that
//! interval, `(W(q_le) - W(q_lt)) / (q_le - q_lt)`, which handles ties and
//! reduces to `w(q)` when the interval shrinks to a point.
//!
//! Plain ranking and the importance-sampled estimate share one path: the plain
//! utility is the importance-sampled one with every likelihood ratio equal to 1.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Choice of the weight function `w` and its integral `W`.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightScheme {
    /// `w = 1/(2T)` below `T`, `0` on the plateau, `-1/(2T)` above `1 - T`.
    StepThreshold { t: f64 },
    /// `w(s) = -2 ln(2s)` for `s <= 1/2`, zero beyond.
    LogHalf,
    /// Piecewise-constant `w` that reproduces the standard CMA-ES recombination
    /// weights for `lambda` distinct candidates.
    CmaStandard { lambda: usize },
}

impl WeightScheme {
    /// Step-threshold scheme; `t` must lie in `(0, 1/2)`.
    pub fn step(t: f64) -> Result<Self> {
        if t > 0.0 && t < 0.5 {
            Ok(Self::StepThreshold { t })
        } else {
            Err(Error::InvalidParameter(format!("threshold T must be in (0, 0.5), got {t}")))
        }
    }

    /// The weight function `w(s)`.
    pub fn w(&self, s: f64) -> f64 {
        match *self {
            Self::StepThreshold { t } => {
                if s <= t {
                    1.0 / (2.0 * t)
                } else if s <= 1.0 - t {
                    0.0
                } else {
                    -1.0 / (2.0 * t)
                }
            }
            Self::LogHalf => {
                if s <= 0.5 {
                    -2.0 * (2.0 * s).ln()
                } else {
                    0.0
                }
            }
            Self::CmaStandard { lambda } => {
                let weights = cma_standard_weights(lambda.max(2));
                let n = weights.len() as f64;
                let k = ((s * n).ceil() as usize).clamp(1, weights.len());
                if s > 1.0 {
                    0.0
                } else {
                    weights[k - 1] * n
                }
            }
        }
    }

    /// The integral `W(s) = ∫₀ˢ w(u) du`.
    pub fn integral(&self, s: f64) -> f64 {
        match *self {
            Self::StepThreshold { t } => step_integral(s, t),
            Self::LogHalf => log_half_integral(s),
            Self::CmaStandard { lambda } => {
                let weights = cma_standard_weights(lambda.max(2));
                let n = weights.len();
                if s >= 1.0 {
                    return 1.0;
                }
                let pos = s.max(0.0) * n as f64;
                let k = (pos.floor() as usize).min(n - 1);
                let before: f64 = weights[..k].iter().sum();
                before + weights[k] * (pos - k as f64)
            }
        }
    }
}

/// Integral of the step-threshold weight. The last branch `(1 - s)/(2T)` is
/// used for every `s > 1 - T`, including `s > 1`.
pub fn step_integral(s: f64, t: f64) -> f64 {
    if s <= t {
        s / (2.0 * t)
    } else if s <= 1.0 - t {
        0.5
    } else {
        (1.0 - s) / (2.0 * t)
    }
}

/// Integral of `-2 ln(2s) 1{s <= 1/2}`: `2s - 2s ln(2s)` up to one half, 1 after.
pub fn log_half_integral(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s <= 0.5 {
        2.0 * s - 2.0 * s * (2.0 * s).ln()
    } else {
        1.0
    }
}

/// Weak and strict rank counts of one candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankCounts {
    /// Number of candidates at least as good (the candidate itself included).
    pub le: usize,
    /// Number of strictly better candidates.
    pub lt: usize,
}

/// Importance-sampled quantile estimates of one candidate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsQuantiles {
    pub le: f64,
    pub lt: f64,
}

fn check_finite(fvals: &[f64]) -> Result<()> {
    if fvals.iter().any(|f| f.is_nan()) {
        Err(Error::NanObjective)
    } else {
        Ok(())
    }
}

/// Indices sorted from best to worst, stable for ties.
pub(crate) fn sorted_order(fvals: &[f64], minimize: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fvals.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = fvals[a].partial_cmp(&fvals[b]).unwrap_or(Ordering::Equal);
        if minimize {
            ord
        } else {
            ord.reverse()
        }
    });
    order
}

/// Groups of exactly-tied indices, best group first.
fn tie_groups(fvals: &[f64], minimize: bool) -> Vec<Vec<usize>> {
    let order = sorted_order(fvals, minimize);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        match groups.last_mut() {
            Some(g) if fvals[g[0]] == fvals[idx] => g.push(idx),
            _ => groups.push(vec![idx]),
        }
    }
    groups
}

/// `rk_le` and `rk_lt` for every candidate.
pub fn rank_counts(fvals: &[f64], minimize: bool) -> Result<Vec<RankCounts>> {
    check_finite(fvals)?;
    let mut out = vec![RankCounts { le: 0, lt: 0 }; fvals.len()];
    let mut before = 0;
    for group in tie_groups(fvals, minimize) {
        let le = before + group.len();
        for &i in &group {
            out[i] = RankCounts { le, lt: before };
        }
        before = le;
    }
    Ok(out)
}

/// Importance-sampled quantiles over a pooled sample.
///
/// `ratios[j]` is `p_t(x_j) / p̄(x_j)`. The normalizer is the pool size
/// `λ (K + 1)`. With all ratios equal to 1 the result is `rk / λ` exactly.
pub fn is_quantiles(fvals: &[f64], ratios: &[f64], minimize: bool) -> Result<Vec<IsQuantiles>> {
    if fvals.len() != ratios.len() {
        return Err(Error::DimensionMismatch {
            expected: fvals.len(),
            found: ratios.len(),
        });
    }
    check_finite(fvals)?;
    if let Some(&r) = ratios.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::InvalidParameter(format!("likelihood ratio {r} is not finite and nonnegative")));
    }
    let n = fvals.len() as f64;
    let mut out = vec![IsQuantiles { le: 0.0, lt: 0.0 }; fvals.len()];
    let mut running = 0.0;
    for group in tie_groups(fvals, minimize) {
        let below = running;
        for &i in &group {
            running += ratios[i];
        }
        let q = IsQuantiles {
            le: running / n,
            lt: below / n,
        };
        for &i in &group {
            out[i] = q;
        }
    }
    Ok(out)
}

/// Integral average `(W(q_le) - W(q_lt)) / (q_le - q_lt)`.
pub fn utility_hat_is(q: IsQuantiles, scheme: &WeightScheme) -> Result<f64> {
    if !(q.le > q.lt) {
        return Err(Error::DegenerateQuantiles { q_le: q.le, q_lt: q.lt });
    }
    Ok((scheme.integral(q.le) - scheme.integral(q.lt)) / (q.le - q.lt))
}

/// Plain-ranking utilities `ŵ_i`.
pub fn utility_hat_plain(counts: &[RankCounts], scheme: &WeightScheme, lambda: usize) -> Result<Vec<f64>> {
    let n = lambda as f64;
    counts
        .iter()
        .map(|c| {
            utility_hat_is(
                IsQuantiles {
                    le: c.le as f64 / n,
                    lt: c.lt as f64 / n,
                },
                scheme,
            )
        })
        .collect()
}

/// Per-candidate coefficients `ŵ_i / λ` of the plain IGO update.
pub fn plain_coefficients(fvals: &[f64], scheme: &WeightScheme, minimize: bool) -> Result<Vec<f64>> {
    let lambda = fvals.len();
    let counts = rank_counts(fvals, minimize)?;
    let n = lambda as f64;
    Ok(utility_hat_plain(&counts, scheme, lambda)?
        .into_iter()
        .map(|w| w / n)
        .collect())
}

/// Standard CMA-ES recombination weights indexed by rank (best first).
pub fn cma_standard_weights(lambda: usize) -> Vec<f64> {
    let half = ((lambda as f64 + 1.0) / 2.0).ln();
    let raw: Vec<f64> = (1..=lambda).map(|i| (half - (i as f64).ln()).max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// CMA weights assigned to each candidate by its rank; ties are broken by index.
pub fn cma_rank_coefficients(fvals: &[f64], minimize: bool) -> Result<Vec<f64>> {
    check_finite(fvals)?;
    let weights = cma_standard_weights(fvals.len());
    let mut out = vec![0.0; fvals.len()];
    for (rank, idx) in sorted_order(fvals, minimize).into_iter().enumerate() {
        out[idx] = weights[rank];
    }
    Ok(out)
}

/// Effective selection mass `1 / Σ w_i²` of weights summing to one.
pub fn mueff(weights: &[f64]) -> Result<f64> {
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    if sq > 0.0 {
        Ok(1.0 / sq)
    } else {
        Err(Error::InvalidParameter("all weights are zero".into()))
    }
}
