//! Trials, experiments, and result files.
//!
//! A trial runs one optimizer from a seeded start until it succeeds, runs out
//! of budget, or its covariance collapses. Generations are atomic: a new one
//! starts only if a full population still fits in the budget, so
//! `evaluations <= budget` always holds.
//!
//! Trial `i` of an experiment uses seed `seed + i`, which makes parallel and
//! sequential execution produce identical results.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{Cma, Pbil, Variant};
use crate::benchmarks::{default_spec, eval_binary, eval_continuous, Benchmark, BenchmarkSpec, Domain};
use crate::distributions::{min_eigenvalue, BernoulliParams, GaussianParams};
use crate::error::{Error, Result};
use crate::TrialRng;

/// `4 + floor(3 ln d)`.
pub fn default_lambda(d: usize) -> usize {
    4 + (3.0 * (d as f64).ln()).floor() as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(rename = "function")]
    pub benchmark: Benchmark,
    pub d: usize,
    pub variant: Variant,
    /// `None` means 2 for cGA and `4 + floor(3 ln d)` otherwise.
    pub lambda: Option<usize>,
    #[serde(rename = "K")]
    pub k: usize,
    /// PBIL learning rate, `1/d` when unset. Unused by the Gaussian variants.
    pub eta: Option<f64>,
    #[serde(rename = "T")]
    pub t: f64,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    pub budget: Option<u64>,
    pub target: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(benchmark: Benchmark, d: usize, variant: Variant) -> Self {
        Self {
            benchmark,
            d,
            variant,
            lambda: None,
            k: 0,
            eta: None,
            t: 0.25,
            alpha: 0.0,
            trials: 50,
            seed: 0,
            budget: None,
            target: None,
        }
    }

    pub fn lambda(&self) -> usize {
        match (self.lambda, self.variant) {
            (Some(l), _) => l,
            (None, Variant::Cga) => 2,
            (None, _) => default_lambda(self.d),
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(1.0 / self.d as f64)
    }

    /// Problem metadata with the budget and target overrides applied.
    pub fn spec(&self) -> Result<BenchmarkSpec> {
        let mut spec = default_spec(self.benchmark, self.d)?;
        if let Some(b) = self.budget {
            spec.budget = b;
        }
        if let Some(t) = self.target {
            spec.target = t;
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        let lambda = self.lambda();
        if lambda < 2 {
            return bad(format!("lambda must be >= 2, got {lambda}"));
        }
        if self.variant == Variant::Cga && lambda != 2 {
            return bad(format!("cga uses lambda = 2, got {lambda}; use pbil for other sizes"));
        }
        if self.benchmark.is_binary() != self.variant.is_binary() {
            return bad(format!("variant {} does not apply to function {}", self.variant, self.benchmark));
        }
        if !(self.t > 0.0 && self.t < 0.5) {
            return bad(format!("T must be in (0, 0.5), got {}", self.t));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        let eta = self.eta();
        if !(eta > 0.0 && eta.is_finite()) {
            return bad(format!("eta must be positive, got {eta}"));
        }
        self.spec().map(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    TargetReached,
    OptimumSampled,
    Budget,
    EigenFloor,
    Degeneracy,
}

impl TerminationReason {
    pub fn is_success(self) -> bool {
        matches!(self, Self::TargetReached | Self::OptimumSampled)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::TargetReached => "target-reached",
            Self::OptimumSampled => "optimum-sampled",
            Self::Budget => "budget",
            Self::EigenFloor => "eigen-floor",
            Self::Degeneracy => "degeneracy",
        }
    }
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TerminationReason {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Self::TargetReached,
            Self::OptimumSampled,
            Self::Budget,
            Self::EigenFloor,
            Self::Degeneracy,
        ]
        .into_iter()
        .find(|r| r.name() == s)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown termination reason {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub evaluations: u64,
    /// Best value over every evaluated point; `None` if nothing was evaluated.
    pub best_f: Option<f64>,
    pub iterations: u64,
    pub reason: TerminationReason,
}

/// Per-step bookkeeping collected by [`run_trial_traced`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrialTrace {
    pub step_evaluations: Vec<usize>,
    /// Calls observed by the objective wrapper itself.
    pub objective_calls: u64,
}

pub fn run_trial(config: &ExperimentConfig, trial: usize, seed: u64) -> Result<TrialResult> {
    run_trial_traced(config, trial, seed).map(|(r, _)| r)
}

struct Tracker {
    evaluations: u64,
    iterations: u64,
    best: Option<f64>,
    trace: TrialTrace,
    maximize: bool,
}

impl Tracker {
    fn record(&mut self, evaluations: usize, best_f: Option<f64>) {
        self.evaluations += evaluations as u64;
        self.iterations += 1;
        self.trace.step_evaluations.push(evaluations);
        if let Some(f) = best_f {
            let better = match self.best {
                None => true,
                Some(b) => (self.maximize && f > b) || (!self.maximize && f < b),
            };
            if better {
                self.best = Some(f);
            }
        }
    }
}

/// Runs one trial and also returns per-step evaluation counts.
pub fn run_trial_traced(config: &ExperimentConfig, trial: usize, seed: u64) -> Result<(TrialResult, TrialTrace)> {
    config.validate()?;
    let spec = config.spec()?;
    let lambda = config.lambda();
    let mut rng = TrialRng::seed_from_u64(seed);
    let mut calls = 0u64;
    let mut tr = Tracker {
        evaluations: 0,
        iterations: 0,
        best: None,
        trace: TrialTrace::default(),
        maximize: spec.benchmark.is_binary(),
    };
    let fits = |evals: u64| evals + lambda as u64 <= spec.budget;

    let reason = match spec.domain {
        Domain::Binary => {
            let theta = BernoulliParams::uniform(config.d, 0.5)?;
            let mut opt = Pbil::new(theta, lambda, config.eta(), config.k, config.t, true)?;
            let mut objective = |x: &Vec<bool>| {
                calls += 1;
                eval_binary(spec.benchmark, x).expect("binary benchmark")
            };
            loop {
                if !fits(tr.evaluations) {
                    break TerminationReason::Budget;
                }
                let rep = opt.step(&mut objective, &mut rng)?;
                tr.record(rep.evaluations, rep.best_f);
                if rep.best_f.is_some_and(|f| f >= spec.optimum) {
                    break TerminationReason::OptimumSampled;
                }
            }
        }
        Domain::Continuous { lo, hi } => {
            let sigma = spec.sigma0().expect("continuous spec");
            let mean = DVector::from_fn(config.d, |_, _| rng.random_range(lo..hi));
            let params = GaussianParams::new(mean, DMatrix::identity(config.d, config.d) * (sigma * sigma))?;
            let Variant::Cma(variant) = config.variant else {
                unreachable!("validated above")
            };
            let mut opt = Cma::new(params, lambda, config.k, variant)?.with_alpha(config.alpha)?;
            let mut objective = |x: &DVector<f64>| {
                calls += 1;
                eval_continuous(spec.benchmark, x.as_slice()).expect("continuous benchmark")
            };
            loop {
                if !fits(tr.evaluations) {
                    break TerminationReason::Budget;
                }
                match opt.step(&mut objective, &mut rng) {
                    Ok(rep) => tr.record(rep.evaluations, rep.best_f),
                    Err(Error::NotPositiveDefinite | Error::NanObjective) => break TerminationReason::Degeneracy,
                    Err(e) => return Err(e),
                }
                if tr.best.is_some_and(|f| f < spec.target) {
                    break TerminationReason::TargetReached;
                }
                if min_eigenvalue(opt.params().cov()) < spec.eigen_floor {
                    break TerminationReason::EigenFloor;
                }
            }
        }
    };
    tr.trace.objective_calls = calls;
    let result = TrialResult {
        trial,
        seed,
        success: reason.is_success(),
        evaluations: tr.evaluations,
        best_f: tr.best,
        iterations: tr.iterations,
        reason,
    };
    Ok((result, tr.trace))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    pub successes: usize,
    pub success_probability: f64,
    pub mean_evals_success: Option<f64>,
    /// Mean evaluations of successful trials over the success probability,
    /// i.e. the expected cost per success under independent restarts.
    pub performance_metric: Option<f64>,
}

impl ExperimentSummary {
    pub fn from_trials(config: ExperimentConfig, trials: Vec<TrialResult>) -> Self {
        let successes = trials.iter().filter(|t| t.success).count();
        let success_probability = if trials.is_empty() {
            0.0
        } else {
            successes as f64 / trials.len() as f64
        };
        let mean_evals_success = (successes > 0).then(|| {
            trials.iter().filter(|t| t.success).map(|t| t.evaluations as f64).sum::<f64>() / successes as f64
        });
        Self {
            config,
            successes,
            success_probability,
            performance_metric: mean_evals_success.map(|m| m / success_probability),
            mean_evals_success,
            trials,
        }
    }
}

/// Runs all trials on the global rayon pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, i, config.seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentSummary::from_trials(config.clone(), trials))
}

/// Runs all trials with at most `jobs` worker threads.
pub fn run_experiment_with_jobs(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_experiment(config))
}

/// One CSV row per trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub function: String,
    pub d: usize,
    pub variant: String,
    pub lambda: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub eta: Option<f64>,
    #[serde(rename = "T")]
    pub t: f64,
    pub alpha: f64,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub evaluations: u64,
    pub best_f: Option<f64>,
    pub iterations: u64,
    pub reason: String,
}

pub const CSV_HEADER: [&str; 15] = [
    "function",
    "d",
    "variant",
    "lambda",
    "K",
    "eta",
    "T",
    "alpha",
    "trial",
    "seed",
    "success",
    "evaluations",
    "best_f",
    "iterations",
    "reason",
];

impl CsvRow {
    pub fn new(config: &ExperimentConfig, t: &TrialResult) -> Self {
        Self {
            function: config.benchmark.to_string(),
            d: config.d,
            variant: config.variant.to_string(),
            lambda: config.lambda(),
            k: config.k,
            eta: config.variant.is_binary().then(|| config.eta()),
            t: config.t,
            alpha: config.alpha,
            trial: t.trial,
            seed: t.seed,
            success: t.success,
            evaluations: t.evaluations,
            best_f: t.best_f,
            iterations: t.iterations,
            reason: t.reason.to_string(),
        }
    }
}

pub fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<CsvRow>, _>>()?;
    Ok(rows)
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`, creating `dir`.
pub fn persist_results(summary: &ExperimentSummary, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let rows: Vec<CsvRow> = summary.trials.iter().map(|t| CsvRow::new(&summary.config, t)).collect();
    write_csv(&csv_path, &rows)?;
    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    fs::write(&json_path, json)?;
    Ok((csv_path, json_path))
}

pub fn read_summary(path: &Path) -> Result<ExperimentSummary> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
