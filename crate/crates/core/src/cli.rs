//! The `igo-bench` command line.
//!
//! ```text
//! igo-bench run --function onemax --d 128 --variant cga --eta 1/d --K 1
//! igo-bench sweep grid.toml --out results/grid
//! igo-bench report results/grid
//! igo-bench selftest
//! ```
//!
//! Config files are flat TOML documents with the same keys as the flags
//! (`function`, `d`, `variant`, `lambda`, `K`, `eta`, `T`, `alpha`, `trials`,
//! `seed`, `budget`, `target`, `out`, `jobs`). A sweep file adds an `[axes]`
//! table whose keys `variant`, `lambda`, `K`, and `eta` hold lists. Flags
//! override file values.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 selftest failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Deserializer, Serialize};

use crate::algorithms::{bernoulli_update, gaussian_update, CmaVariant, Pbil, Cma};
use crate::benchmarks::Benchmark;
use crate::distributions::{clamp_bernoulli, BernoulliParams, GaussianParams, SearchDistribution};
use crate::error::{Error, Result};
use crate::harness::{
    default_lambda, persist_results, read_csv, read_summary, run_experiment_with_jobs, CsvRow, ExperimentConfig,
    ExperimentSummary,
};
use crate::reuse::{estimators, ReuseArchive, SampleRecord};
use crate::utility::{log_half_integral, plain_coefficients, rank_counts, utility_hat_plain, WeightScheme};
use crate::{algorithms::Variant, TrialRng};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_SELFTEST: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "igo-bench", version, about = "IGO optimizers with sample reuse: experiments and sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one experiment and write `<out>/<cell>.csv` and `.json`.
    Run {
        #[command(flatten)]
        settings: Settings,
    },
    /// Run the cartesian product of the `[axes]` of a sweep file.
    Sweep {
        /// Sweep file (TOML).
        file: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Aggregate every per-trial CSV in a directory into one table.
    Report {
        dir: PathBuf,
        /// Also write the table to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the fast invariant checks.
    Selftest,
}

/// Experiment settings shared by flags and config files. Every field is
/// optional so the two sources can be layered.
#[derive(Args, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Flat TOML config file; flags override its values.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub function: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub variant: Option<String>,
    /// Population size or "default" (4 + floor(3 ln d)).
    #[arg(long)]
    #[serde(default, deserialize_with = "num_or_str")]
    pub lambda: Option<String>,
    /// Number of past generations reused.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// PBIL learning rate, e.g. 0.01, "1/d", "16/d".
    #[arg(long)]
    #[serde(default, deserialize_with = "num_or_str")]
    pub eta: Option<String>,
    /// Step-threshold of the binary weight function.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<f64>,
    /// Minimal refresh rate of importance mixing.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn num_or_str<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum V {
        I(i64),
        F(f64),
        S(String),
    }
    Ok(Option::<V>::deserialize(de)?.map(|v| match v {
        V::I(i) => i.to_string(),
        V::F(f) => f.to_string(),
        V::S(s) => s,
    }))
}

impl Settings {
    /// `self` wins over `base` field by field.
    pub fn over(self, base: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: self.$f.or(base.$f)),* } };
        }
        pick!(config, function, d, variant, lambda, k, eta, t, alpha, trials, seed, budget, target, out, jobs)
    }

    pub fn from_toml(text: &str) -> Result<Settings> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {}", e.message())))
    }

    /// Flags layered over the config file named by `--config`, if any.
    pub fn resolve(self) -> Result<Settings> {
        match &self.config {
            None => Ok(self),
            Some(path) => {
                let base = Settings::from_toml(&fs::read_to_string(path)?)?;
                Ok(self.over(base))
            }
        }
    }

    pub fn to_config(&self) -> Result<ExperimentConfig> {
        let missing = |f: &str| Error::InvalidParameter(format!("missing required field `{f}`"));
        let benchmark: Benchmark = self.function.as_deref().ok_or_else(|| missing("function"))?.parse()?;
        let d = self.d.ok_or_else(|| missing("d"))?;
        if d == 0 {
            return Err(Error::InvalidParameter("field `d` must be >= 1".into()));
        }
        let variant: Variant = self.variant.as_deref().ok_or_else(|| missing("variant"))?.parse()?;
        let mut c = ExperimentConfig::new(benchmark, d, variant);
        c.lambda = self.lambda.as_deref().map(|s| parse_lambda(s, d)).transpose()?;
        c.eta = self.eta.as_deref().map(|s| parse_eta(s, d)).transpose()?;
        c.k = self.k.unwrap_or(c.k);
        c.t = self.t.unwrap_or(c.t);
        c.alpha = self.alpha.unwrap_or(c.alpha);
        c.trials = self.trials.unwrap_or(c.trials);
        c.seed = self.seed.unwrap_or(c.seed);
        c.budget = self.budget;
        c.target = self.target;
        c.validate()?;
        Ok(c)
    }
}

/// `"default"` or a positive integer.
pub fn parse_lambda(s: &str, d: usize) -> Result<usize> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("default") {
        return Ok(default_lambda(d));
    }
    s.parse()
        .map_err(|_| Error::InvalidParameter(format!("field `lambda`: expected an integer or \"default\", got {s:?}")))
}

/// Evaluates a product/quotient of numbers and `d`, left to right: `1/d`,
/// `16/d`, `0.5*d`, `0.01`.
pub fn parse_eta(s: &str, d: usize) -> Result<f64> {
    let err = || Error::InvalidParameter(format!("field `eta`: cannot evaluate {s:?}"));
    let factor = |tok: &str| -> Result<f64> {
        let tok = tok.trim();
        if tok == "d" {
            Ok(d as f64)
        } else {
            tok.parse::<f64>().map_err(|_| err())
        }
    };
    let mut value = None;
    let mut op = '*';
    let mut start = 0;
    let bytes: Vec<char> = s.chars().collect();
    for (i, &ch) in bytes.iter().chain(std::iter::once(&'\0')).enumerate() {
        if ch == '*' || ch == '/' || ch == '\0' {
            let tok: String = bytes[start..i].iter().collect();
            let v = factor(&tok)?;
            value = Some(match (value, op) {
                (None, _) => v,
                (Some(a), '*') => a * v,
                (Some(a), _) => a / v,
            });
            op = ch;
            start = i + 1;
        }
    }
    let v = value.ok_or_else(err)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("field `eta` must evaluate to a positive number, got {v}")))
    }
}

/// File stem identifying one experiment cell.
pub fn cell_name(c: &ExperimentConfig) -> String {
    let mut name = format!("{}_d{}_{}_lam{}_K{}", c.benchmark, c.d, c.variant, c.lambda(), c.k);
    if c.variant.is_binary() {
        name.push_str(&format!("_eta{}_T{}", c.eta(), c.t));
    }
    if c.variant == Variant::Cma(CmaVariant::ImportanceMixing) {
        name.push_str(&format!("_alpha{}", c.alpha));
    }
    name.push_str(&format!("_n{}_s{}", c.trials, c.seed));
    name
}

fn summary_line(s: &ExperimentSummary) -> String {
    let metric = s
        .performance_metric
        .map_or_else(|| "none (no successful trial)".to_string(), |m| format!("{m:.1}"));
    format!(
        "{}: {}/{} successes, mean evals {}, performance {}",
        cell_name(&s.config),
        s.successes,
        s.trials.len(),
        s.mean_evals_success.map_or("-".to_string(), |m| format!("{m:.1}")),
        metric
    )
}

fn jobs(settings: &Settings) -> usize {
    settings
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn cmd_run(settings: Settings) -> Result<ExperimentSummary> {
    let settings = settings.resolve()?;
    let config = settings.to_config()?;
    let summary = run_experiment_with_jobs(&config, jobs(&settings))?;
    let out = settings.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let (csv, json) = persist_results(&summary, &out, &cell_name(&config))?;
    println!("{}", summary_line(&summary));
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(summary)
}

/// List-valued axes of a sweep. Missing axes fall back to the base value.
#[derive(Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    #[serde(default)]
    pub variant: Vec<String>,
    #[serde(default, deserialize_with = "list_num_or_str")]
    pub lambda: Vec<String>,
    #[serde(default, rename = "K")]
    pub k: Vec<usize>,
    #[serde(default, deserialize_with = "list_num_or_str")]
    pub eta: Vec<String>,
}

fn list_num_or_str<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    struct W(#[serde(deserialize_with = "num_or_str")] Option<String>);
    Ok(Vec::<W>::deserialize(de)?.into_iter().filter_map(|w| w.0).collect())
}

/// Splits a sweep document into base settings and axes.
pub fn parse_sweep(text: &str) -> Result<(Settings, Axes)> {
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("sweep: {}", e.message())))?;
    let axes = match table.remove("axes") {
        None => Axes::default(),
        Some(v) => v
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidParameter(format!("sweep axes: {}", e.message())))?,
    };
    let base = Settings::from_toml(&toml::to_string(&table).map_err(|e| Error::InvalidParameter(e.to_string()))?)?;
    Ok((base, axes))
}

/// Cells in deterministic order: variant, then λ, then K, then η.
pub fn sweep_cells(base: &Settings, axes: &Axes) -> Vec<Settings> {
    fn axis<T: Clone>(values: &[T], base: Option<T>) -> Vec<Option<T>> {
        if values.is_empty() {
            vec![base]
        } else {
            values.iter().cloned().map(Some).collect()
        }
    }
    let mut cells = Vec::new();
    for variant in axis(&axes.variant, base.variant.clone()) {
        for lambda in axis(&axes.lambda, base.lambda.clone()) {
            for k in axis(&axes.k, base.k) {
                for eta in axis(&axes.eta, base.eta.clone()) {
                    cells.push(Settings {
                        variant: variant.clone(),
                        lambda: lambda.clone(),
                        k,
                        eta: eta.clone(),
                        ..base.clone()
                    });
                }
            }
        }
    }
    cells
}

/// One aggregated line of `sweep.csv` or a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
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
    pub trials: usize,
    pub successes: usize,
    pub success_probability: f64,
    pub mean_evals_success: Option<f64>,
    pub median_evals_success: Option<f64>,
    pub performance_metric: Option<f64>,
    /// Empty when the cell ran; otherwise the error message.
    pub error: String,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Groups per-trial rows by configuration, in order of first appearance.
pub fn aggregate(rows: &[CsvRow]) -> Vec<AggregateRow> {
    let mut groups: Vec<(String, Vec<&CsvRow>)> = Vec::new();
    for r in rows {
        let key = format!("{}|{}|{}|{}|{}|{:?}|{}|{}", r.function, r.d, r.variant, r.lambda, r.k, r.eta, r.t, r.alpha);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(_, g)| {
            let first = g[0];
            let evals: Vec<f64> = g.iter().filter(|r| r.success).map(|r| r.evaluations as f64).collect();
            let successes = evals.len();
            let p = successes as f64 / g.len() as f64;
            let mean = (successes > 0).then(|| evals.iter().sum::<f64>() / successes as f64);
            AggregateRow {
                function: first.function.clone(),
                d: first.d,
                variant: first.variant.clone(),
                lambda: first.lambda,
                k: first.k,
                eta: first.eta,
                t: first.t,
                alpha: first.alpha,
                trials: g.len(),
                successes,
                success_probability: p,
                mean_evals_success: mean,
                median_evals_success: median(evals),
                performance_metric: mean.map(|m| m / p),
                error: String::new(),
            }
        })
        .collect()
}

fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every cell of the sweep, skipping cells whose files already exist.
pub fn cmd_sweep(file: &Path, overrides: Settings) -> Result<Vec<AggregateRow>> {
    let (file_base, axes) = parse_sweep(&fs::read_to_string(file)?)?;
    let base = overrides.over(file_base);
    let out = base.out.clone().unwrap_or_else(|| PathBuf::from("results/sweep"));
    fs::create_dir_all(&out)?;
    let jobs = jobs(&base);
    let mut table = Vec::new();
    for cell in sweep_cells(&base, &axes) {
        let config = match cell.to_config() {
            Ok(c) => c,
            Err(e) => {
                eprintln!("skipping cell {:?}/{:?}/K={:?}/eta={:?}: {e}", cell.variant, cell.lambda, cell.k, cell.eta);
                table.push(AggregateRow {
                    function: cell.function.clone().unwrap_or_default(),
                    d: cell.d.unwrap_or(0),
                    variant: cell.variant.clone().unwrap_or_default(),
                    lambda: 0,
                    k: cell.k.unwrap_or(0),
                    eta: None,
                    t: cell.t.unwrap_or(0.25),
                    alpha: cell.alpha.unwrap_or(0.0),
                    trials: 0,
                    successes: 0,
                    success_probability: 0.0,
                    mean_evals_success: None,
                    median_evals_success: None,
                    performance_metric: None,
                    error: e.to_string(),
                });
                continue;
            }
        };
        let stem = cell_name(&config);
        let json = out.join(format!("{stem}.json"));
        let csv_path = out.join(format!("{stem}.csv"));
        let summary = if json.exists() && csv_path.exists() {
            println!("{stem}: already done");
            read_summary(&json)?
        } else {
            let s = run_experiment_with_jobs(&config, jobs)?;
            persist_results(&s, &out, &stem)?;
            println!("{}", summary_line(&s));
            s
        };
        let rows: Vec<CsvRow> = summary.trials.iter().map(|t| CsvRow::new(&config, t)).collect();
        table.extend(aggregate(&rows));
    }
    write_aggregate(&out.join("sweep.csv"), &table)?;
    println!("wrote {}", out.join("sweep.csv").display());
    Ok(table)
}

/// Aggregates every per-trial CSV (any `*.csv` except `sweep.csv` and
/// `report.csv`) found directly in `dir`.
pub fn cmd_report(dir: &Path, out: Option<&Path>) -> Result<Vec<AggregateRow>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter(|p| !matches!(p.file_name().and_then(|n| n.to_str()), Some("sweep.csv" | "report.csv")))
        .collect();
    paths.sort();
    let mut rows = Vec::new();
    for p in &paths {
        rows.extend(read_csv(p)?);
    }
    let table = aggregate(&rows);
    println!("function,d,variant,lambda,K,eta,trials,successes,mean_evals,median_evals,performance");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.1}"));
    for r in &table {
        println!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.function,
            r.d,
            r.variant,
            r.lambda,
            r.k,
            r.eta.map_or(String::new(), |e| e.to_string()),
            r.trials,
            r.successes,
            opt(r.mean_evals_success),
            opt(r.median_evals_success),
            opt(r.performance_metric)
        );
    }
    if let Some(path) = out {
        write_aggregate(path, &table)?;
    }
    Ok(table)
}

/// Knobs for the selftest. `log_half_integral` exists so a mutated `W` can be
/// injected to show the weight-sum check notices it.
#[derive(Clone, Copy)]
pub struct SelftestOptions {
    pub log_half_integral: fn(f64) -> f64,
    pub seed: u64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            log_half_integral,
            seed: 20_160_701,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn tie_laden(rng: &mut TrialRng, n: usize) -> Vec<f64> {
    let levels = rng.random_range(1..=n);
    (0..n).map(|_| rng.random_range(0..levels) as f64).collect()
}

fn check_weight_sum(opts: &SelftestOptions, rng: &mut TrialRng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let step = WeightScheme::StepThreshold { t: 0.25 };
    for _ in 0..200 {
        let lambda = rng.random_range(2..40);
        let f = tie_laden(rng, lambda);
        let counts = rank_counts(&f, true)?;
        let n = lambda as f64;
        // LogHalf: W(1) - W(0) = 1
        let sum_log: f64 = counts
            .iter()
            .map(|c| {
                let (le, lt) = (c.le as f64 / n, c.lt as f64 / n);
                ((opts.log_half_integral)(le) - (opts.log_half_integral)(lt)) / (le - lt) / n
            })
            .sum();
        let lib_log: f64 = utility_hat_plain(&counts, &WeightScheme::LogHalf, lambda)?.iter().sum::<f64>() / n;
        let sum_step: f64 = utility_hat_plain(&counts, &step, lambda)?.iter().sum::<f64>() / n;
        worst = worst.max((sum_log - 1.0).abs()).max((lib_log - 1.0).abs()).max(sum_step.abs());
    }
    let mut worst_reuse: f64 = 0.0;
    for k in [1usize, 3] {
        for _ in 0..20 {
            let d = 5;
            let mut archive = ReuseArchive::new(k);
            for g in 0..=k + 1 {
                let theta = BernoulliParams::new((0..d).map(|_| rng.random_range(0.2..0.8)).collect())?;
                let xs = theta.sample(6, rng);
                let recs = xs
                    .into_iter()
                    .map(|x| SampleRecord { f: crate::benchmarks::onemax(&x), x, generation: g as u64 })
                    .collect();
                archive.push(theta, recs)?;
            }
            for scheme in [WeightScheme::LogHalf, step.clone()] {
                let rhat = archive.rhat(&scheme, false)?;
                let (lhs, rhs) = archive.weight_sum_identity(&rhat, &scheme)?;
                worst_reuse = worst_reuse.max((lhs - rhs).abs());
            }
        }
    }
    Ok((
        worst <= 1e-12 && worst_reuse < 1e-9,
        format!("plain max error {worst:.2e}, reuse max error {worst_reuse:.2e}"),
    ))
}

fn check_k0_reduction(rng: &mut TrialRng) -> Result<(bool, String)> {
    let mut ok = true;
    for _ in 0..20 {
        let d = rng.random_range(2..12);
        let lambda = rng.random_range(2..10);
        let eta = rng.random_range(0.01..0.5);
        let theta = BernoulliParams::new((0..d).map(|_| rng.random_range(0.1..0.9)).collect())?;
        let mut pbil = Pbil::new(theta, lambda, eta, 0, 0.25, true)?;
        let theta = pbil.theta().clone();
        let xs = pbil.ask(rng);
        let f: Vec<f64> = xs.iter().map(|x| crate::benchmarks::leading_ones(x)).collect();
        let coeffs = plain_coefficients(&f, &WeightScheme::StepThreshold { t: 0.25 }, false)?;
        let plain = clamp_bernoulli(&bernoulli_update(&theta, eta, &coeffs, &xs)?, d)?;
        pbil.tell(xs, &f)?;
        ok &= pbil.theta() == &plain;

        let g = GaussianParams::new(
            DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::identity(d, d) * rng.random_range(0.5..2.0),
        )?;
        let mut cma = Cma::new(g.clone(), lambda, 0, CmaVariant::ReuseA)?;
        let ys = cma.ask(rng);
        let fy: Vec<f64> = ys.iter().map(|y| y.norm_squared()).collect();
        let c = plain_coefficients(&fy, &WeightScheme::LogHalf, true)?;
        let r = cma.rates();
        let expected = gaussian_update(&g, r.c_m, r.c_mu, (&c, &ys), (&c, &ys), None)?;
        cma.tell(ys, &fy)?;
        ok &= cma.params().mean() == expected.mean() && cma.params().cov() == expected.cov();
    }
    Ok((ok, "20 Bernoulli + 20 Gaussian configurations".into()))
}

fn check_cga(rng: &mut TrialRng) -> Result<(bool, String)> {
    let d = 16;
    let eta = 1.0 / d as f64;
    let seed: u64 = rng.random();
    let mut pbil = Pbil::new(BernoulliParams::uniform(d, 0.5)?, 2, eta, 0, 0.25, true)?;
    let mut r1 = TrialRng::seed_from_u64(seed);
    let mut r2 = TrialRng::seed_from_u64(seed);
    let mut theta = vec![0.5; d];
    let (lo, hi) = (1.0 / d as f64, 1.0 - 1.0 / d as f64);
    let mut f = |x: &Vec<bool>| crate::benchmarks::onemax(x);
    for step in 0..300 {
        pbil.step(&mut f, &mut r1)?;
        let a: Vec<bool> = theta.iter().map(|&t| r2.random::<f64>() < t).collect();
        let b: Vec<bool> = theta.iter().map(|&t| r2.random::<f64>() < t).collect();
        let (fa, fb) = (f(&a), f(&b));
        if fa != fb {
            let (win, lose) = if fa > fb { (&a, &b) } else { (&b, &a) };
            for i in 0..d {
                if win[i] != lose[i] {
                    let delta = if win[i] { eta / 2.0 } else { -eta / 2.0 };
                    theta[i] = (theta[i] + delta).clamp(lo, hi);
                }
            }
        }
        if pbil.theta().theta() != theta.as_slice() {
            return Ok((false, format!("diverged at step {step}")));
        }
    }
    Ok((true, "300 steps bitwise identical".into()))
}

fn check_estimators(rng: &mut TrialRng) -> Result<(bool, String)> {
    let target = GaussianParams::isotropic(DVector::from_element(1, 0.0), 1.0)?;
    let other = GaussianParams::isotropic(DVector::from_element(1, 1.0), 1.0)?;
    let proposals = [target.clone(), other];
    let mix = [0.5, 0.5];
    let reps = 2000;
    let (mut s1, mut s2) = (Vec::with_capacity(reps), Vec::with_capacity(reps));
    for _ in 0..reps {
        let samples: Vec<Vec<DVector<f64>>> = proposals.iter().map(|p| p.sample(20, rng)).collect();
        s1.push(estimators::estimator_is1(|x| x[0], &target, &proposals, &samples, &mix)?);
        s2.push(estimators::estimator_is2(|x| x[0], &target, &proposals, &samples, &mix)?);
    }
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    };
    let ((m1, se1), (m2, se2)) = (stats(&s1), stats(&s2));
    let ok = m1.abs() < 4.0 * se1 && m2.abs() < 4.0 * se2;
    Ok((ok, format!("IS1 mean {m1:.4} (se {se1:.4}), IS2 mean {m2:.4} (se {se2:.4}), truth 0")))
}

type CheckFn = fn(&SelftestOptions, &mut TrialRng) -> Result<(bool, String)>;

pub fn selftest(opts: &SelftestOptions) -> Vec<CheckResult> {
    let mut rng = TrialRng::seed_from_u64(opts.seed);
    let checks: [(&'static str, CheckFn); 4] = [
        ("weight-sum identities", |o, r| check_weight_sum(o, r)),
        ("K=0 reductions", |_, r| check_k0_reduction(r)),
        ("cGA equivalence (d=16)", |_, r| check_cga(r)),
        ("estimator unbiasedness", |_, r| check_estimators(r)),
    ];
    checks
        .iter()
        .map(|(name, check)| match check(opts, &mut rng) {
            Ok((passed, detail)) => CheckResult { name, passed, detail },
            Err(e) => CheckResult {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        })
        .collect()
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Csv(c) if c.is_io_error() => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Run { settings } => cmd_run(settings).map(|_| EXIT_OK),
        Command::Sweep { file, settings } => settings
            .resolve()
            .and_then(|s| cmd_sweep(&file, s))
            .map(|_| EXIT_OK),
        Command::Report { dir, out } => cmd_report(&dir, out.as_deref()).map(|_| EXIT_OK),
        Command::Selftest => {
            let results = selftest(&SelftestOptions::default());
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            Ok(if results.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_SELFTEST })
        }
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_expressions() {
        assert_eq!(parse_eta("1/d", 512).unwrap(), 0.001953125);
        assert_eq!(parse_eta("16/d", 64).unwrap(), 0.25);
        assert_eq!(parse_eta("0.5*d", 4).unwrap(), 2.0);
        assert_eq!(parse_eta("0.01", 4).unwrap(), 0.01);
        assert_eq!(parse_eta(" 1 / d ", 8).unwrap(), 0.125);
        assert!(parse_eta("1/x", 4).is_err());
        assert!(parse_eta("", 4).is_err());
        assert!(parse_eta("0/d", 4).is_err());
    }

    #[test]
    fn lambda_shorthand() {
        assert_eq!(parse_lambda("default", 20).unwrap(), 12);
        assert_eq!(parse_lambda("7", 20).unwrap(), 7);
        assert!(parse_lambda("many", 20).is_err());
    }

    #[test]
    fn toml_and_flags_layer() {
        let file = Settings::from_toml("function = \"onemax\"\nd = 32\nvariant = \"cga\"\neta = \"2/d\"\nK = 3\n").unwrap();
        let flags = Settings {
            k: Some(1),
            ..Default::default()
        };
        let c = flags.over(file).to_config().unwrap();
        assert_eq!(c.k, 1);
        assert_eq!(c.eta, Some(2.0 / 32.0));
        let numeric = Settings::from_toml("function = \"sphere\"\nd = 5\nvariant = \"a\"\nlambda = 9\neta = 0.5").unwrap();
        let c = numeric.to_config().unwrap();
        assert_eq!(c.lambda, Some(9));
        let err = Settings::from_toml("functon = \"x\"").unwrap_err().to_string();
        assert!(err.contains("functon"), "{err}");
        let err = Settings::default().to_config().unwrap_err().to_string();
        assert!(err.contains("function"));
    }

    #[test]
    fn sweep_product() {
        let (base, axes) = parse_sweep(
            "function = \"onemax\"\nd = 16\nvariant = \"cga\"\n[axes]\nK = [0, 1, 3]\nlambda = [2]\n",
        )
        .unwrap();
        let cells = sweep_cells(&base, &axes);
        assert_eq!(cells.len(), 3);
        assert_eq!(cells.iter().map(|c| c.k.unwrap()).collect::<Vec<_>>(), vec![0, 1, 3]);
        assert!(parse_sweep("d = 3\n[axes]\nmu = [1]\n").is_err());
    }

    #[test]
    fn cell_names_distinguish_axes() {
        let mut a = ExperimentConfig::new(Benchmark::OneMax, 16, Variant::Cga);
        let b = a.clone();
        a.k = 2;
        assert_ne!(cell_name(&a), cell_name(&b));
    }

    #[test]
    fn aggregate_groups() {
        let mut c = ExperimentConfig::new(Benchmark::OneMax, 8, Variant::Cga);
        c.trials = 3;
        let s = crate::harness::run_experiment(&c).unwrap();
        let mut rows: Vec<CsvRow> = s.trials.iter().map(|t| CsvRow::new(&c, t)).collect();
        c.k = 1;
        rows.extend(s.trials.iter().map(|t| CsvRow::new(&c, t)));
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].trials, 3);
        assert_eq!(agg[0].performance_metric, s.performance_metric);
        assert_eq!(median(vec![3.0, 1.0, 2.0, 10.0]), Some(2.5));
    }

    #[test]
    fn selftest_passes_and_catches_mutation() {
        let results = selftest(&SelftestOptions::default());
        assert!(results.iter().all(|r| r.passed), "{results:?}");
        let mutated = SelftestOptions {
            log_half_integral: |s| -log_half_integral(s),
            ..Default::default()
        };
        let results = selftest(&mutated);
        assert!(!results[0].passed);
        assert!(results[1..].iter().all(|r| r.passed));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["igo-bench", "run", "--function", "nope", "--d", "4", "--variant", "cga"]), EXIT_CONFIG);
        assert_eq!(run(["igo-bench", "bogus"]), EXIT_CONFIG);
        assert_eq!(run(["igo-bench", "report", "/definitely/not/here"]), EXIT_IO);
    }
}
