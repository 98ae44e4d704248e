//! Multi-replication benchmark harness.
//!
//! Each replication regenerates its dataset from `seed0 + index`, runs the
//! full pipeline (factor step, optional group-count and penalty selection,
//! final fit) and scores the result against the generator truth.
//! Replications are independent and may run on a worker pool; results are
//! merged by replication index, so parallel and serial runs agree exactly.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{self, FactorDecomposition};
use crate::selection::{self, ProbeConfig, SolverChoice};
use crate::solver;

use super::generate::{generate_collinearity_case, generate_scenario_ab, generate_toy, ScenarioKind};
use super::metrics::{rand_index, selection_metrics, MetricsReport};
use super::SyntheticDataset;

/// Benchmark scenario with its generator parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioSpec {
    ScenarioA { a: f64, n: usize, p: usize, r: usize },
    ScenarioB { a: f64, n: usize, p: usize, r: usize },
    Collinearity { s: usize, n: usize, p: usize },
    Toy { rho: f64, n: usize, p: usize },
}

impl ScenarioSpec {
    pub fn generate(&self, seed: u64) -> Result<SyntheticDataset> {
        match *self {
            ScenarioSpec::ScenarioA { a, n, p, r } => {
                generate_scenario_ab(ScenarioKind::A, a, n, p, r, seed)
            }
            ScenarioSpec::ScenarioB { a, n, p, r } => {
                generate_scenario_ab(ScenarioKind::B, a, n, p, r, seed)
            }
            ScenarioSpec::Collinearity { s, n, p } => generate_collinearity_case(s, n, p, seed),
            ScenarioSpec::Toy { rho, n, p } => generate_toy(rho, n, p, seed),
        }
    }

    pub fn true_k(&self) -> usize {
        match self {
            ScenarioSpec::ScenarioB { .. } => 3,
            _ => 2,
        }
    }
}

/// Methods the harness can benchmark. The factor-free baseline reuses the
/// squared-distance solver with the raw design as idiosyncratic component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SilfsL1,
    SilfsL2,
    SCar,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::SilfsL1 => "SILFS-l1",
            Method::SilfsL2 => "SILFS-l2",
            Method::SCar => "S-CAR",
        }
    }

    fn solver(self) -> SolverChoice {
        match self {
            Method::SilfsL1 => SolverChoice::L1Admm,
            Method::SilfsL2 | Method::SCar => SolverChoice::L2Ccd,
        }
    }
}

/// How the group count is chosen per replication.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum KPolicy {
    Fixed(usize),
    Select(Vec<usize>),
}

/// How the factor count is chosen per replication (always 0 for the
/// factor-free baseline).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum RPolicy {
    Fixed(usize),
    Auto,
}

/// How the penalty weights are chosen per replication.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum LambdaPolicy {
    Fixed(f64, f64),
    /// Probe values: λ₁ = 1, λ₂ = 0.01·λ_max.
    Probe,
    /// Full GCV grid search with the default grids.
    Gcv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub k_policy: KPolicy,
    pub r_policy: RPolicy,
    pub lambda_policy: LambdaPolicy,
    pub seed0: u64,
    /// Worker-count override; falls back to `SILFS_THREADS`, then to one
    /// worker per core.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub metrics: MetricsReport,
}

struct RepOutcome {
    alpha_sq: f64,
    beta_sq: f64,
    rand_index: f64,
    sensitivity: f64,
    specificity: f64,
    k_hat: usize,
    wall_ms: f64,
}

fn decompose(
    method: Method,
    policy: RPolicy,
    truth: &SyntheticDataset,
) -> Result<FactorDecomposition> {
    if method == Method::SCar {
        return Ok(FactorDecomposition::without_factors(&truth.dataset));
    }
    let r = match policy {
        RPolicy::Fixed(r) => r,
        RPolicy::Auto => {
            let n = truth.dataset.num_samples();
            let p = truth.dataset.num_features();
            factor::select_num_factors(&truth.dataset, factor::default_r_star(n, p), 0.0)?
        }
    };
    if r == 0 {
        Ok(FactorDecomposition::without_factors(&truth.dataset))
    } else {
        factor::estimate_factors(&truth.dataset, r)
    }
}

fn run_replication(
    scenario: &ScenarioSpec,
    method: Method,
    config: &BenchConfig,
    seed: u64,
) -> Result<RepOutcome> {
    let start = Instant::now();
    let truth = scenario.generate(seed)?;
    let data = &truth.dataset;
    let decomposition = decompose(method, config.r_policy, &truth)?;
    let solver_choice = method.solver();

    let k_hat = match &config.k_policy {
        KPolicy::Fixed(k) => *k,
        KPolicy::Select(grid) => {
            selection::select_k(data, &decomposition, grid, solver_choice, &ProbeConfig::default())?
                .k_hat
        }
    };

    let lmax = selection::lambda_max(data, &decomposition);
    let (lambda1, lambda2) = match config.lambda_policy {
        LambdaPolicy::Fixed(l1, l2) => (l1, l2),
        LambdaPolicy::Probe => (ProbeConfig::default().lambda1, 0.01 * lmax),
        LambdaPolicy::Gcv => {
            let report = selection::select_lambdas(
                data,
                &decomposition,
                k_hat,
                &selection::default_lambda1_grid(),
                &selection::default_lambda2_grid(lmax),
                solver_choice,
            )?;
            (report.lambda1_hat, report.lambda2_hat)
        }
    };

    let fit = solver::fit(
        data,
        &decomposition,
        k_hat,
        &solver_choice.config(lambda1, lambda2),
    )?;

    let ri = rand_index(&fit.labels, &truth.true_labels)?;
    let sel = selection_metrics(&fit.beta_hat, &truth.true_beta)?;
    Ok(RepOutcome {
        alpha_sq: (&fit.alpha_hat - &truth.true_alpha).norm_squared(),
        beta_sq: (&fit.beta_hat - &truth.true_beta).norm_squared(),
        rand_index: ri,
        sensitivity: sel.sensitivity,
        specificity: sel.specificity,
        k_hat,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn worker_count(config: &BenchConfig) -> Option<usize> {
    config.threads.or_else(|| {
        std::env::var("SILFS_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&v| v >= 1)
    })
}

/// Runs `reps` seeded replications of every requested method and aggregates
/// the per-method metrics. Individual replication failures are counted and
/// excluded from the aggregates rather than aborting the benchmark.
pub fn run_benchmark(
    scenario: &ScenarioSpec,
    reps: usize,
    methods: &[Method],
    config: &BenchConfig,
) -> Result<Vec<MethodReport>> {
    if reps < 1 {
        return Err(Error::InvalidArgument("need at least one replication".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    let run_all = || -> Vec<MethodReport> {
        methods
            .iter()
            .map(|&method| {
                let outcomes: Vec<Result<RepOutcome>> = (0..reps)
                    .into_par_iter()
                    .map(|rep| run_replication(scenario, method, config, config.seed0 + rep as u64))
                    .collect();
                MethodReport {
                    method,
                    metrics: aggregate(scenario, &outcomes),
                }
            })
            .collect()
    };
    let reports = match worker_count(config) {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Numerical(format!("worker pool construction failed: {e}")))?
            .install(run_all),
        None => run_all(),
    };
    Ok(reports)
}

fn aggregate(scenario: &ScenarioSpec, outcomes: &[Result<RepOutcome>]) -> MetricsReport {
    let truth_k = scenario.true_k();
    let n_dim = match *scenario {
        ScenarioSpec::ScenarioA { n, .. }
        | ScenarioSpec::ScenarioB { n, .. }
        | ScenarioSpec::Collinearity { n, .. }
        | ScenarioSpec::Toy { n, .. } => n as f64,
    };
    let p_dim = match *scenario {
        ScenarioSpec::ScenarioA { p, .. }
        | ScenarioSpec::ScenarioB { p, .. }
        | ScenarioSpec::Collinearity { p, .. }
        | ScenarioSpec::Toy { p, .. } => p as f64,
    };
    let done: Vec<&RepOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let failures = outcomes.len() - done.len();
    let m = done.len().max(1) as f64;
    let mean = |f: &dyn Fn(&RepOutcome) -> f64| done.iter().map(|o| f(o)).sum::<f64>() / m;
    MetricsReport {
        rmse_alpha: (mean(&|o| o.alpha_sq) / n_dim).sqrt(),
        rmse_beta: (mean(&|o| o.beta_sq) / p_dim).sqrt(),
        rand_index: mean(&|o| o.rand_index),
        sensitivity: mean(&|o| o.sensitivity),
        specificity: mean(&|o| o.specificity),
        k_hat_mean: mean(&|o| o.k_hat as f64),
        over_freq: done.iter().filter(|o| o.k_hat > truth_k).count(),
        under_freq: done.iter().filter(|o| o.k_hat < truth_k).count(),
        wall_time_ms: mean(&|o| o.wall_ms),
        replications: outcomes.len(),
        failures,
    }
}
