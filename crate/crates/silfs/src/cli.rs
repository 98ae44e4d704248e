//! Command-line pipeline: configuration, orchestration and artifact
//! emission. JSON is the canonical report format; tabular data (datasets,
//! benchmark tables, labels) is CSV. Every artifact embeds a provenance
//! block (command, configuration echo, seed, version), and identical seeded
//! configurations produce byte-identical artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::factor::{self, FactorDecomposition};
use crate::io;
use crate::selection::{self, SolverChoice};
use crate::sim::{self, BenchConfig, KPolicy, LambdaPolicy, Method, RPolicy, ScenarioSpec};
use crate::solver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Fit,
    Select,
    Simulate,
    Bench,
    Factors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitFormat {
    Json,
    Csv,
}

/// Fully resolved run configuration, mirroring the CLI flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    pub solver: SolverChoice,
    pub k: Option<usize>,
    pub k_grid: Option<Vec<usize>>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub r: Option<usize>,
    pub r_auto: bool,
    pub seed: u64,
    pub reps: usize,
    pub scenario: Option<ScenarioSpec>,
    pub format: EmitFormat,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k.is_some() && self.k_grid.is_some() {
            return Err(Error::InvalidArgument(
                "--k and --k-grid are mutually exclusive".into(),
            ));
        }
        if self.r.is_some() && self.r_auto {
            return Err(Error::InvalidArgument(
                "--r and --r-auto are mutually exclusive".into(),
            ));
        }
        if let Some(grid) = &self.k_grid {
            if grid.is_empty() || grid.iter().any(|&k| k < 1) {
                return Err(Error::InvalidArgument(
                    "--k-grid entries must be positive".into(),
                ));
            }
        }
        if self.reps < 1 {
            return Err(Error::InvalidArgument("--reps must be at least 1".into()));
        }
        match self.command {
            CommandKind::Fit => {
                if self.input.is_none() {
                    return Err(Error::InvalidArgument("fit requires --input".into()));
                }
                if self.k.is_none() {
                    return Err(Error::InvalidArgument("fit requires --k".into()));
                }
            }
            CommandKind::Select | CommandKind::Factors => {
                if self.input.is_none() {
                    return Err(Error::InvalidArgument(format!(
                        "{:?} requires --input",
                        self.command
                    )));
                }
            }
            CommandKind::Simulate | CommandKind::Bench => {
                if self.scenario.is_none() {
                    return Err(Error::InvalidArgument(format!(
                        "{:?} requires --scenario",
                        self.command
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Parses the compact scenario syntax, e.g. `a(a=3,n=100,p=50,r=4)`,
/// `b(a=5,n=100,p=50,r=4)`, `collinearity(s=5,n=100,p=100)` or
/// `toy(rho=0.9,n=100,p=100)`.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec> {
    let text = text.trim();
    let open = text.find('(').ok_or_else(|| bad_scenario(text))?;
    if !text.ends_with(')') {
        return Err(bad_scenario(text));
    }
    let name = text[..open].trim().to_ascii_lowercase();
    let body = &text[open + 1..text.len() - 1];
    let mut fields = std::collections::BTreeMap::new();
    for part in body.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, value) = part.split_once('=').ok_or_else(|| bad_scenario(text))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| bad_scenario(text))?;
        fields.insert(key.trim().to_ascii_lowercase(), value);
    }
    let get = |key: &str| -> Result<f64> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("scenario is missing \"{key}\": {text}")))
    };
    let as_usize = |v: f64| v as usize;
    match name.as_str() {
        "a" | "scenario-a" => Ok(ScenarioSpec::ScenarioA {
            a: get("a")?,
            n: as_usize(get("n")?),
            p: as_usize(get("p")?),
            r: as_usize(get("r")?),
        }),
        "b" | "scenario-b" => Ok(ScenarioSpec::ScenarioB {
            a: get("a")?,
            n: as_usize(get("n")?),
            p: as_usize(get("p")?),
            r: as_usize(get("r")?),
        }),
        "collinearity" => Ok(ScenarioSpec::Collinearity {
            s: as_usize(get("s")?),
            n: as_usize(get("n")?),
            p: as_usize(get("p")?),
        }),
        "toy" => Ok(ScenarioSpec::Toy {
            rho: get("rho")?,
            n: as_usize(get("n")?),
            p: as_usize(get("p")?),
        }),
        _ => Err(bad_scenario(text)),
    }
}

fn bad_scenario(text: &str) -> Error {
    Error::InvalidArgument(format!(
        "cannot parse scenario \"{text}\"; expected e.g. a(a=3,n=100,p=50,r=4), \
         b(a=5,n=100,p=50,r=4), collinearity(s=5,n=100,p=100) or toy(rho=0.9,n=100,p=100)"
    ))
}

#[derive(Debug, Clone, Serialize)]
struct Provenance {
    tool: &'static str,
    version: &'static str,
    command: CommandKind,
    seed: u64,
    config: RunConfig,
}

impl Provenance {
    fn new(config: &RunConfig) -> Self {
        Self {
            tool: "silfs",
            version: env!("CARGO_PKG_VERSION"),
            command: config.command,
            seed: config.seed,
            config: config.clone(),
        }
    }

    fn comment_lines(&self) -> Vec<String> {
        vec![
            format!("tool: silfs {}", self.version),
            format!("command: {:?}", self.command),
            format!("seed: {}", self.seed),
        ]
    }
}

/// Result of a pipeline run: exit code 0 on success, 5 when the solver hit
/// its iteration cap (artifacts are still written).
pub struct RunOutcome {
    pub exit_code: i32,
}

#[derive(Serialize)]
struct FitArtifact {
    provenance: Provenance,
    solver: SolverChoice,
    k: usize,
    lambda1: f64,
    lambda2: f64,
    num_factors: usize,
    alpha: Vec<f64>,
    gamma: Vec<f64>,
    theta: Vec<f64>,
    beta: Vec<f64>,
    labels: Vec<usize>,
    objective_trace: Vec<f64>,
    converged: bool,
    outer_iters: usize,
    total_inner_iters: usize,
}

#[derive(Serialize)]
struct SelectArtifact {
    provenance: Provenance,
    num_factors: usize,
    report: selection::SelectionReport,
}

#[derive(Serialize)]
struct TruthArtifact {
    provenance: Provenance,
    generator_tag: String,
    seed: u64,
    true_alpha: Vec<f64>,
    true_beta: Vec<f64>,
    true_labels: Vec<usize>,
}

#[derive(Serialize)]
struct BenchRow {
    method: String,
    rmse_alpha: f64,
    rmse_beta: f64,
    k_hat_mean: f64,
    freq: String,
    rand_index: f64,
    sensitivity: f64,
    specificity: f64,
    replications: usize,
    failures: usize,
}

#[derive(Serialize)]
struct BenchArtifact {
    provenance: Provenance,
    scenario: ScenarioSpec,
    reps: usize,
    rows: Vec<BenchRow>,
}

#[derive(Serialize)]
struct FactorsArtifact {
    provenance: Provenance,
    r_hat: usize,
    r_star: usize,
    eigenvalues: Vec<f64>,
    explained_variance: Vec<f64>,
}

/// Executes one command.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    match config.command {
        CommandKind::Fit => run_fit(config),
        CommandKind::Select => run_select(config),
        CommandKind::Simulate => run_simulate(config),
        CommandKind::Bench => run_bench(config),
        CommandKind::Factors => run_factors(config),
    }
}

fn decompose_for(config: &RunConfig, data: &Dataset) -> Result<FactorDecomposition> {
    let n = data.num_samples();
    let p = data.num_features();
    let r = match (config.r, config.r_auto) {
        (Some(r), _) => r,
        (None, _) => factor::select_num_factors(data, factor::default_r_star(n, p), 0.0)?,
    };
    if r == 0 {
        Ok(FactorDecomposition::without_factors(data))
    } else {
        factor::estimate_factors(data, r)
    }
}

fn run_fit(config: &RunConfig) -> Result<RunOutcome> {
    let data = io::ingest_csv(config.input.as_ref().expect("validated"))?;
    let decomposition = decompose_for(config, &data)?;
    let k = config.k.expect("validated");
    let lmax = selection::lambda_max(&data, &decomposition);
    let probe = selection::ProbeConfig::default();
    let lambda1 = config.lambda1.unwrap_or(probe.lambda1);
    let lambda2 = config.lambda2.unwrap_or(probe.lambda2_factor * lmax);
    let fit = solver::fit(
        &data,
        &decomposition,
        k,
        &config.solver.config(lambda1, lambda2),
    )?;

    let artifact = FitArtifact {
        provenance: Provenance::new(config),
        solver: config.solver,
        k,
        lambda1,
        lambda2,
        num_factors: decomposition.num_factors,
        alpha: fit.alpha_hat.iter().copied().collect(),
        gamma: fit.gamma_hat.clone(),
        theta: fit.theta_hat.iter().copied().collect(),
        beta: fit.beta_hat.iter().copied().collect(),
        labels: fit.labels.clone(),
        objective_trace: fit.objective_trace.clone(),
        converged: fit.converged,
        outer_iters: fit.outer_iters,
        total_inner_iters: fit.total_inner_iters,
    };
    write_json(&config.output, &artifact)?;

    let mut labels_csv = String::from("index,label\n");
    for (i, l) in fit.labels.iter().enumerate() {
        writeln!(labels_csv, "{},{}", i + 1, l).expect("string write");
    }
    std::fs::write(sibling(&config.output, "labels.csv"), labels_csv)?;

    Ok(RunOutcome {
        exit_code: if fit.converged { 0 } else { 5 },
    })
}

fn run_select(config: &RunConfig) -> Result<RunOutcome> {
    let data = io::ingest_csv(config.input.as_ref().expect("validated"))?;
    let decomposition = decompose_for(config, &data)?;
    let k_grid = config
        .k_grid
        .clone()
        .or_else(|| config.k.map(|k| vec![k]))
        .unwrap_or_else(|| (1..=5).collect());
    let report = selection::select_model(&data, &decomposition, &k_grid, config.solver)?;
    let artifact = SelectArtifact {
        provenance: Provenance::new(config),
        num_factors: decomposition.num_factors,
        report,
    };
    write_json(&config.output, &artifact)?;
    Ok(RunOutcome { exit_code: 0 })
}

fn run_simulate(config: &RunConfig) -> Result<RunOutcome> {
    let scenario = config.scenario.as_ref().expect("validated");
    let provenance = Provenance::new(config);
    for rep in 0..config.reps {
        let seed = config.seed + rep as u64;
        let truth = scenario.generate(seed)?;
        let data_path = if config.reps == 1 {
            config.output.clone()
        } else {
            numbered(&config.output, rep)
        };
        let mut comments = provenance.comment_lines();
        comments.push(format!("generator: {}", truth.generator_tag));
        comments.push(format!("replication-seed: {seed}"));
        io::write_dataset_csv(&data_path, &truth.dataset, &comments)?;
        let truth_artifact = TruthArtifact {
            provenance: provenance.clone(),
            generator_tag: truth.generator_tag.clone(),
            seed,
            true_alpha: truth.true_alpha.iter().copied().collect(),
            true_beta: truth.true_beta.iter().copied().collect(),
            true_labels: truth.true_labels.clone(),
        };
        write_json(&sibling(&data_path, "truth.json"), &truth_artifact)?;
    }
    Ok(RunOutcome { exit_code: 0 })
}

fn bench_rows(reports: &[sim::MethodReport]) -> Vec<BenchRow> {
    reports
        .iter()
        .map(|r| BenchRow {
            method: r.method.name().to_string(),
            rmse_alpha: r.metrics.rmse_alpha,
            rmse_beta: r.metrics.rmse_beta,
            k_hat_mean: r.metrics.k_hat_mean,
            freq: format!("{} | {}", r.metrics.over_freq, r.metrics.under_freq),
            rand_index: r.metrics.rand_index,
            sensitivity: r.metrics.sensitivity,
            specificity: r.metrics.specificity,
            replications: r.metrics.replications,
            failures: r.metrics.failures,
        })
        .collect()
}

fn run_bench(config: &RunConfig) -> Result<RunOutcome> {
    let scenario = config.scenario.as_ref().expect("validated");
    let k_policy = match (&config.k, &config.k_grid) {
        (Some(k), _) => KPolicy::Fixed(*k),
        (None, Some(grid)) => KPolicy::Select(grid.clone()),
        (None, None) => KPolicy::Select((1..=5).collect()),
    };
    let r_policy = match config.r {
        Some(r) => RPolicy::Fixed(r),
        None => RPolicy::Auto,
    };
    let lambda_policy = match (config.lambda1, config.lambda2) {
        (Some(l1), Some(l2)) => LambdaPolicy::Fixed(l1, l2),
        _ => LambdaPolicy::Gcv,
    };
    let bench_config = BenchConfig {
        k_policy,
        r_policy,
        lambda_policy,
        seed0: config.seed,
        threads: None,
    };
    let methods = [Method::SilfsL1, Method::SilfsL2, Method::SCar];
    let reports = sim::run_benchmark(scenario, config.reps, &methods, &bench_config)?;
    let rows = bench_rows(&reports);

    match config.format {
        EmitFormat::Json => {
            let artifact = BenchArtifact {
                provenance: Provenance::new(config),
                scenario: scenario.clone(),
                reps: config.reps,
                rows,
            };
            write_json(&config.output, &artifact)?;
        }
        EmitFormat::Csv => {
            let mut out = String::new();
            for c in Provenance::new(config).comment_lines() {
                writeln!(out, "# {c}").expect("string write");
            }
            out.push_str(
                "method,rmse_alpha,rmse_beta,k_hat_mean,freq,rand_index,sensitivity,specificity\n",
            );
            for row in &rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    row.method,
                    row.rmse_alpha,
                    row.rmse_beta,
                    row.k_hat_mean,
                    row.freq.replace(" | ", "|"),
                    row.rand_index,
                    row.sensitivity,
                    row.specificity
                )
                .expect("string write");
            }
            std::fs::write(&config.output, out)?;
        }
    }
    Ok(RunOutcome { exit_code: 0 })
}

fn run_factors(config: &RunConfig) -> Result<RunOutcome> {
    let data = io::ingest_csv(config.input.as_ref().expect("validated"))?;
    let n = data.num_samples();
    let p = data.num_features();
    let r_star = factor::default_r_star(n, p);
    let eigenvalues = factor::gram_eigenvalues(&data)?;
    let total: f64 = eigenvalues.iter().sum();
    let explained: Vec<f64> = eigenvalues.iter().map(|&e| e / total.max(1e-300)).collect();
    let r_hat = match config.r {
        Some(r) => r,
        None => factor::select_num_factors(&data, r_star, 0.0)?,
    };
    match config.format {
        EmitFormat::Json => {
            let artifact = FactorsArtifact {
                provenance: Provenance::new(config),
                r_hat,
                r_star,
                eigenvalues,
                explained_variance: explained,
            };
            write_json(&config.output, &artifact)?;
        }
        EmitFormat::Csv => {
            let mut out = String::new();
            for c in Provenance::new(config).comment_lines() {
                writeln!(out, "# {c}").expect("string write");
            }
            writeln!(out, "# r_hat: {r_hat}").expect("string write");
            out.push_str("index,eigenvalue,explained_variance\n");
            for (i, (e, v)) in eigenvalues.iter().zip(&explained).enumerate() {
                writeln!(out, "{},{},{}", i + 1, e, v).expect("string write");
            }
            std::fs::write(&config.output, out)?;
        }
    }
    Ok(RunOutcome { exit_code: 0 })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// `report.json` → `report.labels.csv`, keeping the original extension out
/// of the way.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn numbered(path: &Path, rep: usize) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    let ext = path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    path.with_file_name(format!("{stem}_rep{rep:04}{ext}"))
}

/// Maps an error onto the documented process exit codes.
pub fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::InvalidArgument(_) => 2,
        Error::Data(_) | Error::Io(_) => 3,
        Error::Numerical(_) | Error::Selection(_) => 4,
    }
}

/// Machine-readable error rendering for stderr.
pub fn error_json(error: &Error) -> String {
    let kind = match error {
        Error::InvalidArgument(_) => "invalid-argument",
        Error::Data(_) => "data",
        Error::Io(_) => "io",
        Error::Numerical(_) => "numerical",
        Error::Selection(_) => "selection",
    };
    format!(
        "{{\"error\":{{\"kind\":\"{kind}\",\"message\":{}}}}}",
        serde_json::to_string(&error.to_string()).expect("string serializes")
    )
}
