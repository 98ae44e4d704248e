use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use silfs::cli::{self, CommandKind, EmitFormat, RunConfig};
use silfs::selection::SolverChoice;

/// Subgroup identification with latent factor structure.
#[derive(Parser)]
#[command(name = "silfs", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit group intercepts, centroids and sparse coefficients on a CSV dataset.
    Fit(CommonArgs),
    /// Select the group count (BIC) and penalty weights (GCV) on a CSV dataset.
    Select(CommonArgs),
    /// Generate synthetic datasets from a named scenario.
    Simulate(CommonArgs),
    /// Run a seeded multi-replication benchmark of all methods on a scenario.
    Bench(CommonArgs),
    /// Report eigenvalues, explained variance and the selected factor count.
    Factors(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Input dataset (CSV with a "y" column followed by features).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output artifact path.
    #[arg(long)]
    output: PathBuf,
    /// Solver backing fits: l1-admm or l2-ccd.
    #[arg(long, default_value = "l2-ccd")]
    solver: String,
    /// Fixed group count.
    #[arg(long)]
    k: Option<usize>,
    /// Group-count grid for selection, e.g. "1,2,3,4".
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<usize>>,
    /// Clustering penalty weight (defaults to the probe value).
    #[arg(long)]
    lambda1: Option<f64>,
    /// Sparsity penalty weight (defaults to the probe value).
    #[arg(long)]
    lambda2: Option<f64>,
    /// Fixed factor count (0 disables the factor step).
    #[arg(long)]
    r: Option<usize>,
    /// Select the factor count by the eigenvalue-ratio criterion (default).
    #[arg(long, default_value_t = false)]
    r_auto: bool,
    /// Base seed for generators and replication streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replication count for simulate/bench.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Scenario, e.g. "a(a=3,n=100,p=50,r=4)", "b(a=5,n=100,p=50,r=4)",
    /// "collinearity(s=5,n=100,p=100)", "toy(rho=0.9,n=100,p=100)".
    #[arg(long)]
    scenario: Option<String>,
    /// Artifact format: json or csv.
    #[arg(long, default_value = "json")]
    format: String,
}

fn build_config(kind: CommandKind, args: CommonArgs) -> Result<RunConfig, silfs::Error> {
    let solver = match args.solver.as_str() {
        "l1-admm" => SolverChoice::L1Admm,
        "l2-ccd" => SolverChoice::L2Ccd,
        other => {
            return Err(silfs::Error::InvalidArgument(format!(
                "unknown solver \"{other}\"; expected l1-admm or l2-ccd"
            )))
        }
    };
    let format = match args.format.as_str() {
        "json" => EmitFormat::Json,
        "csv" => EmitFormat::Csv,
        other => {
            return Err(silfs::Error::InvalidArgument(format!(
                "unknown format \"{other}\"; expected json or csv"
            )))
        }
    };
    let scenario = match args.scenario {
        Some(text) => Some(cli::parse_scenario(&text)?),
        None => None,
    };
    Ok(RunConfig {
        command: kind,
        input: args.input,
        output: args.output,
        solver,
        k: args.k,
        k_grid: args.k_grid,
        lambda1: args.lambda1,
        lambda2: args.lambda2,
        r: args.r,
        r_auto: args.r_auto,
        seed: args.seed,
        reps: args.reps,
        scenario,
        format,
    })
}

fn main() -> ExitCode {
    let parsed = Cli::parse();
    let (kind, args) = match parsed.command {
        Command::Fit(a) => (CommandKind::Fit, a),
        Command::Select(a) => (CommandKind::Select, a),
        Command::Simulate(a) => (CommandKind::Simulate, a),
        Command::Bench(a) => (CommandKind::Bench, a),
        Command::Factors(a) => (CommandKind::Factors, a),
    };
    let config = match build_config(kind, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", cli::error_json(&e));
            return ExitCode::from(cli::exit_code_for(&e) as u8);
        }
    };
    match cli::run(&config) {
        Ok(outcome) => ExitCode::from(outcome.exit_code as u8),
        Err(e) => {
            eprintln!("{}", cli::error_json(&e));
            ExitCode::from(cli::exit_code_for(&e) as u8)
        }
    }
}
