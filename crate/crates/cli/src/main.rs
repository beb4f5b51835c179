mod commands;
mod error;
mod output;
mod reproduce;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use autobid_eq::continuous::{CurveKind, TanVariant};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;
use crate::scenario::{BoundsChoice, DensitySpec};

/// Equilibria of auto-bidding advertisers in per-query auctions, and audits
/// of whether misreporting a budget or target can pay off.
#[derive(Debug, Parser)]
#[command(name = "autobid-eq", version)]
struct Cli {
    /// Worker threads for parallel scans.
    #[arg(long, global = true, env = "AUTOBID_EQ_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a uniform-bid profile and claimed allocation for second-price
    /// equilibrium.
    VerifyDiscrete(VerifyArgs),
    /// Enumerate threshold equilibria of a two-advertiser instance.
    SolveDiscrete(DiscreteArgs),
    /// Sweep one advertiser's reported budget or target and compare values.
    ProbeDiscrete(ProbeArgs),
    /// Solve the continuous two-advertiser model.
    SolveContinuous(SolveContinuousArgs),
    /// Solve the first- and second-price characterizations and compare.
    Equivalence(ContinuousArgs),
    /// Scan the ratio curve for intervals where it rises.
    AicScan(AicScanArgs),
    /// Build and cross-check the non-monotone counterexample.
    Counterexample(CounterexampleArgs),
    /// Solve under a general truthful auction and test its pricing.
    Truthful(TruthfulArgs),
    /// First-price pacing equilibrium, optionally with a report sweep.
    Fppe(FppeArgs),
    /// Run a canned recipe and print a pass/fail summary.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// CSV output path (written atomically).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON report path (written atomically).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiscreteArgs {
    /// Scenario JSON with kind "discrete".
    #[arg(long)]
    scenario: PathBuf,
    /// Multiplier box used during enumeration.
    #[arg(long, value_enum)]
    bounds: Option<BoundsChoice>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Multipliers of the two advertisers.
    #[arg(long, num_args = 2, required = true)]
    mu: Vec<f64>,
    /// Claimed winner (0 or 1) of every query.
    #[arg(long, num_args = 1.., conflicts_with = "prefix")]
    claim: Option<Vec<usize>>,
    /// Advertiser 0 claims the top K queries by value ratio.
    #[arg(long)]
    prefix: Option<usize>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct ProbeArgs {
    #[command(flatten)]
    discrete: DiscreteArgs,
    /// Probed advertiser (0-based).
    #[arg(long, default_value_t = 0)]
    advertiser: usize,
    /// Reported budgets or targets to try.
    #[arg(long, num_args = 1.., required = true)]
    reports: Vec<f64>,
}

#[derive(Debug, Args)]
struct ContinuousArgs {
    /// Scenario JSON with kind "continuous" or "density".
    #[arg(long, conflicts_with = "density")]
    scenario: Option<PathBuf>,
    /// Density short form: uniform01, uniform:A:B, power:K, exp:RATE,
    /// gamma:SHAPE:RATE, counterexample.
    #[arg(long)]
    density: Option<DensitySpec>,
    #[arg(long, num_args = 2, conflicts_with = "targets")]
    budgets: Option<Vec<f64>>,
    #[arg(long, num_args = 2)]
    targets: Option<Vec<f64>>,
    /// Log-spaced scan points [default: 2048].
    #[arg(long)]
    points: Option<usize>,
    /// Scan range in r; defaults to half the support's start and twice its end.
    #[arg(long)]
    r_lo: Option<f64>,
    #[arg(long)]
    r_hi: Option<f64>,
    /// Write the effective scenario to this path.
    #[arg(long)]
    save_scenario: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct SolveContinuousArgs {
    #[command(flatten)]
    input: ContinuousArgs,
    /// Also write the ratio curve and values on the scan grid.
    #[arg(long)]
    curve_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Budget,
    Tcpa,
}

impl From<KindArg> for CurveKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Budget => CurveKind::Budget,
            KindArg::Tcpa => CurveKind::Tcpa,
        }
    }
}

#[derive(Debug, Args)]
struct AicScanArgs {
    #[arg(long, conflicts_with = "density")]
    scenario: Option<PathBuf>,
    #[arg(long)]
    density: Option<DensitySpec>,
    #[arg(long, value_enum, default_value = "budget")]
    kind: KindArg,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    r_lo: Option<f64>,
    #[arg(long)]
    r_hi: Option<f64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Stretched,
    Literal,
}

impl From<VariantArg> for TanVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Stretched => TanVariant::Stretched,
            VariantArg::Literal => TanVariant::Literal,
        }
    }
}

#[derive(Debug, Args)]
struct CounterexampleArgs {
    /// Tan map used to build valuations.
    #[arg(long, value_enum, default_value = "stretched")]
    variant: VariantArg,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct TruthfulArgs {
    #[command(flatten)]
    input: ContinuousArgs,
    /// Allocation rule: spa-step, spa-step:TIE or logistic:K.
    #[arg(long, default_value = "spa-step")]
    rule: String,
    /// Write p(b) - b p(1/b) on a log grid to this path.
    #[arg(long)]
    delta_csv: Option<PathBuf>,
    /// Grid for the pricing test: LO HI N.
    #[arg(long, num_args = 3, value_names = ["LO", "HI", "N"], default_values = ["0.01", "100", "201"])]
    delta_grid: Vec<f64>,
}

#[derive(Debug, Args)]
struct FppeArgs {
    /// Scenario JSON with kind "discrete".
    #[arg(long)]
    scenario: PathBuf,
    /// Upper multiplier; 10 max(T, 1) when absent.
    #[arg(long)]
    cap: Option<f64>,
    /// Sweep this advertiser's report and check monotonicity.
    #[arg(long, requires = "reports")]
    probe_advertiser: Option<usize>,
    #[arg(long, num_args = 1..)]
    reports: Option<Vec<f64>>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Recipe {
    Table1,
    Table2,
    Fig2,
    CConstant,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    recipe: Recipe,
    /// CSV of the underlying curve or table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::validation("thread count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation(format!("cannot size thread pool: {e}")))?;
    }
    match cli.command {
        Command::VerifyDiscrete(a) => commands::verify_discrete(a),
        Command::SolveDiscrete(a) => commands::solve_discrete(a),
        Command::ProbeDiscrete(a) => commands::probe_discrete(a),
        Command::SolveContinuous(a) => commands::solve_continuous(a),
        Command::Equivalence(a) => commands::equivalence(a),
        Command::AicScan(a) => commands::aic_scan(a),
        Command::Counterexample(a) => commands::counterexample(a),
        Command::Truthful(a) => commands::truthful(a),
        Command::Fppe(a) => commands::fppe(a),
        Command::Reproduce(a) => reproduce::run(a.recipe, a.csv.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
