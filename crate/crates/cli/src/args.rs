use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use waoss_core::{GSpec, Kernel};

#[derive(Debug, Parser)]
#[command(
    name = "waoss",
    version,
    about = "Weighted average of slopes for continuous treatments without stayers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate θ on a two-period panel.
    Estimate(EstimateArgs),
    /// Re-run an estimator on pre-period changes of pre-period quasi-stayers.
    Placebo(PlaceboArgs),
    /// Wald test of a polynomial family against a nesting one.
    SpecTest(SpecTestArgs),
    /// Write a synthetic panel drawn from a DGP file.
    Simulate(SimulateArgs),
    /// Confidence interval coverage of an estimator under a DGP.
    Coverage(CoverageArgs),
    /// RMSE across sample sizes and its log-log slope.
    Rate(RateArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Panel CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// One row per unit (default).
    #[arg(long, conflicts_with = "long")]
    pub wide: bool,
    /// One row per unit and period.
    #[arg(long)]
    pub long: bool,
    #[arg(long, default_value = "unit_id")]
    pub unit: String,
    /// Sampling weight column.
    #[arg(long)]
    pub weight: Option<String>,

    #[arg(long, required_unless_present = "long")]
    pub d1: Option<String>,
    #[arg(long, required_unless_present = "long")]
    pub d2: Option<String>,
    #[arg(long, required_unless_present = "long")]
    pub y1: Option<String>,
    #[arg(long, required_unless_present = "long")]
    pub y2: Option<String>,
    /// Pre-period treatment column (wide layout).
    #[arg(long, requires = "y0")]
    pub d0: Option<String>,
    /// Pre-period outcome column (wide layout).
    #[arg(long, requires = "d0")]
    pub y0: Option<String>,

    #[arg(long, default_value = "period")]
    pub period: String,
    /// Treatment column (long layout).
    #[arg(long = "d", default_value = "d")]
    pub d: String,
    /// Outcome column (long layout).
    #[arg(long = "y", default_value = "y")]
    pub y: String,
    /// Label of the pre-period rows (long layout).
    #[arg(long)]
    pub p0: Option<String>,
    #[arg(long, default_value = "1")]
    pub p1: String,
    #[arg(long, default_value = "2")]
    pub p2: String,

    /// Drop stayers instead of failing on them.
    #[arg(long)]
    pub drop_stayers: bool,
    /// Units with |d2 − d1| at or below this count as stayers.
    #[arg(long, default_value_t = 0.0)]
    pub stayer_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorKind {
    Parametric,
    Nonparametric,
    Twfe,
}

/// A bandwidth flag: a positive number, `silverman` or `cv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthArg {
    Fixed(f64),
    Silverman,
    Cv,
}

pub fn parse_bandwidth(s: &str) -> Result<BandwidthArg, String> {
    match s {
        "silverman" => Ok(BandwidthArg::Silverman),
        "cv" => Ok(BandwidthArg::Cv),
        _ => match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(BandwidthArg::Fixed(h)),
            _ => Err(format!("expected a positive number, silverman or cv, got {s:?}")),
        },
    }
}

fn parse_family(s: &str) -> Result<GSpec, String> {
    s.parse().map_err(|e: waoss_core::WaossError| e.to_string())
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    #[arg(long, value_enum, default_value_t = EstimatorKind::Parametric)]
    pub estimator: EstimatorKind,
    /// Polynomial family q_t,q_s1,q_s2 of the parametric first step.
    #[arg(long, default_value = "1,1,1", value_parser = parse_family)]
    pub family: GSpec,
    #[arg(long, default_value = "silverman", value_parser = parse_bandwidth)]
    pub bandwidth_d1: BandwidthArg,
    #[arg(long, default_value = "silverman", value_parser = parse_bandwidth)]
    pub bandwidth_dd: BandwidthArg,
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: Kernel,
    /// Bootstrap resamples for the nonparametric estimator (0 = none).
    #[arg(long, default_value_t = 499)]
    pub boot: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Quasi-stayer windows to summarize, e.g. 0.05,0.1,0.2.
    #[arg(long, value_delimiter = ',')]
    pub eta: Vec<f64>,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlaceboArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Window on |d1 − d0| selecting pre-period quasi-stayers.
    #[arg(long)]
    pub eta0: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpecTestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Null family q_t,q_s1,q_s2.
    #[arg(long, default_value = "1,1,1", value_parser = parse_family)]
    pub family: GSpec,
    /// Alternative family; defaults to the null with one more trend degree.
    #[arg(long, value_parser = parse_family)]
    pub alt_family: Option<GSpec>,
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// DGP description (TOML).
    #[arg(long)]
    pub dgp: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write sampling weights (all 1).
    #[arg(long)]
    pub with_weight: bool,
    /// Panel CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub dgp: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    /// Draws for the Monte Carlo oracle when no closed form applies.
    #[arg(long, default_value_t = 10_000_000)]
    pub oracle_draws: usize,
    /// Per-replication CSV destination.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Include wall time in the JSON report (breaks byte-for-byte reruns).
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Strictly increasing sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "500,2000,8000,32000")]
    pub grid: Vec<usize>,
}
