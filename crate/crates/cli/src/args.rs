use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use episir::data::{RateTransform, ScenarioId};

#[derive(Debug, Clone, Parser)]
#[command(name = "episir", version, about = "Epidemic inference with undocumented infections")]
pub struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Plain-text `key = value` file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output directory [default: out].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Only print errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset from one of the built-in scenarios.
    Simulate(SimulateArgs),
    /// Turn a cumulative case CSV into a dataset file.
    Ingest(IngestArgs),
    /// Sample the posterior for a dataset.
    Fit(FitArgs),
    /// Project cases and the effective reproduction number forward.
    Forecast(ForecastArgs),
    /// Geweke scores and the Bayesian chi-square fit test.
    Diagnose(DiagnoseArgs),
    /// Two processes with different dynamics and identical observations.
    DemoIdentifiability(DemoArgs),
    /// Re-run the command recorded in a manifest and compare outputs.
    Replay(ReplayArgs),
}

fn parse_scenario(s: &str) -> Result<ScenarioId, String> {
    s.parse().map_err(|e: episir::Error| e.to_string())
}

fn parse_transform(s: &str) -> Result<RateTransform, String> {
    s.parse().map_err(|e: episir::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// scn1, scn2 or scn3.
    #[arg(value_parser = parse_scenario)]
    pub scenario: ScenarioId,

    /// Map from the normal draw to a rate: cloglog or logit.
    #[arg(long, value_parser = parse_transform)]
    pub transform: Option<RateTransform>,

    /// Standard deviation of the link-scale diagnosis rate.
    #[arg(long)]
    pub gamma_sd: Option<f64>,

    /// Round daily counts to integers.
    #[arg(long)]
    pub integerize: bool,

    /// Use the binomial chain instead of the deterministic recursion.
    #[arg(long)]
    pub stochastic: bool,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    /// Wide (one column per date) or long (date, cumulative) CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: PathBuf,

    /// Region whose rows are summed; required for multi-region files.
    #[arg(long)]
    pub region: Option<String>,

    /// Population; looked up for US states when omitted.
    #[arg(long)]
    pub population: Option<f64>,

    /// Cumulative count that marks day 0.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Dataset JSON written by `simulate` or `ingest`.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,

    /// default, probit, cloglog, alpha-var or alpha-mean20.
    #[arg(long)]
    pub preset: Option<String>,

    #[arg(long)]
    pub chains: Option<usize>,

    /// Ratio between neighbouring temperatures.
    #[arg(long)]
    pub ladder_base: Option<f64>,

    #[arg(long)]
    pub iters: Option<usize>,

    #[arg(long)]
    pub burn_in: Option<usize>,

    #[arg(long)]
    pub thin: Option<usize>,

    #[arg(long)]
    pub swap_every: Option<usize>,

    /// Keep proposal scales fixed during burn-in.
    #[arg(long)]
    pub no_adapt: bool,

    /// Fit only days `0..=T` and keep the rest as a holdout file.
    #[arg(long, value_name = "T")]
    pub train_until: Option<usize>,

    /// Credible level of the reproduction-number band.
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ForecastArgs {
    /// Draws CSV from `fit`.
    #[arg(long, value_name = "FILE")]
    pub draws: PathBuf,

    /// Dataset the draws were fitted to [default: dataset.json next to the draws].
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,

    /// Prior settings of the fit [default: prior.conf next to the draws].
    #[arg(long, value_name = "FILE")]
    pub prior: Option<PathBuf>,

    /// Days to project [default: 30].
    #[arg(long)]
    pub horizon: Option<usize>,

    /// Observed continuation to score the bands against.
    #[arg(long, value_name = "FILE")]
    pub holdout: Option<PathBuf>,

    /// Also write every predictive path.
    #[arg(long)]
    pub matrices: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[arg(long, value_name = "FILE")]
    pub draws: PathBuf,

    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,

    #[arg(long, value_name = "FILE")]
    pub prior: Option<PathBuf>,

    /// Equal-probability bins of the chi-square test [default: 5].
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DemoArgs {
    /// Recovery rate of the second process [default: 0.05].
    #[arg(long)]
    pub alpha2: Option<f64>,

    /// Days to simulate [default: 60].
    #[arg(long)]
    pub days: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}
