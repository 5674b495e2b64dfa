use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Stability and generalization experiments for zeroth-order stochastic search.
///
/// Every flag can also be set in the `--config` file under the same key;
/// flags win over the file.
#[derive(Debug, Parser)]
#[command(name = "zoss", version)]
pub struct Cli {
    /// `key = value` file, optionally split into `[section]`s.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for reports and the run manifest.
    /// Default: zoss-out.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Master seed; all randomness derives from it (default 42).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (default: logical cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coupled runs on neighboring datasets against the stability bound.
    Stability(StabilityArgs),
    /// Train/test gap over fresh samples against the generalization bound.
    Generalize(GeneralizeArgs),
    /// Coupled stability across batch sizes, held to one common bound.
    SweepBatch(SweepBatchArgs),
    /// Smoothed-gradient error as K grows and mu shrinks.
    SgdLimit(SgdLimitArgs),
    /// Monte Carlo check of the variance-reduction inequality.
    #[command(name = "verify-lemma1")]
    VerifyLemma1(VerifyLemma1Args),
    /// Monte Carlo check of the Gaussian third-moment bound.
    VerifyMoments(VerifyMomentsArgs),
    /// Evaluate the closed-form bounds.
    Bounds(BoundsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Registered loss: quadratic, logistic or sigmoid01.
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Feature radius of the synthetic data.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "T")]
    pub t: Option<usize>,
    /// Query directions per example.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Batch size (GD always uses n).
    #[arg(long)]
    pub m: Option<usize>,
    /// zoss, sgd or gd.
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Learning-rate rule, e.g. decreasing-over-gamma, log-constant-convex.
    #[arg(long)]
    pub schedule: Option<String>,
    /// Step-size constant.
    #[arg(long = "C")]
    pub c_step: Option<f64>,
    /// Smoothing-radius cap constant.
    #[arg(long = "c")]
    pub c_cap: Option<f64>,
    /// Smoothing radius (default: half the cap).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Discard replicas that touch the swapped example at a step <= t0.
    #[arg(long)]
    pub t0: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// 1-based swap positions (default: 1, n/2, n).
    #[arg(long, value_delimiter = ',')]
    pub swap: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct GeneralizeArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long)]
    pub test_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepBatchArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    /// Batch sizes (default: 1, n/2, n).
    #[arg(long, value_delimiter = ',')]
    pub m_values: Option<Vec<usize>>,
    /// Swap positions, one sweep each (default: 1, n/2, n).
    #[arg(long, value_delimiter = ',')]
    pub swap: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct SgdLimitArgs {
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long = "K-values", value_delimiter = ',')]
    pub k_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub mu_values: Option<Vec<f64>>,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Random (w, z) probe points.
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyLemma1Args {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Monte Carlo samples.
    #[arg(long)]
    pub mc: Option<usize>,
    /// Target vector (default: unit vector along the diagonal).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub v: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct VerifyMomentsArgs {
    /// Dimensions to check.
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<usize>>,
    #[arg(long)]
    pub mc: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long = "L")]
    pub l: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "T")]
    pub t: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Query directions; `inf` gives the SGD limit.
    #[arg(long = "K")]
    pub k: Option<String>,
    #[arg(long = "C")]
    pub c_step: Option<f64>,
    #[arg(long = "c")]
    pub c_cap: Option<f64>,
    /// Smoothing radius (default: at the cap).
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub t0: Option<usize>,
    /// Schedule for the stability rows.
    #[arg(long)]
    pub schedule: Option<String>,
    /// Emit every tabulated generalization bound next to its SGD limit.
    #[arg(long)]
    pub table1: bool,
    /// Format of the table printed to stdout: csv (default) or json.
    #[arg(long)]
    pub format: Option<String>,
}
