use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qkdbound_core::attack::{LeakageKind, ThresholdConvention};
use qkdbound_core::repeater::ExponentConvention;

/// Upper bounds on secret-key rates of entanglement-based QKD under
/// convex-combination attacks with classical leakage.
///
/// Every flag can also be given in a `--config` file as `key=value` lines
/// (e.g. `L=0.1`, `v-min=0.5`); flags on the command line take precedence.
/// Set QKDBOUND_THREADS to cap the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "qkdbound", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Separability and zero-key thresholds (JSON).
    #[command(args_override_self = true)]
    Threshold(ThresholdArgs),
    /// Key-rate bound versus visibility (CSV, optional SVG).
    #[command(args_override_self = true)]
    RateCurve(RateCurveArgs),
    /// Maximum number of repeater nodes (JSON) and rate versus nodes (CSV).
    #[command(args_override_self = true)]
    Repeater(RepeaterArgs),
    /// Sample attack rounds and compare with the analytic tables (JSON).
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Closed-form γ table, its feasibility and both thresholds (JSON).
    #[command(args_override_self = true)]
    GammaCheck(GammaCheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Local dimension of each party.
    #[arg(long = "d", default_value_t = 2)]
    pub d: usize,
    /// Number of parties.
    #[arg(long = "N", default_value_t = 2)]
    pub parties: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Leakage model: uniform | junk.
    #[arg(long, default_value_t = LeakageKind::Uniform)]
    pub model: LeakageKind,
}

#[derive(Debug, Clone, Args)]
pub struct ConventionArgs {
    /// Zero-key threshold convention: derived | stated.
    #[arg(long, default_value_t = ThresholdConvention::AsDerived)]
    pub convention: ThresholdConvention,
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Leakage probability.
    #[arg(long = "L")]
    pub leakage: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub convention: ConventionArgs,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RateCurveArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Leakage probabilities, comma separated; one series per value.
    #[arg(long = "L", value_delimiter = ',', required = true)]
    pub leakage: Vec<f64>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub convention: ConventionArgs,
    /// Smallest visibility [default: separability threshold].
    #[arg(long)]
    pub v_min: Option<f64>,
    /// Largest visibility.
    #[arg(long, default_value_t = 1.0)]
    pub v_max: f64,
    /// Number of grid points, endpoints included.
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// computational | bloch-grid | xz-family[:θ1] | explicit tuples such as
    /// `zbasis;xz:0.3|zbasis;zbasis` [default: bloch-grid for two qubits,
    /// xz-family for more qubits, computational otherwise].
    #[arg(long)]
    pub settings: Option<String>,
    /// Fixed angle for the second party in the xz-family search.
    #[arg(long)]
    pub theta1: Option<f64>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also render the curves as SVG.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RepeaterArgs {
    /// Visibility of each elementary link.
    #[arg(long)]
    pub v: f64,
    /// Uniform leakage probability.
    #[arg(long = "L")]
    pub leakage: f64,
    #[command(flatten)]
    pub convention: ConventionArgs,
    /// Node-count exponent: paper (v^(2n)) | links (v^(n+1)).
    #[arg(long, default_value_t = ExponentConvention::Paper)]
    pub exponent: ExponentConvention,
    /// Largest node count in the rate table.
    #[arg(long, default_value_t = 30)]
    pub n_max: u64,
    /// Settings space for the rate table (see rate-curve).
    #[arg(long, default_value = "bloch-grid")]
    pub settings: String,
    /// Write the (n, rate) CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Render the (n, rate) table as SVG.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Visibility of the shared state.
    #[arg(long)]
    pub v: f64,
    /// Leakage probability.
    #[arg(long = "L")]
    pub leakage: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Per-party settings separated by `;`, alternative inputs of one party
    /// by `/` [default: computational basis for everyone].
    #[arg(long)]
    pub settings: Option<String>,
    /// closed | optimal | zero | one | comma-separated table.
    #[arg(long, default_value = "closed")]
    pub gamma: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub rounds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GammaCheckArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Visibility of the shared state.
    #[arg(long)]
    pub v: f64,
    /// Leakage probability.
    #[arg(long = "L")]
    pub leakage: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub convention: ConventionArgs,
    /// Per-party settings separated by `;` [default: computational basis].
    #[arg(long)]
    pub settings: Option<String>,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
