use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use traitgeo::conditioning::Scheme;

#[derive(Debug, Parser)]
#[command(name = "traitgeo", version, about = "Trait direction conditioning and cross-trait bleed analysis")]
pub struct Cli {
    /// JSON file of flag values for the subcommand; explicit flags win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Condition a direction set with one scheme and report diagnostics.
    Condition(ConditionArgs),
    /// Diagnostics for several schemes applied to the same direction set.
    Diagnose(DiagnoseArgs),
    /// High−Low contrast matrix, T / B_max summary and fluency from judge records.
    Contrast(ContrastArgs),
    /// Run a synthetic world end to end: estimate, condition, steer, measure.
    Simulate(SimulateArgs),
    /// Score generations with a judge and write judge records.
    Judge(JudgeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SchemeParams {
    /// Soft-whitening shrinkage; required for c1.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Projection threshold for c3/c4 [default: 0.5].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Projection strength for c4 [default: 0.5].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Processing order for c2/c3/c4, e.g. `4,0,1,2,3` or `Neu,Opn,...`.
    #[arg(long)]
    pub order: Option<String>,
}

#[derive(Debug, Args)]
pub struct ConditionArgs {
    #[arg(long)]
    pub scheme: Scheme,
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// File format of input and output; inferred from the extension if omitted.
    #[arg(long)]
    pub format: Option<traitgeo::FileFormat>,
    #[command(flatten)]
    pub params: SchemeParams,
    /// Also write the diagnostics CSV here.
    #[arg(long, value_name = "PATH")]
    pub diag: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long)]
    pub format: Option<traitgeo::FileFormat>,
    /// Comma-separated schemes, e.g. `c0,c4,c5`.
    #[arg(long)]
    pub schemes: String,
    #[command(flatten)]
    pub params: SchemeParams,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ContrastArgs {
    /// Judge records CSV.
    #[arg(long, value_name = "PATH")]
    pub records: PathBuf,
    /// Condition to analyse; may be omitted when the file holds one.
    #[arg(long)]
    pub condition: Option<String>,
    /// Model tag to analyse; may be omitted when the file holds one.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub traits: usize,
    /// Contrast matrix CSV.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// T / B_max summary CSV; printed to stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub summary: Option<PathBuf>,
    /// Fluency profile CSV.
    #[arg(long, value_name = "PATH")]
    pub fluency: Option<PathBuf>,
    /// Per-cell sampling variance CSV.
    #[arg(long, value_name = "PATH")]
    pub variance_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// World configuration JSON.
    #[arg(long, value_name = "PATH")]
    pub world: PathBuf,
    #[arg(long)]
    pub scheme: Scheme,
    #[command(flatten)]
    pub params: SchemeParams,
    /// Seed for every random stream; overrides the seed in the world file.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub intensity: f64,
    #[arg(long, default_value_t = 200)]
    pub n_per_level: usize,
    /// Comma-separated layers used for estimation [default: all].
    #[arg(long)]
    pub layers: Option<String>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct JudgeArgs {
    /// Generations JSONL, one object per line.
    #[arg(long, value_name = "PATH")]
    pub generations: PathBuf,
    /// Records CSV to write.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Offline keyword judge; no network.
    #[arg(long, conflicts_with_all = ["endpoint", "model"])]
    pub mock: bool,
    #[arg(long, required_unless_present = "mock", requires = "model")]
    pub endpoint: Option<String>,
    #[arg(long, requires = "endpoint")]
    pub model: Option<String>,
    /// Rubric set JSON [default: bundled rubrics].
    #[arg(long, value_name = "PATH")]
    pub rubrics: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    #[arg(long, default_value_t = 30)]
    pub timeout: u64,
    /// Append verdicts (request hash, score, timestamp) as JSON lines.
    #[arg(long, value_name = "PATH")]
    pub verdict_log: Option<PathBuf>,
}
