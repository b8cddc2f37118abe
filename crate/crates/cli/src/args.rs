use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use mdlsynth::datagen::SamplerConfig;

#[derive(Debug, Parser)]
#[command(
    name = "mdlsynth",
    version,
    about = "Clifford+T synthesis with a learned gate-count predictor"
)]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; 1 runs everything on the calling thread.
    #[arg(long, global = true, env = "MDLSYN_WORKERS")]
    pub workers: Option<usize>,

    /// Log filter (error, warn, info, debug, trace or an env_logger spec).
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,

    /// Directory that receives all outputs.
    #[arg(long, global = true, env = "MDLSYN_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample training circuits and write a dataset file.
    Gen(GenArgs),
    /// Train a gate-count regressor.
    Train(TrainArgs),
    /// Synthesize a circuit for a target unitary.
    Synth(SynthArgs),
    /// Exact breadth-first synthesis for small targets.
    Oracle(OracleArgs),
    /// Peephole-optimize a circuit.
    Optimize(OptimizeArgs),
    /// Benchmark suites.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Distances and predictions along a circuit's synthesis path, as CSV.
    MetricsTrace(TraceArgs),
    /// Generate data, train a small model and run every suite.
    Quickstart(QuickstartArgs),
}

/// Training-circuit distribution. Unset bounds scale with the register size.
#[derive(Clone, Debug, Args)]
pub struct SamplerArgs {
    #[arg(long, default_value_t = 0)]
    pub t_min: usize,
    /// Largest T-count [default: 4 per qubit].
    #[arg(long)]
    pub t_max: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_gates: usize,
    /// Largest optimized gate count [default: 12 per qubit].
    #[arg(long)]
    pub max_gates: Option<usize>,
    /// Skip re-optimizing each suffix before labeling.
    #[arg(long)]
    pub no_resuffix: bool,
}

impl SamplerArgs {
    pub fn sampler(&self, qubits: usize, seed: u64) -> SamplerConfig {
        SamplerConfig::new(qubits, seed)
            .with_t_range(self.t_min, self.t_max.unwrap_or(4 * qubits))
            .with_gate_range(self.min_gates, self.max_gates.unwrap_or(12 * qubits))
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub qubits: usize,
    /// Number of examples.
    #[arg(long)]
    pub count: usize,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value = "data.mdld")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["data", "stream"])))]
pub struct TrainArgs {
    /// Dataset file written by `gen`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Draw examples from the sampler instead of a file.
    #[arg(long)]
    pub stream: bool,
    /// Register size; required with --stream.
    #[arg(long)]
    pub qubits: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 200)]
    pub steps_per_epoch: usize,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "256,128,64")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 2)]
    pub grad_accumulation: usize,
    #[arg(long, default_value_t = 2e-3)]
    pub peak_lr: f64,
    /// Warmup steps [default: a tenth of all steps].
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    /// Cosine decay length [default: the steps after warmup].
    #[arg(long)]
    pub cosine_t_max: Option<usize>,
    #[arg(long, default_value_t = 6000)]
    pub replay_buffer: usize,
    #[arg(long, default_value_t = 32)]
    pub refresh: usize,
    #[arg(long, default_value_t = 2048)]
    pub validation_size: usize,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value = "model.mdlm")]
    pub out: PathBuf,
    /// Per-epoch metrics CSV.
    #[arg(long, default_value = "train_metrics.csv")]
    pub metrics: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 10)]
    pub beam: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.99)]
    pub threshold: f64,
    #[arg(long, default_value_t = 60)]
    pub max_steps: usize,
    /// Run every trial on the untransformed target.
    #[arg(long)]
    pub no_permutations: bool,
    /// Never search for the adjoint.
    #[arg(long)]
    pub no_inverse: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Target as circuit text (.circ) or matrix text (.mat).
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, default_value = "circuit.circ")]
    pub out: PathBuf,
    #[arg(long, default_value = "report.json")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0.99)]
    pub threshold: f64,
    /// Abort once this many distinct states are stored.
    #[arg(long, default_value_t = mdlsynth::oracle::DEFAULT_MAX_STATES)]
    pub max_states: usize,
    /// Where to write the witness circuit when one is found.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub circuit: PathBuf,
    /// Output file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Named structured targets.
    Structured(StructuredArgs),
    /// Random targets bucketed by T-count.
    Random(RandomArgs),
    /// Success rate against trial budget on the random suite.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct StructuredArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Target names [default: the GHZ, cluster and gadget targets at the
    /// model's register size].
    #[arg(long, value_delimiter = ',')]
    pub names: Vec<String>,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, default_value = "structured_report.json")]
    pub out: PathBuf,
    #[arg(long, default_value = "structured_report.csv")]
    pub csv: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct SuiteArgs {
    /// Register size [default: the model's].
    #[arg(long)]
    pub qubits: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub per_bucket: usize,
    #[arg(long, default_value_t = 0)]
    pub t_min: usize,
    #[arg(long, default_value_t = 8)]
    pub t_max: usize,
    #[arg(long, default_value_t = 3)]
    pub min_gates: usize,
    #[arg(long, default_value_t = 30)]
    pub max_gates: usize,
}

#[derive(Debug, Args)]
pub struct RandomArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub suite: SuiteArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, default_value = "random_report.json")]
    pub out: PathBuf,
    #[arg(long, default_value = "random_report.csv")]
    pub csv: PathBuf,
    /// Also render the per-bucket success heatmap.
    #[arg(long)]
    pub emit_svg: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,5,25,100")]
    pub budgets: Vec<usize>,
    #[command(flatten)]
    pub suite: SuiteArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
    #[arg(long, default_value = "sweep_report.json")]
    pub report: PathBuf,
    /// Also render the success-rate curve and heatmap.
    #[arg(long)]
    pub emit_svg: bool,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Circuit whose prefixes define the path.
    #[arg(long)]
    pub circuit: PathBuf,
    /// Target [default: the circuit's own unitary].
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Adds a predicted_mdl column.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "trace.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QuickstartArgs {
    #[arg(long, default_value_t = 2)]
    pub qubits: usize,
    /// Training examples to generate.
    #[arg(long, default_value_t = 20_000)]
    pub examples: usize,
    #[arg(long, default_value_t = 6)]
    pub epochs: usize,
    #[arg(long, default_value_t = 100)]
    pub steps_per_epoch: usize,
    #[arg(long, default_value_t = 5)]
    pub per_bucket: usize,
    /// Largest T-count in the random suite [default: 2 per qubit].
    #[arg(long)]
    pub t_max: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,5,20")]
    pub budgets: Vec<usize>,
    #[arg(long, default_value_t = 0.99)]
    pub threshold: f64,
    #[arg(long, default_value_t = 24)]
    pub max_steps: usize,
    /// Render SVG plots next to the reports.
    #[arg(long)]
    pub emit_svg: bool,
}
