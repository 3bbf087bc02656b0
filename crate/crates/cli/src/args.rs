use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "qmaxent", version, about = "Train and evaluate hardware-embedded Boltzmann machines")]
pub struct Cli {
    /// Flat `key = value` file; keys are long flag names.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Where to write the run manifest (defaults next to the main output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    /// Raise log verbosity (-v debug, -vv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or ingest a data set.
    GenData(GenData),
    /// Build or load an embedding and report its statistics.
    Embed(EmbedArgs),
    /// Train a model and write a checkpoint and log.
    Train(TrainArgs),
    /// Corrupt pictures and fill in the unknown pixels.
    Reconstruct(ReconstructArgs),
    /// Predict one-hot class variables of pictures.
    Classify(ClassifyArgs),
    /// Draw samples from a checkpoint.
    Sample(SampleArgs),
    /// Score samples or a model against data.
    Eval(EvalArgs),
    /// Render a data set as a picture grid.
    Render(RenderArgs),
    /// Repeat a run from its manifest and check the outputs match.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
pub struct GenData {
    #[command(subcommand)]
    pub kind: DataKind,
}

#[derive(Debug, Subcommand)]
pub enum DataKind {
    /// Bars and stripes pictures, shuffled and split in halves.
    Bas {
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// SK instances with exact Boltzmann samples.
    Sk {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// UCI OptDigits files, digits 1-4, cropped and binarised.
    Optdigits {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Append four one-hot class variables.
        #[arg(long)]
        one_hot: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Args, Clone, Default)]
pub struct HardwareArgs {
    /// Chimera dimensions `rows,cols,shore`.
    #[arg(long, value_name = "M,N,T")]
    pub chimera: Option<String>,
    /// Unavailable qubit ids, whitespace separated.
    #[arg(long)]
    pub broken: Option<PathBuf>,
    /// Hardware dump (`chimera r c t` then `broken <id>` lines).
    #[arg(long, conflicts_with_all = ["chimera", "broken"])]
    pub hardware: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub hw: HardwareArgs,
    /// Build the triangular clique layout for this many variables.
    #[arg(long, conflicts_with = "load")]
    pub n_logical: Option<usize>,
    /// Validate an existing embedding file.
    #[arg(long)]
    pub load: Option<PathBuf>,
    /// Embedding output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Statistics table output (defaults to `<out>.stats`).
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Exact,
    Sa,
    Quantum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Linear,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClampArg {
    Freeze,
    StrongField,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SamplerArgs {
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerArg>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Transverse field for the quantum sampler.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Metropolis proposals per annealing chain.
    #[arg(long)]
    pub t_max: Option<u64>,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleArg>,
    #[arg(long, value_enum)]
    pub clamp_mode: Option<ClampArg>,
    /// Field magnitude used by strong-field clamping.
    #[arg(long)]
    pub h_max: Option<f64>,
    #[arg(long)]
    pub exact_cap: Option<usize>,
    #[arg(long)]
    pub quantum_cap: Option<usize>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Embedding file; omit for logical (complete-graph) checkpoints.
    #[arg(long)]
    pub embedding: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalHook {
    None,
    LambdaAv,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub hw: HardwareArgs,
    /// Embedding file on the given hardware.
    #[arg(long, conflicts_with = "clique")]
    pub embedding: Option<PathBuf>,
    /// Embed with the triangular clique layout on the given hardware and
    /// write the embedding to `<checkpoint>.emb`.
    #[arg(long)]
    pub clique: bool,
    /// Continue from a checkpoint; `--iters` counts total updates.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Negative-phase samples per iteration.
    #[arg(long)]
    pub neg_samples: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    /// Rows per positive phase; 0 uses the full data set.
    #[arg(long)]
    pub minibatch: Option<usize>,
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Clip parameters instead of stopping when a step leaves the range.
    #[arg(long)]
    pub no_range_stop: bool,
    /// Lift the field and coupling ranges of a fresh model.
    #[arg(long, conflicts_with = "resume")]
    pub unbounded: bool,
    #[arg(long, value_enum)]
    pub eval: Option<EvalHook>,
    /// Generating instance for `--eval lambda-av`.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub eval_every: Option<u64>,
    #[arg(long)]
    pub eval_samples: Option<usize>,
    /// Record elapsed seconds in the log (makes logs non-reproducible).
    #[arg(long)]
    pub wall_time: bool,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Training log (defaults to `<checkpoint>.log`).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    SaltPepper,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TieArg {
    White,
    Black,
    Gray,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Clean pictures; corruption is applied here.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, conflicts_with = "mask")]
    pub noise: Option<NoiseArg>,
    /// Use this mask and treat `--data` as already corrupted.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Clean pictures for scoring when `--mask` is given.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Block height.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Block width.
    #[arg(long)]
    pub cols: Option<usize>,
    /// Block top-left corner `row,col`.
    #[arg(long, value_name = "R,C")]
    pub anchor: Option<String>,
    #[arg(long)]
    pub votes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Reconstructed data set.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub render: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Labelled pictures whose trailing variables are the class one-hot.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub votes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// One predicted class index (or `indeterminate`) per line.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(short, long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Decoded logical samples (chain ties become -1).
    #[arg(long)]
    pub out: PathBuf,
    /// Raw physical samples.
    #[arg(long)]
    pub physical_out: Option<PathBuf>,
    #[arg(long)]
    pub render: Option<PathBuf>,
    /// Picture shape `RxC` for rendering.
    #[arg(long)]
    pub shape: Option<String>,
    #[arg(long, value_enum)]
    pub tie_policy: Option<TieArg>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Generating SK instance for the average log-likelihood.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Samples to score under `--instance`.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// Training set scored under `--instance` as the reference.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Checkpoint for relative entropy and moment discrepancy against `--data`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub embedding: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Use the transverse-field state with this field.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub report: PathBuf,
    /// Also write the report as a tab-separated table.
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub shape: Option<String>,
}

/// Takes the manifest to replay from the global `--manifest` flag.
#[derive(Debug, Args)]
pub struct RerunArgs {}
