//! `sldm`: ingest signed networks, fit SLDM/SLIM embeddings, generate
//! synthetic networks, benchmark link prediction and export layouts.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "sldm", version, about = "Signed latent distance and archetypal network models")]
struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, env = "SLDM_LOG", default_value = "info")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize a raw edge list into a graph file and print its statistics.
    Ingest(IngestArgs),
    /// Fit a model to a graph file and write a checkpoint plus loss trace.
    Fit(FitCommand),
    /// Sample a network from a generator recipe or a fitted checkpoint.
    Generate(GenerateArgs),
    /// Hold out edges, fit on the rest and score link and sign prediction.
    Eval(EvalArgs),
    /// Export 2-D layout coordinates of a checkpoint.
    ExportViz(ExportVizArgs),
}

/// Options every command accepts.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Seed for every random choice of the run.
    #[arg(long, env = "SLDM_SEED")]
    pub seed: Option<u64>,

    /// Fixed-order parallel reductions so reruns are bit-identical.
    #[arg(long, env = "SLDM_DETERMINISTIC", num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    pub deterministic: Option<bool>,

    /// Where to write the run manifest [default: <output>.manifest.json].
    #[arg(long, env = "SLDM_MANIFEST")]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Raw `source target weight [timestamp]` edge list, or a graph file.
    pub input: PathBuf,

    /// Output graph file.
    #[arg(short, long)]
    pub output: PathBuf,

    /// Keep link direction.
    #[arg(long, conflicts_with = "undirected")]
    pub directed: bool,

    /// Merge both directions of every pair (the default).
    #[arg(long)]
    pub undirected: bool,

    /// Sum the weights of repeated pairs (temporal records); without it repeats are an error.
    #[arg(long, env = "SLDM_AGGREGATE")]
    pub aggregate: bool,

    /// Keep only the largest connected component.
    #[arg(long, env = "SLDM_LCC")]
    pub lcc: bool,

    /// Field separator of the raw input.
    #[arg(long, value_enum, default_value_t = DelimiterArg::Auto)]
    pub delimiter: DelimiterArg,

    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DelimiterArg {
    Auto,
    Whitespace,
    Comma,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Sldm,
    Slim,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Undirected,
    Directed,
    DirectedExpressive,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SignArg {
    Minus,
    Plus,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum InitArg {
    #[default]
    Spectral,
    Random,
}

/// Training options; each overrides the matching field of `--config`.
#[derive(Args, Debug, Clone, Default)]
pub struct TrainArgs {
    /// JSON training config. Flags given explicitly take precedence.
    #[arg(long, env = "SLDM_CONFIG")]
    pub config: Option<PathBuf>,

    /// Free positions (sldm) or archetypal polytope (slim) [default: sldm].
    #[arg(long, value_enum, env = "SLDM_MODEL")]
    pub model: Option<ModelArg>,

    /// Link topology [default: undirected].
    #[arg(long, value_enum, env = "SLDM_VARIANT")]
    pub variant: Option<VariantArg>,

    /// Sign of the distance term in the directed-expressive negative rate [default: minus].
    #[arg(long, value_enum, env = "SLDM_EXPRESSIVE_SIGN")]
    pub expressive_sign: Option<SignArg>,

    /// Latent dimension, also the number of archetypes [default: 8].
    #[arg(long, env = "SLDM_K")]
    pub k: Option<usize>,

    /// Adam learning rate [default: 0.05].
    #[arg(long, env = "SLDM_LR")]
    pub lr: Option<f64>,

    /// Optimization steps [default: 5000].
    #[arg(long, env = "SLDM_ITERS")]
    pub iters: Option<usize>,

    /// Nodes per sampled block [default: min(3000, N)].
    #[arg(long, env = "SLDM_SAMPLE_SIZE")]
    pub sample_size: Option<usize>,

    /// Prior precision; 0 disables the priors [default: 1].
    #[arg(long, env = "SLDM_RHO")]
    pub rho: Option<f64>,

    /// Scale the block likelihood by (N/|S|)^2.
    #[arg(long, env = "SLDM_RESCALE_BLOCK", num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    pub rescale_block: Option<bool>,

    /// Record the full-graph loss every this many steps (0 disables).
    #[arg(long, env = "SLDM_FULL_LOSS_EVERY")]
    pub full_loss_every: Option<usize>,

    /// Initialization of the latent positions.
    #[arg(long, value_enum, env = "SLDM_INIT", default_value_t = InitArg::Spectral)]
    pub init: InitArg,
}

#[derive(Args, Debug)]
pub struct FitCommand {
    /// Graph file written by `ingest` or `generate`.
    pub graph: PathBuf,

    /// Output checkpoint (JSON).
    #[arg(short, long)]
    pub output: PathBuf,

    /// Loss trace CSV [default: <output>.trace.csv].
    #[arg(long)]
    pub trace: Option<PathBuf>,

    #[command(flatten)]
    pub train: TrainArgs,

    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["config", "from_checkpoint"]))]
pub struct GenerateArgs {
    /// Generator recipe (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Sample from the rates of a fitted checkpoint instead.
    #[arg(long)]
    pub from_checkpoint: Option<PathBuf>,

    /// Output graph file.
    #[arg(short, long)]
    pub output: PathBuf,

    /// Ground-truth latent variables [default: <output>.truth.json]; recipe mode only.
    #[arg(long)]
    pub truth: Option<PathBuf>,

    /// Dyad sampler; `auto` switches to thinning above 10000 nodes.
    #[arg(long, value_enum, env = "SLDM_SAMPLER", default_value_t = SamplerArg::Auto)]
    pub sampler: SamplerArg,

    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SamplerArg {
    Auto,
    Dyadwise,
    Thinning,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Connected graph file.
    pub graph: PathBuf,

    /// Report JSON; a CSV row set is written next to it.
    #[arg(short, long)]
    pub output: PathBuf,

    /// Fraction of edges to hide.
    #[arg(long, env = "SLDM_HOLDOUT", default_value_t = sldm::eval::DEFAULT_HOLDOUT)]
    pub holdout: f64,

    /// Cross-validation folds for the sign and link classifiers.
    #[arg(long, env = "SLDM_FOLDS", default_value_t = sldm::eval::DEFAULT_FOLDS)]
    pub folds: usize,

    /// Also save the checkpoint fitted on the residual graph.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,

    #[command(flatten)]
    pub train: TrainArgs,

    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Pca,
    Circular,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum SignsArg {
    #[default]
    All,
    Positive,
    Negative,
}

#[derive(Args, Debug)]
pub struct ExportVizArgs {
    /// Checkpoint written by `fit` or `eval`.
    pub checkpoint: PathBuf,

    /// Layout JSON.
    #[arg(short, long)]
    pub output: PathBuf,

    /// Principal components of the embedding, or the sociotope circle (slim only).
    #[arg(long, value_enum, env = "SLDM_VIZ_MODE", default_value_t = ModeArg::Pca)]
    pub mode: ModeArg,

    /// Graph file whose edges are overlaid.
    #[arg(long)]
    pub graph: Option<PathBuf>,

    /// Which edge signs to include in the overlay.
    #[arg(long, value_enum, default_value_t = SignsArg::All)]
    pub signs: SignsArg,

    /// Also write <output stem>.{nodes,archetypes,edges}.csv.
    #[arg(long)]
    pub csv: bool,

    #[command(flatten)]
    pub run: RunArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp_secs()
        .init();
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Fit(a) => commands::fit(a),
        Command::Generate(a) => commands::generate(a),
        Command::Eval(a) => commands::eval(a),
        Command::ExportViz(a) => commands::export_viz(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
