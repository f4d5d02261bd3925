//! `brepnet`: train, evaluate and inspect BRepNet face segmentation models.

mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{Precision, RunOptions};
use error::{error_record, CliError};

#[derive(Debug, Parser)]
#[command(name = "brepnet", version, about = "Face segmentation of B-rep solids with topological message passing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and keep the checkpoint with the lowest validation loss.
    Train(TrainArgs),
    /// Evaluate a model: pooled accuracy and per-class IoU.
    Eval(EvalArgs),
    /// Write per-face predictions for every solid in a dataset.
    Predict(PredictArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Summarize solids and follow walks from their coedges.
    Inspect(InspectArgs),
    /// Print the destinations of walks or of a kernel preset as JSON.
    CompileWalks(CompileWalksArgs),
    /// Generate labelled synthetic solids.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub(crate) struct TrainArgs {
    /// TOML file with run options; flags override it.
    #[arg(long)]
    pub(crate) config: Option<PathBuf>,
    #[command(flatten)]
    pub(crate) options: RunOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub(crate) enum Subset {
    All,
    Train,
    Validation,
    Test,
}

#[derive(Debug, Args)]
pub(crate) struct EvalArgs {
    #[arg(long)]
    pub(crate) model: PathBuf,
    #[arg(long)]
    pub(crate) data: PathBuf,
    #[arg(long)]
    pub(crate) out: PathBuf,
    /// Which part of the split to evaluate.
    #[arg(long, value_enum, default_value = "all")]
    pub(crate) subset: Subset,
    /// Split file written by `train` (or published); without it the split
    /// is recomputed from `--seed` and the default ratios.
    #[arg(long)]
    pub(crate) split_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub(crate) seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub(crate) face_budget: usize,
    #[arg(long)]
    pub(crate) threads: Option<usize>,
    #[arg(long, value_enum, default_value = "f64")]
    pub(crate) precision: Precision,
}

#[derive(Debug, Args)]
pub(crate) struct PredictArgs {
    #[arg(long)]
    pub(crate) model: PathBuf,
    #[arg(long)]
    pub(crate) data: PathBuf,
    #[arg(long)]
    pub(crate) out: PathBuf,
    #[arg(long)]
    pub(crate) threads: Option<usize>,
    #[arg(long, value_enum, default_value = "f64")]
    pub(crate) precision: Precision,
}

#[derive(Debug, Args)]
pub(crate) struct GradcheckArgs {
    #[arg(long, default_value = "winged_edge")]
    pub(crate) kernel: String,
    #[arg(long, default_value_t = 4)]
    pub(crate) hidden_width: usize,
    #[arg(long, default_value_t = 1)]
    pub(crate) hidden_units: usize,
    #[arg(long, default_value_t = 0)]
    pub(crate) seed: u64,
    /// Synthetic solid to check on; the default 6-sided prism has 8 faces.
    #[arg(long, default_value = "n_prism")]
    pub(crate) kind: String,
    #[arg(long, default_value_t = 6)]
    pub(crate) sides: usize,
    #[arg(long, default_value_t = 1)]
    pub(crate) fillets: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub(crate) step: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub(crate) tolerance: f64,
    /// Smallest relative-error denominator.
    #[arg(long, default_value_t = 1e-4)]
    pub(crate) floor: f64,
    /// Directory for `gradcheck_report.json`.
    #[arg(long)]
    pub(crate) out: Option<PathBuf>,
    /// Perturb the analytic gradient to check that failures are detected.
    #[arg(long, hide = true)]
    pub(crate) corrupt_backward: bool,
}

#[derive(Debug, Args)]
pub(crate) struct InspectArgs {
    #[arg(long)]
    pub(crate) data: PathBuf,
    /// Only this solid.
    #[arg(long)]
    pub(crate) solid: Option<String>,
    /// Walk to follow, e.g. `MNE`.
    #[arg(long)]
    pub(crate) walk: Option<String>,
    /// Start coedge for `--walk`; all coedges when omitted.
    #[arg(long)]
    pub(crate) coedge: Option<usize>,
}

#[derive(Debug, Args)]
pub(crate) struct CompileWalksArgs {
    #[arg(long)]
    pub(crate) data: PathBuf,
    #[arg(long)]
    pub(crate) solid: Option<String>,
    /// Kernel preset whose walks to compile.
    #[arg(long, conflicts_with = "walk")]
    pub(crate) kernel: Option<String>,
    /// Walk to compile; may be repeated.
    #[arg(long)]
    pub(crate) walk: Vec<String>,
    /// Directory for `walks.json`; printed to stdout otherwise.
    #[arg(long)]
    pub(crate) out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub(crate) struct SynthArgs {
    #[arg(long)]
    pub(crate) out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub(crate) count: usize,
    #[arg(long, default_value_t = 0)]
    pub(crate) seed: u64,
    /// One of box, n_prism, box_with_hole, filleted_box; a labelled mix
    /// when omitted.
    #[arg(long)]
    pub(crate) kind: Option<String>,
    #[arg(long, default_value_t = 6)]
    pub(crate) sides: usize,
    #[arg(long, default_value_t = 1)]
    pub(crate) fillets: usize,
    /// Write one `solids.jsonl` file instead of one document per solid.
    #[arg(long)]
    pub(crate) jsonl: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => commands::train(args.options, args.config),
        Command::Eval(args) => commands::eval(args),
        Command::Predict(args) => commands::predict(args),
        Command::Gradcheck(args) => commands::gradcheck(args),
        Command::Inspect(args) => commands::inspect(args),
        Command::CompileWalks(args) => commands::compile_walks(args),
        Command::Synth(args) => commands::synth(args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", error_record(&err));
            std::process::exit(err.exit_code());
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("{}", error_record(&err));
        std::process::exit(err.exit_code());
    }
}
