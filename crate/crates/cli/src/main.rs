//! Command-line front end for the topspark toolkit.
//!
//! Subcommands cover the full experiment loop: `train` fits a network
//! and saves checkpoint + labels + cost, `infer` evaluates a saved
//! network, `sweep` runs a timestep grid under one or both techniques,
//! `tradeoff` picks an operating point from a stored sweep, and
//! `dataset` generates, cuts, and inspects IDX corpora.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 I/O or
//! malformed-file error, 3 constraints infeasible (`tradeoff` only).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use topspark::learning::StdpRule;
use topspark::sweep::Technique;

use config::{load_file, resolve, Overrides};

/// A command failure carrying the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<topspark::Error> for Failure {
    fn from(err: topspark::Error) -> Self {
        let code = match &err {
            topspark::Error::Config(_) | topspark::Error::Contract(_) => 1,
            topspark::Error::Format(_) | topspark::Error::Io { .. } => 2,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    Stdp1,
    Stdp2,
}

impl From<RuleArg> for StdpRule {
    fn from(arg: RuleArg) -> Self {
        match arg {
            RuleArg::Stdp1 => StdpRule::Stdp1,
            RuleArg::Stdp2 => StdpRule::Stdp2,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TechniqueArg {
    Direct,
    Topspark,
}

impl From<TechniqueArg> for Technique {
    fn from(arg: TechniqueArg) -> Self {
        match arg {
            TechniqueArg::Direct => Technique::Direct,
            TechniqueArg::Topspark => Technique::Topspark,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "topspark",
    version,
    about = "Train, evaluate, and timestep-tune spiking networks"
)]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for all random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Simulation window length per sample, in timesteps.
    #[arg(long, global = true)]
    timestep: Option<u32>,
    /// Number of excitatory neurons.
    #[arg(long, global = true)]
    neurons: Option<u32>,
    /// Learning rule.
    #[arg(long, global = true, value_enum)]
    rule: Option<RuleArg>,
    /// Parameter handling when the window is shortened.
    #[arg(long, global = true, value_enum)]
    technique: Option<TechniqueArg>,
    /// Output directory for checkpoints, reports, and sweep results.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network and write checkpoint, labels, and cost report.
    Train,
    /// Evaluate a checkpoint on the configured test split.
    Infer {
        /// Checkpoint file (default: OUT/checkpoint.tspk).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Neuron label table (default: OUT/labels.json).
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Run the configured timestep grid and write CSV + JSON results.
    Sweep,
    /// Score a stored sweep and pick the best feasible operating point.
    Tradeoff {
        /// Sweep JSON produced by `sweep` (default: OUT/sweep.json).
        #[arg(long)]
        sweep: Option<PathBuf>,
    },
    /// Generate, cut, or inspect IDX datasets.
    Dataset {
        #[command(subcommand)]
        action: DatasetCmd,
    },
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Write a synthetic labelled corpus as an IDX image/label pair.
    Synth {
        /// Number of classes (2-10).
        #[arg(long, default_value_t = 2)]
        classes: u32,
        /// Samples per class.
        #[arg(long, default_value_t = 30)]
        samples: u32,
        /// Pixels per image.
        #[arg(long, default_value_t = 64)]
        dim: usize,
        /// Output image file (.gz compresses).
        #[arg(long)]
        images: PathBuf,
        /// Output label file (.gz compresses).
        #[arg(long)]
        labels: PathBuf,
    },
    /// Draw a class-stratified subset of an IDX pair.
    Subset {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Subset size.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out_images: PathBuf,
        #[arg(long)]
        out_labels: PathBuf,
    },
    /// Print sample count, input dimension, and class histogram.
    Info {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => Some(load_file(path)?),
        None => None,
    };
    let flags = Overrides {
        seed: cli.seed,
        timestep: cli.timestep,
        neurons: cli.neurons,
        rule: cli.rule.map(StdpRule::from),
        technique: cli.technique.map(Technique::from),
    };
    let settings = resolve(file, &flags, cli.out)?;
    match cli.command {
        Command::Train => commands::cmd_train(&settings),
        Command::Infer { checkpoint, labels } => commands::cmd_infer(&settings, checkpoint, labels),
        Command::Sweep => commands::cmd_sweep(&settings),
        Command::Tradeoff { sweep } => commands::cmd_tradeoff(&settings, sweep),
        Command::Dataset { action } => match action {
            DatasetCmd::Synth {
                classes,
                samples,
                dim,
                images,
                labels,
            } => commands::cmd_dataset_synth(&settings, classes, samples, dim, &images, &labels),
            DatasetCmd::Subset {
                images,
                labels,
                n,
                out_images,
                out_labels,
            } => commands::cmd_dataset_subset(
                &settings,
                &images,
                &labels,
                n,
                &out_images,
                &out_labels,
            ),
            DatasetCmd::Info { images, labels } => commands::cmd_dataset_info(&images, &labels),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
