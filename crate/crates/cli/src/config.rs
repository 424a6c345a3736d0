//! Configuration loading and flag/file/default resolution.
//!
//! Settings come from three layers with strictly increasing precedence:
//! built-in defaults, then the optional TOML config file, then
//! command-line flags. A file is parsed strictly — unknown keys are
//! rejected with the offending key named — and every resolved
//! configuration is validated before any command touches data or writes
//! a file.

use std::fs;
use std::path::PathBuf;

use serde::Deserialize;

use topspark::cost::CostTable;
use topspark::encoding::EncoderConfig;
use topspark::enhance::enhance_params;
use topspark::learning::{StdpConfig, StdpRule};
use topspark::neuron::{Inhibition, NeuronParams};
use topspark::pipeline::{Phase, RunConfig};
use topspark::sweep::{Constraints, Technique, TradeoffWeights};

use crate::Failure;

/// On-disk configuration tree. Every field is optional; omitted fields
/// fall back to built-in defaults (the `[stdp]` table additionally
/// defaults per dataset, sizing the weight budget to the input
/// dimension).
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub timestep: Option<u32>,
    pub baseline_timestep: Option<u32>,
    pub neurons: Option<u32>,
    pub epochs: Option<u32>,
    pub inhibition: Option<Inhibition>,
    pub technique: Option<Technique>,
    pub neuron: Option<NeuronParams>,
    pub encoder: Option<EncoderConfig>,
    pub stdp: Option<StdpConfig>,
    pub cost: Option<CostTable>,
    pub sweep: SweepSection,
    pub tradeoff: Option<TradeoffWeights>,
    pub constraints: Option<Constraints>,
    pub data: DataSection,
}

/// `[sweep]` table: the timestep grid and the techniques to run it under.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub grid: Option<Vec<u32>>,
    pub techniques: Option<Vec<Technique>>,
}

/// `[data]` table: IDX image/label file pairs for the two splits.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
}

/// Fully resolved settings shared by every command.
///
/// `run` carries everything except the STDP table, which is finalized
/// per command once the dataset's input dimension is known (see
/// [`Settings::run_for`]).
#[derive(Debug, Clone)]
pub struct Settings {
    pub run: RunConfig,
    pub technique: Technique,
    pub rule_override: Option<StdpRule>,
    pub stdp: Option<StdpConfig>,
    pub cost: CostTable,
    pub grid: Vec<u32>,
    pub techniques: Vec<Technique>,
    pub weights: TradeoffWeights,
    pub constraints: Constraints,
    pub data: DataSection,
    pub out: PathBuf,
}

/// Flag values that override the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub timestep: Option<u32>,
    pub neurons: Option<u32>,
    pub rule: Option<StdpRule>,
    pub technique: Option<Technique>,
}

/// Reads and strictly parses the TOML config file at `path`.
pub fn load_file(path: &PathBuf) -> Result<FileConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("cannot read config {}: {e}", path.display()),
    })?;
    toml::from_str(&text).map_err(|e| Failure {
        code: 1,
        message: format!("invalid config {}: {e}", path.display()),
    })
}

/// Merges defaults, the optional config file, and flag overrides into
/// resolved [`Settings`], validating what can be validated without a
/// dataset in hand.
pub fn resolve(
    file: Option<FileConfig>,
    flags: &Overrides,
    out: PathBuf,
) -> Result<Settings, Failure> {
    let file = file.unwrap_or_default();
    let defaults = RunConfig::default();
    let mut run = RunConfig {
        timestep: flags
            .timestep
            .or(file.timestep)
            .unwrap_or(defaults.timestep),
        n_neurons: flags.neurons.or(file.neurons).unwrap_or(defaults.n_neurons),
        epochs: file.epochs.unwrap_or(defaults.epochs),
        phase: Phase::Train,
        baseline_timestep: file.baseline_timestep.unwrap_or(defaults.baseline_timestep),
        seed: flags.seed.or(file.seed).unwrap_or(defaults.seed),
        inhibition: file.inhibition.unwrap_or(defaults.inhibition),
        neuron: file.neuron.unwrap_or(defaults.neuron),
        stdp: file.stdp.unwrap_or(defaults.stdp),
        encoder: file.encoder.unwrap_or(defaults.encoder),
    };
    if let Some(rule) = flags.rule {
        run.stdp.rule = rule;
    }
    let technique = flags
        .technique
        .or(file.technique)
        .unwrap_or(Technique::Direct);
    let cost = file.cost.unwrap_or_default();
    cost.validate().map_err(Failure::from)?;
    let weights = file.tradeoff.unwrap_or_default();
    weights.validate().map_err(Failure::from)?;
    let grid = file
        .sweep
        .grid
        .unwrap_or_else(|| vec![run.baseline_timestep]);
    let techniques = file
        .sweep
        .techniques
        .unwrap_or_else(|| vec![Technique::Direct, Technique::Topspark]);
    Ok(Settings {
        run,
        technique,
        rule_override: flags.rule,
        stdp: file.stdp,
        cost,
        grid,
        techniques,
        weights,
        constraints: file.constraints.unwrap_or_default(),
        data: file.data,
        out,
    })
}

impl Settings {
    /// Finalizes the run configuration for one command: fills the STDP
    /// table (sized to the input dimension unless the file pinned one),
    /// applies the technique's parameter scaling, and validates the
    /// result before any computation happens.
    pub fn run_for(&self, input_dim: usize, phase: Phase) -> Result<RunConfig, Failure> {
        let mut run = self.run;
        run.phase = phase;
        run.stdp = self.finalized_stdp(input_dim);
        if self.technique == Technique::Topspark {
            run.neuron = enhance_params(&run.neuron, run.baseline_timestep, run.timestep)
                .map_err(Failure::from)?
                .scaled;
        }
        run.validate().map_err(Failure::from)?;
        Ok(run)
    }

    /// Like [`Settings::run_for`], but anchored at the baseline window
    /// with no parameter scaling: the sweep applies scaling per grid
    /// point itself.
    pub fn sweep_base(&self, input_dim: usize) -> Result<RunConfig, Failure> {
        let mut run = self.run;
        run.phase = Phase::Train;
        run.timestep = run.baseline_timestep;
        run.stdp = self.finalized_stdp(input_dim);
        run.validate().map_err(Failure::from)?;
        Ok(run)
    }

    fn finalized_stdp(&self, input_dim: usize) -> StdpConfig {
        let mut stdp = self
            .stdp
            .unwrap_or_else(|| StdpConfig::defaults_for(input_dim));
        if let Some(rule) = self.rule_override {
            stdp.rule = rule;
        }
        stdp
    }
}
