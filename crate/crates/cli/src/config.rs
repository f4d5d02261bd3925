//! Run configuration: a TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use brepnet::data::SplitRatios;
use brepnet::nn::AdamConfig;
use brepnet::KernelPreset;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

/// Every field is optional so a file and flags can be merged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    /// Dataset directory, `.json` document or `.jsonl` file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Kernel preset name.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Width of the hidden face, edge and coedge states.
    #[arg(long)]
    pub hidden_width: Option<usize>,
    /// Hidden convolution units before the output unit.
    #[arg(long)]
    pub hidden_units: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Approximate faces per minibatch.
    #[arg(long)]
    pub face_budget: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with `train`, `validation` and `test` id lists.
    #[arg(long)]
    pub split_file: Option<PathBuf>,
    #[arg(long)]
    pub train_ratio: Option<f64>,
    #[arg(long)]
    pub validation_ratio: Option<f64>,
    #[arg(long)]
    pub test_ratio: Option<f64>,
    /// Standardize one-hot and flag columns as well as continuous ones.
    #[arg(long)]
    pub scale_flags: Option<bool>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
    /// Worker threads for evaluation.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `self` win over fields in `base`.
    pub fn over(self, base: RunOptions) -> RunOptions {
        RunOptions {
            data: self.data.or(base.data),
            kernel: self.kernel.or(base.kernel),
            hidden_width: self.hidden_width.or(base.hidden_width),
            hidden_units: self.hidden_units.or(base.hidden_units),
            epochs: self.epochs.or(base.epochs),
            face_budget: self.face_budget.or(base.face_budget),
            learning_rate: self.learning_rate.or(base.learning_rate),
            beta1: self.beta1.or(base.beta1),
            beta2: self.beta2.or(base.beta2),
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
            split_file: self.split_file.or(base.split_file),
            train_ratio: self.train_ratio.or(base.train_ratio),
            validation_ratio: self.validation_ratio.or(base.validation_ratio),
            test_ratio: self.test_ratio.or(base.test_ratio),
            scale_flags: self.scale_flags.or(base.scale_flags),
            precision: self.precision.or(base.precision),
            threads: self.threads.or(base.threads),
        }
    }
}

/// Fully resolved training configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub kernel: KernelPreset,
    pub hidden_width: usize,
    pub hidden_units: usize,
    pub epochs: usize,
    pub face_budget: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub split_file: Option<PathBuf>,
    pub ratios: SplitRatios,
    pub scale_flags: bool,
    pub precision: Precision,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn resolve(options: RunOptions) -> Result<Self, CliError> {
        let defaults = AdamConfig::default();
        let ratio_defaults = SplitRatios::default();
        let kernel_name = options.kernel.unwrap_or_else(|| "winged_edge".into());
        let kernel: KernelPreset = kernel_name.parse().map_err(|e| CliError::Config(format!("{e}")))?;
        let config = RunConfig {
            data: options.data.ok_or_else(|| CliError::Config("a dataset path is required (--data)".into()))?,
            kernel,
            hidden_width: options.hidden_width.unwrap_or(84),
            hidden_units: options.hidden_units.unwrap_or(1),
            epochs: options.epochs.unwrap_or(50),
            face_budget: options.face_budget.unwrap_or(1000),
            adam: AdamConfig {
                learning_rate: options.learning_rate.unwrap_or(defaults.learning_rate),
                beta1: options.beta1.unwrap_or(defaults.beta1),
                beta2: options.beta2.unwrap_or(defaults.beta2),
                epsilon: defaults.epsilon,
            },
            seed: options.seed.unwrap_or(0),
            out: options.out.ok_or_else(|| CliError::Config("an output directory is required (--out)".into()))?,
            split_file: options.split_file,
            ratios: SplitRatios {
                train: options.train_ratio.unwrap_or(ratio_defaults.train),
                validation: options.validation_ratio.unwrap_or(ratio_defaults.validation),
                test: options.test_ratio.unwrap_or(ratio_defaults.test),
            },
            scale_flags: options.scale_flags.unwrap_or(true),
            precision: options.precision.unwrap_or(Precision::F64),
            threads: options.threads,
        };
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<(), CliError> {
        let positive = [("hidden-width", self.hidden_width), ("face-budget", self.face_budget)];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(CliError::Config(format!("{name} must be positive")));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be positive".into()));
        }
        let a = &self.adam;
        if a.learning_rate.is_nan() || a.learning_rate <= 0.0 || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return Err(CliError::Config("learning rate must be positive and betas in [0, 1)".into()));
        }
        Ok(())
    }
}
