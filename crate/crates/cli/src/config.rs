use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use surrocal::losses::SubspaceMode;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "surrocal", version, about = "Calibration functions and SGD rates for quadratic surrogates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize a loss and its score subspace.
    LossShow(Flags),
    /// Sweep the calibration function over an epsilon grid and write CSV.
    Calib(Flags),
    /// Report D, M, DM, the step size and the iteration bound.
    Constants(Flags),
    /// Run averaged SGD for several seeds and check the rate bound.
    Train(Flags),
    /// Write the data behind the Hamming and mixed-loss calibration figures.
    Fig1(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossName {
    ZeroOne,
    Block,
    Hamming,
    Mixed,
    CustomCsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SubspaceName {
    Unconstrained,
    Tight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Exact,
    Numeric,
    Bounds,
    Sampled,
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    #[arg(long, value_enum)]
    pub loss: Option<LossName>,
    /// Label count for the 0-1 loss.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated block sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Bit count for the Hamming loss.
    #[arg(long)]
    pub t: Option<u32>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Square, header-free CSV matrix for `--loss custom-csv`.
    #[arg(long)]
    pub loss_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "unconstrained")]
    pub subspace: SubspaceName,
    /// Grid as start:stop:step.
    #[arg(long, default_value = "0:1:0.05")]
    pub eps_grid: String,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "exact,numeric,bounds")]
    pub methods: Vec<MethodName>,
    #[arg(long, default_value_t = 1.0)]
    pub r_bound: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q_bound: f64,
    /// Iteration count.
    #[arg(long, default_value_t = 1000)]
    pub n: u64,
    /// Number of training seeds.
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    /// Target accuracy for the iteration bound.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 8)]
    pub pool_size: usize,
    /// Sample count for the sampled upper bound.
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    /// Output file (a directory for fig1).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    LossShow,
    Calib,
    Constants,
    Train,
    Fig1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossSpec {
    ZeroOne { k: usize },
    Block { sizes: Vec<usize> },
    Hamming { t: u32 },
    Mixed { sizes: Vec<usize>, eta: f64 },
    CustomCsv { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || CliError::usage(format!("--eps-grid expects start:stop:step, got {text:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        Ok(GridSpec {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            step: num(parts[2])?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Spec {
    pub hamming_bits: u32,
    pub mixed_sizes: Vec<usize>,
    pub eta: f64,
}

/// Everything a command needs, validated; serializes losslessly to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub loss: Option<LossSpec>,
    pub fig1: Option<Fig1Spec>,
    pub subspace: SubspaceMode,
    pub eps_grid: GridSpec,
    pub methods: Vec<MethodName>,
    pub r_bound: f64,
    pub q_bound: f64,
    pub n: u64,
    pub epsilon: f64,
    pub seed: u64,
    pub repetitions: usize,
    pub feature_dim: usize,
    pub pool_size: usize,
    pub samples: usize,
    pub out: Option<PathBuf>,
}

fn loss_spec(f: &Flags) -> Result<LossSpec, CliError> {
    let Some(name) = f.loss else {
        return Err(CliError::usage("--loss is required"));
    };
    let need = |flag: &str| CliError::usage(format!("--loss {} needs {flag}", name.to_possible_value().unwrap().get_name()));
    Ok(match name {
        LossName::ZeroOne => LossSpec::ZeroOne { k: f.k.ok_or_else(|| need("--k"))? },
        LossName::Block => LossSpec::Block { sizes: f.sizes.clone().ok_or_else(|| need("--sizes"))? },
        LossName::Hamming => LossSpec::Hamming { t: f.t.ok_or_else(|| need("--t"))? },
        LossName::Mixed => LossSpec::Mixed {
            sizes: f.sizes.clone().ok_or_else(|| need("--sizes"))?,
            eta: f.eta.ok_or_else(|| need("--eta"))?,
        },
        LossName::CustomCsv => LossSpec::CustomCsv { path: f.loss_file.clone().ok_or_else(|| need("--loss-file"))? },
    })
}

impl RunConfig {
    pub fn from_command(command: &Command) -> Result<Self, CliError> {
        let (kind, f) = match command {
            Command::LossShow(f) => (CommandKind::LossShow, f),
            Command::Calib(f) => (CommandKind::Calib, f),
            Command::Constants(f) => (CommandKind::Constants, f),
            Command::Train(f) => (CommandKind::Train, f),
            Command::Fig1(f) => (CommandKind::Fig1, f),
        };
        let (loss, fig1) = if kind == CommandKind::Fig1 {
            let spec = Fig1Spec {
                hamming_bits: f.t.unwrap_or(5),
                mixed_sizes: f.sizes.clone().unwrap_or_else(|| vec![4; 4]),
                eta: f.eta.unwrap_or(0.4),
            };
            (None, Some(spec))
        } else {
            (Some(loss_spec(f)?), None)
        };
        let mut methods = f.methods.clone();
        methods.sort();
        methods.dedup();
        Ok(RunConfig {
            command: kind,
            loss,
            fig1,
            subspace: match f.subspace {
                SubspaceName::Unconstrained => SubspaceMode::Unconstrained,
                SubspaceName::Tight => SubspaceMode::Tight,
            },
            eps_grid: GridSpec::parse(&f.eps_grid)?,
            methods,
            r_bound: f.r_bound,
            q_bound: f.q_bound,
            n: f.n,
            epsilon: f.epsilon,
            seed: f.seed,
            repetitions: f.seeds,
            feature_dim: f.feature_dim,
            pool_size: f.pool_size,
            samples: f.samples,
            out: f.out.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::usage(format!("bad config JSON: {e}")))
    }

    pub fn has_method(&self, m: MethodName) -> bool {
        self.methods.contains(&m)
    }
}
