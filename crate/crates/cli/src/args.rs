use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use narx_prune::{Preset, PruneMethod};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "narx-prune", version, about = "Sample pruning for polynomial NARX identification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Directory for output artifacts.
    #[arg(long, global = true, env = "NARX_PRUNE_OUT", default_value = ".")]
    pub out: PathBuf,

    /// Worker threads for trials and clustering (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Record per-trial wall-clock time in reports.
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a synthetic data set and write it as CSV plus a manifest.
    Generate(GenerateArgs),
    /// Select model terms on all training samples and fit the baseline model.
    FitBaseline(FitArgs),
    /// Prune the baseline's samples once.
    Prune(PruneArgs),
    /// Repeat prune-and-refit trials and score the coefficients.
    Evaluate(EvaluateArgs),
    /// Run trials over a grid of one hyperparameter.
    Sweep(SweepArgs),
    /// Project samples, atoms and selections onto two principal components.
    Pca(PcaArgs),
    /// Re-run the command recorded in an artifact.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Sdse,
    Adse,
    SineDemo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Synthetic {
    Sdse,
    Adse,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub dataset: DatasetKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Simulate this data set instead of reading a manifest.
    #[arg(long, value_enum, conflicts_with = "manifest", required_unless_present = "manifest")]
    pub dataset: Option<Synthetic>,
    /// Seed for the simulated data set.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Manifest of CSV members (see `generate`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Lags, degree and term count defaults.
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub n_y: Option<usize>,
    #[arg(long)]
    pub n_u: Option<usize>,
    #[arg(long)]
    pub degree: Option<usize>,
    /// Number of model terms besides the intercept.
    #[arg(long)]
    pub terms: Option<usize>,
}

/// Selection hyperparameters shared by the pruning commands.
#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct PruneParams {
    /// Samples to keep.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Dictionary atoms (default: the preset's value).
    #[arg(long)]
    pub atoms: Option<usize>,
    /// Batch size (default: ceil(n / atoms), at most the term count).
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct PruneArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "minibatch-fastcan", value_parser = parse_method)]
    pub method: PruneMethod,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: PruneParams,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Methods to compare, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "minibatch-fastcan,random", value_parser = parse_method)]
    pub methods: Vec<PruneMethod>,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: PruneParams,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// atom-size, batch-size or sample-size.
    #[arg(long)]
    pub axis: String,
    /// `start:stop:step` (inclusive) or a comma-separated list.
    #[arg(long)]
    pub grid: String,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "minibatch-fastcan,random", value_parser = parse_method)]
    pub methods: Vec<PruneMethod>,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: PruneParams,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct PcaArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: PruneParams,
}

#[derive(Clone, Debug, Args)]
pub struct ReplayArgs {
    /// Any JSON artifact written by this tool.
    pub artifact: PathBuf,
}

fn parse_method(s: &str) -> Result<PruneMethod, String> {
    s.parse().map_err(|e: narx_prune::Error| e.to_string())
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: narx_prune::Error| e.to_string())
}

/// `a:b:step` inclusive, or `a,b,c`.
pub fn parse_grid(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("invalid grid {s:?}; expected start:stop:step or a comma-separated list");
    if s.contains(':') {
        let parts: Vec<usize> = s
            .split(':')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let [start, stop, step] = parts[..] else {
            return Err(bad());
        };
        if step == 0 || start > stop {
            return Err(bad());
        }
        Ok((start..=stop).step_by(step).collect())
    } else {
        s.split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
            .collect()
    }
}
