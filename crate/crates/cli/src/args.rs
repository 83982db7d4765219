//! Command-line surface and `--config` merging.
//!
//! A config file is a flat JSON object whose keys are flag names with
//! underscores (`token_mask_rate` for `--token-mask-rate`). Flags win over
//! the file; keys the subcommand does not know are rejected.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

pub const SEED_ENV: &str = "DIALOFORGE_SEED";

#[derive(Debug, Parser)]
#[command(name = "dialoforge", version, about = "Dialogue pre-training corpus tools")]
pub struct Cli {
    /// Master seed. Falls back to the config file, then $DIALOFORGE_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file with default values for this subcommand's flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic nurse/patient corpus and its ground truth.
    Generate(GenerateArgs),
    /// Build masked-reconstruction samples from a corpus.
    Corrupt(CorruptArgs),
    /// Build extractive QA samples, splits and training subsets.
    BuildQa(BuildQaArgs),
    /// Decode start/end probabilities into answer predictions.
    Decode(DecodeArgs),
    /// Score predictions against gold QA samples.
    Score(ScoreArgs),
    /// Print corpus statistics.
    Stats(StatsArgs),
    /// Write the four corruption configs of the ablation ladder.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateArgs {
    /// Number of dialogues.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Output corpus (JSONL).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Ground-truth output; defaults to `<out>.truth.jsonl`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    /// Topic registry JSON; defaults to the built-in topics.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topics: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_topics: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_topics: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_turns: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_turns: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disfluency_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_mention_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptArgs {
    /// Input corpus (JSONL).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    /// Output pre-training samples (JSONL).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token_mask_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token_infill_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speaker_mask_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speaker_permute_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utterance_mask_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intra_topic_permute_rate: Option<f64>,
    /// Maximum sample length in tokens.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_len: Option<usize>,
    /// Infill vocabulary file, one word per line. Without it (and without
    /// --infill-vocab) the distinct words of the corpus are used.
    #[arg(long, conflicts_with = "infill_vocab")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
    /// Inline infill vocabulary, comma-separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infill_vocab: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildQaArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    /// Ground truth written by `generate`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    /// All QA samples (JSONL).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Write train/val/test splits into this directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splits_dir: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_size: Option<usize>,
    /// Nested training subset sizes, e.g. 3000,5000,10000.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeArgs {
    /// Start/end probabilities (JSONL).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probs: Option<PathBuf>,
    /// QA samples the probabilities refer to.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qa: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    /// Output predictions (JSONL).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_span_len: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preds: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblateArgs {
    /// Directory receiving the four config files.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_len: Option<usize>,
}

/// Settings shared by every subcommand after merging.
#[derive(Debug, Clone, Copy)]
pub struct Globals {
    pub seed: u64,
    pub jobs: usize,
}

/// Contents of a `--config` file: the global keys, then everything else.
#[derive(Debug, Default)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub rest: Map<String, Value>,
}

pub fn load_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    let Value::Object(mut map) = value else {
        return Err(CliError::Invalid(format!("{}: expected a JSON object", path.display())));
    };
    Ok(ConfigFile {
        seed: take_key(&mut map, "seed", path)?,
        jobs: take_key(&mut map, "jobs", path)?,
        rest: map,
    })
}

fn take_key<T: DeserializeOwned>(map: &mut Map<String, Value>, key: &str, path: &Path) -> Result<Option<T>, CliError> {
    map.remove(key)
        .map(|v| serde_json::from_value(v).map_err(|e| CliError::Invalid(format!("{}: {key}: {e}", path.display()))))
        .transpose()
}

/// Seed precedence: flag, config file, environment, 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

/// Overlays the flags that were given on top of the config file values.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: Map<String, Value>) -> Result<T, CliError> {
    let mut merged = file;
    let Value::Object(given) = serde_json::to_value(flags).expect("flag structs serialize") else {
        unreachable!("flag structs are objects");
    };
    merged.extend(given.into_iter().filter(|(_, v)| !v.is_null()));
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Invalid(format!("config: {e}")))
}

pub fn required<T>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| {
        CliError::Usage(format!(
            "missing --{} (or \"{key}\" in the config file)",
            key.replace('_', "-")
        ))
    })
}
