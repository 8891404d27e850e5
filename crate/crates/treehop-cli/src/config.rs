//! Layered configuration: built-in defaults, overridden by a TOML file,
//! overridden by command-line flags. Every resolved value ends up in the
//! run manifest so a run can be reproduced from its outputs alone.

use std::path::Path;

use serde::{Deserialize, Serialize};

use treehop_core::data::SynthConfig;
use treehop_core::multihop::ControllerConfig;
use treehop_core::training::TrainConfig;
use treehop_core::{Error, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub dim: Option<usize>,
    pub entities: Option<usize>,
    pub relations: Option<usize>,
    pub chains: Option<usize>,
    pub distractors: Option<usize>,
    pub noise_sigma: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub temperature: Option<f64>,
    pub negatives: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub epochs: Option<usize>,
    pub dropout: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub k: Option<usize>,
    pub hops: Option<usize>,
    pub redundancy_pruning: Option<bool>,
    pub layerwise_top_pruning: Option<bool>,
    pub normalize_queries: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub reps: Option<usize>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Flag value if given, else config-file value, else the default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

pub fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> u64 {
    pick(flag, file.seed, 42)
}

pub struct SynthFlags {
    pub dim: Option<usize>,
    pub entities: Option<usize>,
    pub relations: Option<usize>,
    pub chains: Option<usize>,
    pub distractors: Option<usize>,
    pub noise_sigma: Option<f64>,
}

pub fn resolve_synth(flags: &SynthFlags, file: &SynthSection, seed: u64) -> SynthConfig {
    let d = SynthConfig::default();
    SynthConfig {
        dim: pick(flags.dim, file.dim, d.dim),
        num_entities: pick(flags.entities, file.entities, d.num_entities),
        num_relations: pick(flags.relations, file.relations, d.num_relations),
        num_chains: pick(flags.chains, file.chains, d.num_chains),
        num_distractors: pick(flags.distractors, file.distractors, d.num_distractors),
        noise_sigma: pick(flags.noise_sigma, file.noise_sigma, d.noise_sigma),
        seed,
    }
}

pub struct TrainFlags {
    pub temperature: Option<f64>,
    pub negatives: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub epochs: Option<usize>,
    pub dropout: Option<f64>,
}

pub fn resolve_train(flags: &TrainFlags, file: &TrainSection, seed: u64) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        temperature: pick(flags.temperature, file.temperature, d.temperature),
        num_negatives: pick(flags.negatives, file.negatives, d.num_negatives),
        batch_size: pick(flags.batch_size, file.batch_size, d.batch_size),
        learning_rate: pick(flags.learning_rate, file.learning_rate, d.learning_rate),
        weight_decay: pick(flags.weight_decay, file.weight_decay, d.weight_decay),
        epochs: pick(flags.epochs, file.epochs, d.epochs),
        dropout_rate: pick(flags.dropout, file.dropout, d.dropout_rate),
        seed,
        ..d
    }
}

pub struct ControllerFlags {
    pub k: Option<usize>,
    pub hops: Option<usize>,
    pub redundancy_pruning: Option<bool>,
    pub layerwise_top_pruning: Option<bool>,
    pub normalize_queries: Option<bool>,
}

pub fn resolve_controller(flags: &ControllerFlags, file: &ControllerSection) -> ControllerConfig {
    let d = ControllerConfig::default();
    ControllerConfig {
        k: pick(flags.k, file.k, d.k),
        hops: pick(flags.hops, file.hops, d.hops),
        redundancy_pruning: pick(
            flags.redundancy_pruning,
            file.redundancy_pruning,
            d.redundancy_pruning,
        ),
        layerwise_top_pruning: pick(
            flags.layerwise_top_pruning,
            file.layerwise_top_pruning,
            d.layerwise_top_pruning,
        ),
        normalize_queries: pick(
            flags.normalize_queries,
            file.normalize_queries,
            d.normalize_queries,
        ),
    }
}
