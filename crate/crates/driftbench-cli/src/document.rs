//! The TOML configuration document and its resolution against
//! command-line flags.
//!
//! Every flag has a file equivalent; precedence is flags over file
//! values over built-in defaults. Unknown keys anywhere in the document
//! are rejected with a message naming the offending key, before any
//! value is interpreted.

use std::env;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use driftbench::harness::{
    DataSource, ExperimentConfig, ModelSpec, MonitorParams,
};

use crate::error::{config_error, from_harness, CliError};

/// Environment variable naming the directory against which relative
/// data paths (libsvm batch files, CSV streams) are resolved. Unset,
/// relative paths are taken from the working directory.
pub const DATA_DIR_VAR: &str = "DRIFTBENCH_DATA_DIR";

/// Directory receiving artifacts when neither `--out-dir` nor the
/// `out_dir` key is given.
pub const DEFAULT_OUT_DIR: &str = "driftbench-out";

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

/// Top-level document. The four scalar keys mirror the four common
/// flags; the tables mirror [`ExperimentConfig`].
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliDocument {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub models: Option<Vec<String>>,
    pub data: Option<DataSource>,
    pub experiment: Option<ExperimentTable>,
    pub monitor: Option<MonitorParams>,
}

/// Protocol parameters; absent keys fall back to the library defaults.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentTable {
    pub train_batches: Option<Vec<usize>>,
    pub split_fraction: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub ece_bins: Option<usize>,
    pub models: Option<Vec<ModelSpec>>,
}

/// Flag values resolved against the document: the winning out-dir,
/// optional single-seed override, worker count, and roster subset.
#[derive(Debug)]
pub struct Resolved {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub subset: Option<Vec<String>>,
    pub document: CliDocument,
}

/// Flag-side inputs to [`resolve`].
#[derive(Debug, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub models: Option<Vec<String>>,
}

/// Parses and strictly validates a configuration document.
pub fn parse_document(text: &str) -> Result<CliDocument, CliError> {
    let value: toml::Value = toml::from_str(text).map_err(config_error)?;
    check_keys(&value)?;
    value.try_into().map_err(config_error)
}

pub fn load_document(path: &Path) -> Result<CliDocument, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
    parse_document(&text).map_err(|e| match e {
        CliError::Config(message) => {
            CliError::Config(format!("{}: {message}", path.display()))
        }
        other => other,
    })
}

/// Applies flag-over-file-over-default precedence.
pub fn resolve(document: CliDocument, flags: Overrides) -> Result<Resolved, CliError> {
    let jobs = flags.jobs.or(document.jobs);
    if jobs == Some(0) {
        return Err(config_error("jobs must be at least 1"));
    }
    Ok(Resolved {
        out_dir: flags
            .out_dir
            .or_else(|| document.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        seed: flags.seed.or(document.seed),
        jobs,
        subset: flags.models.or_else(|| document.models.clone()),
        document,
    })
}

impl Resolved {
    /// Assembles the full experiment configuration for `run`: data
    /// source with paths anchored, roster filtered to the requested
    /// subset, and the seed override applied.
    pub fn experiment_config(&self) -> Result<ExperimentConfig, CliError> {
        let data = self
            .document
            .data
            .clone()
            .ok_or_else(|| config_error("missing [data] table"))?;
        let data = anchor_data_paths(data, env::var_os(DATA_DIR_VAR).map(PathBuf::from));
        let table = self.document.experiment.clone().unwrap_or_default();
        let roster = table.models.unwrap_or_else(ModelSpec::default_roster);
        let models = apply_subset(roster, self.subset.as_deref())?;
        let seeds = match self.seed {
            Some(seed) => vec![seed],
            None => table.seeds.unwrap_or_else(default_seeds),
        };
        let config = ExperimentConfig {
            data,
            train_batches: table.train_batches.unwrap_or_else(|| vec![0, 1]),
            split_fraction: table.split_fraction.unwrap_or(0.5),
            seeds,
            models,
            ece_bins: table.ece_bins.unwrap_or(10),
            monitor: self.document.monitor.clone().unwrap_or_default(),
        };
        config.validate().map_err(from_harness)?;
        Ok(config)
    }

    /// The synthetic-stream parameters for `synth`: the [data] table
    /// must declare `kind = "synth"`; the generation seed obeys flag >
    /// file `seed` key > `data.seed`.
    pub fn synth_request(&self) -> Result<(driftbench::synth::SynthConfig, u64), CliError> {
        match &self.document.data {
            Some(DataSource::Synth { config, seed }) => {
                Ok((config.clone(), self.seed.unwrap_or(*seed)))
            }
            Some(_) => Err(config_error(
                "synth needs a [data] table with kind = \"synth\"",
            )),
            None => Err(config_error("missing [data] table")),
        }
    }
}

/// Anchors relative data paths at the configured data directory, when
/// one is set.
fn anchor_data_paths(data: DataSource, base: Option<PathBuf>) -> DataSource {
    let anchor = |path: PathBuf| -> PathBuf {
        match &base {
            Some(base) if path.is_relative() => base.join(path),
            _ => path,
        }
    };
    match data {
        DataSource::LibsvmFiles {
            paths,
            num_features,
            num_classes,
        } => DataSource::LibsvmFiles {
            paths: paths.into_iter().map(anchor).collect(),
            num_features,
            num_classes,
        },
        DataSource::Csv { path } => DataSource::Csv { path: anchor(path) },
        synth @ DataSource::Synth { .. } => synth,
    }
}

/// Filters the roster down to the requested model names, preserving
/// roster order. Names must be distinct, known, and present.
fn apply_subset(
    roster: Vec<ModelSpec>,
    subset: Option<&[String]>,
) -> Result<Vec<ModelSpec>, CliError> {
    let Some(subset) = subset else {
        return Ok(roster);
    };
    let valid: Vec<&str> = ModelSpec::default_roster().iter().map(|m| m.name()).collect();
    let mut seen: Vec<&str> = Vec::new();
    for name in subset {
        if !valid.contains(&name.as_str()) {
            return Err(config_error(format!(
                "unknown model name `{name}` (expected one of {})",
                valid.join(", ")
            )));
        }
        if seen.contains(&name.as_str()) {
            return Err(config_error(format!("model `{name}` requested twice")));
        }
        if !roster.iter().any(|m| m.name() == name) {
            return Err(config_error(format!(
                "model `{name}` is not in the configured roster"
            )));
        }
        seen.push(name);
    }
    Ok(roster
        .into_iter()
        .filter(|m| seen.contains(&m.name()))
        .collect())
}

fn unknown_key(path: &str) -> CliError {
    config_error(format!("unknown configuration key `{path}`"))
}

fn as_table<'v>(
    value: &'v toml::Value,
    path: &str,
) -> Result<&'v toml::value::Table, CliError> {
    value
        .as_table()
        .ok_or_else(|| config_error(format!("`{path}` must be a table")))
}

fn check_flat(value: &toml::Value, path: &str, allowed: &[&str]) -> Result<(), CliError> {
    for key in as_table(value, path)?.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(unknown_key(&format!("{path}.{key}")));
        }
    }
    Ok(())
}

/// Rejects the first unknown key anywhere in the document, naming it by
/// its dotted path. Runs on the raw value so typos are caught even in
/// tables serde would only partially inspect.
fn check_keys(root: &toml::Value) -> Result<(), CliError> {
    let table = root
        .as_table()
        .ok_or_else(|| config_error("the configuration root must be a table"))?;
    for (key, value) in table {
        match key.as_str() {
            "out_dir" | "seed" | "jobs" | "models" => {}
            "data" => check_data(value)?,
            "experiment" => check_experiment(value)?,
            "monitor" => check_flat(value, "monitor", &["window_size", "sensitivity"])?,
            _ => return Err(unknown_key(key)),
        }
    }
    Ok(())
}

fn check_data(value: &toml::Value) -> Result<(), CliError> {
    let table = as_table(value, "data")?;
    let kinds = r#""libsvm_files", "csv", or "synth""#;
    let kind = table
        .get("kind")
        .and_then(|v| v.as_str())
        .ok_or_else(|| config_error(format!("data.kind must be {kinds}")))?;
    let allowed: &[&str] = match kind {
        "libsvm_files" => &["kind", "paths", "num_features", "num_classes"],
        "csv" => &["kind", "path"],
        "synth" => &["kind", "seed", "config"],
        _ => {
            return Err(config_error(format!(
                "data.kind must be {kinds}, got \"{kind}\""
            )))
        }
    };
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(unknown_key(&format!("data.{key}")));
        }
    }
    if let Some(config) = table.get("config") {
        check_flat(
            config,
            "data.config",
            &[
                "num_classes",
                "num_features",
                "samples_per_batch",
                "num_batches",
                "class_separation",
                "gain_decay_per_batch",
                "offset_drift_per_batch",
                "noise_deviation",
            ],
        )?;
    }
    Ok(())
}

fn check_experiment(value: &toml::Value) -> Result<(), CliError> {
    let table = as_table(value, "experiment")?;
    let allowed = ["train_batches", "split_fraction", "seeds", "ece_bins", "models"];
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(unknown_key(&format!("experiment.{key}")));
        }
    }
    if let Some(models) = table.get("models") {
        let entries = models
            .as_array()
            .ok_or_else(|| config_error("`experiment.models` must be an array of tables"))?;
        for (index, entry) in entries.iter().enumerate() {
            check_model(entry, index)?;
        }
    }
    Ok(())
}

fn check_model(value: &toml::Value, index: usize) -> Result<(), CliError> {
    let path = format!("experiment.models[{index}]");
    let table = as_table(value, &path)?;
    let kind = table
        .get("kind")
        .and_then(|v| v.as_str())
        .ok_or_else(|| config_error(format!("{path}.kind is required")))?;
    let training: &[&str] = &["epochs", "learning_rate", "batch_size"];
    let allowed: Vec<&str> = match kind {
        "svm" => vec!["kind", "regularization", "kernel", "gamma", "tolerance"],
        "decision_tree" => vec!["kind", "max_depth"],
        "knn" => vec!["kind", "k"],
        "random_forest" => vec!["kind", "num_trees", "max_depth"],
        "neural" => [&["kind"][..], training].concat(),
        "neural_ensemble" => [&["kind", "members"][..], training].concat(),
        "neural_mcd" => [&["kind", "dropout", "passes"][..], training].concat(),
        _ => {
            return Err(config_error(format!(
                "{path}.kind must be one of svm, decision_tree, knn, random_forest, \
                 neural, neural_ensemble, neural_mcd; got \"{kind}\""
            )))
        }
    };
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(unknown_key(&format!("{path}.{key}")));
        }
    }
    Ok(())
}
