//! Experiment orchestration: run every (model, seed) job of a configured
//! study, score each evaluation set, drive the drift monitor, aggregate
//! across seeds, and serialize the whole result deterministically.
//!
//! The protocol per seed: shuffle-split the training batches into train
//! and validation halves, fit a standardizer on the train half only,
//! standardize everything with it, fit each roster model, then evaluate
//! accuracy / mean confidence / calibration error on the validation set
//! and on every held-out batch in temporal order. The drift monitor
//! baselines on validation confidences and streams over the held-out
//! batches. Failed fits become flagged cells, never silent drops.

mod aggregate;
mod config;
mod grid;
mod model;
mod report;
mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::data::DataError;
use crate::synth::SynthError;

pub use aggregate::{
    aggregate_drifted, aggregate_seeds, AggregateCell, CellMetrics, DriftedAggregate, DriftedCell,
    MetricCell, StatPair,
};
pub use config::{
    DataSource, ExperimentConfig, ForestParams, KernelChoice, KnnParams, ModelSpec, MonitorParams,
    NeuralEnsembleParams, NeuralMcdParams, NeuralParams, SvmParams, TrainingParams, TreeParams,
};
pub use grid::{grid_search, inner_split, GridOutcome};
pub use model::{load_model, save_model, FittedModel};
pub use report::{
    result_to_json_bytes, write_aggregates_csv, write_calibration_comparison_csv, write_cells_csv,
    write_result_json, write_time_series_csv,
};
pub use run::{load_data_source, run_experiment, ExperimentResult, MonitorSummary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("result shape: {0}")]
    IncompleteGrid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("saved model version {found} does not match this build ({expected})")]
    ModelVersion { found: String, expected: String },
}
