//! The experiment loop: load data, split per seed, fit every roster
//! model, score every evaluation set, stream the drift monitor, and
//! assemble the deterministic result document.

use std::fs::File;
use std::io::BufReader;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    apply_standardizer, fit_standardizer, load_libsvm_files, parse_csv, temporal_split, Dataset,
    Standardizer,
};
use crate::drift::{monitor_init, MonitorStatus};
use crate::harness::aggregate::{
    aggregate_drifted, aggregate_seeds, AggregateCell, CellMetrics, DriftedAggregate, DriftedCell,
    MetricCell,
};
use crate::harness::config::{DataSource, ExperimentConfig, ModelSpec};
use crate::harness::model::FittedModel;
use crate::harness::HarnessError;
use crate::metrics::{accuracy, ece, mean_confidence, PredictionRecord};
use crate::models::Classifier;
use crate::seeds;
use crate::synth::generate_drift_stream;

/// Drift-monitor outcome for one (model, seed): the monitor baselines on
/// validation confidences and streams over all held-out batches in
/// temporal order. `first_alarm_index` counts samples from the start of
/// the drifted stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub model: String,
    pub seed: u64,
    pub num_samples: usize,
    pub first_alarm_index: Option<usize>,
    pub alarm_count: usize,
    pub baseline_mean: Option<f64>,
    pub threshold: Option<f64>,
    pub error: Option<String>,
}

impl MonitorSummary {
    fn failed(model: &str, seed: u64, error: String) -> MonitorSummary {
        MonitorSummary {
            model: model.to_string(),
            seed,
            num_samples: 0,
            first_alarm_index: None,
            alarm_count: 0,
            baseline_mean: None,
            threshold: None,
            error: Some(error),
        }
    }
}

/// The complete, deterministic output of [`run_experiment`]: the full
/// cell grid, cross-seed aggregates, drifted-data summaries, monitor
/// outcomes, and an echo of the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub version: String,
    pub config: ExperimentConfig,
    /// Evaluation-set names in temporal order: "val", then each held-out
    /// batch as "batchN" ascending.
    pub evaluation_sets: Vec<String>,
    /// One cell per (model, seed, set), ordered by roster, then seed
    /// list, then evaluation set.
    pub cells: Vec<MetricCell>,
    pub aggregates: Vec<AggregateCell>,
    pub drifted: Vec<DriftedCell>,
    pub drifted_aggregates: Vec<DriftedAggregate>,
    pub monitors: Vec<MonitorSummary>,
}

/// Materializes the configured data source.
pub fn load_data_source(source: &DataSource) -> Result<Dataset, HarnessError> {
    match source {
        DataSource::LibsvmFiles {
            paths,
            num_features,
            num_classes,
        } => Ok(load_libsvm_files(paths, *num_features, *num_classes)?),
        DataSource::Csv { path } => {
            let file = File::open(path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(parse_csv(BufReader::new(file), "label", "batch")?)
        }
        DataSource::Synth { config, seed } => Ok(generate_drift_stream(config, *seed)?),
    }
}

/// One seed's standardized view of the data. The standardizer is fitted
/// on the train half only; validation and every held-out batch are
/// transformed with those train statistics.
pub(crate) struct PreparedSeed {
    pub(crate) seed: u64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) standardizer: Standardizer,
    pub(crate) train: Dataset,
    pub(crate) val: Dataset,
    /// `(batch id, standardized samples)` ascending by batch id.
    pub(crate) test_batches: Vec<(usize, Dataset)>,
}

pub(crate) fn prepare_seed(
    data: &Dataset,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<PreparedSeed, HarnessError> {
    let split = temporal_split(data, &config.train_batches, config.split_fraction, seed)?;
    if split.val.is_empty() {
        return Err(HarnessError::Config(format!(
            "split_fraction {} leaves no validation samples (pool of {})",
            config.split_fraction,
            split.train.len()
        )));
    }
    let standardizer = fit_standardizer(&split.train)?;
    let test_ids: Vec<usize> = data
        .batch_ids()
        .into_iter()
        .filter(|b| !config.train_batches.contains(b))
        .collect();
    let test_batches = test_ids
        .into_iter()
        .zip(&split.test_batches)
        .map(|(id, batch)| Ok((id, apply_standardizer(&standardizer, batch)?)))
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(PreparedSeed {
        seed,
        train: apply_standardizer(&standardizer, &split.train)?,
        val: apply_standardizer(&standardizer, &split.val)?,
        test_batches,
        standardizer,
    })
}

struct JobOutput {
    cells: Vec<MetricCell>,
    drifted: DriftedCell,
    monitor: MonitorSummary,
}

fn predict_records(model: &FittedModel, data: &Dataset) -> Result<Vec<PredictionRecord>, String> {
    data.samples()
        .iter()
        .map(|s| {
            let probs = model.predict_proba(&s.features).map_err(|e| e.to_string())?;
            PredictionRecord::new(probs, s.label).map_err(|e| e.to_string())
        })
        .collect()
}

fn cell_metrics(records: &[PredictionRecord], bins: usize) -> Result<CellMetrics, String> {
    Ok(CellMetrics {
        accuracy: accuracy(records).map_err(|e| e.to_string())?,
        mean_confidence: mean_confidence(records).map_err(|e| e.to_string())?,
        ece: ece(records, bins).map_err(|e| e.to_string())?.ece,
    })
}

fn make_cell(
    model: &str,
    seed: u64,
    set: &str,
    records: &Result<Vec<PredictionRecord>, String>,
    bins: usize,
) -> MetricCell {
    let outcome = records
        .as_ref()
        .map_err(Clone::clone)
        .and_then(|r| cell_metrics(r, bins));
    match outcome {
        Ok(metrics) => MetricCell {
            model: model.to_string(),
            seed,
            set: set.to_string(),
            metrics: Some(metrics),
            error: None,
        },
        Err(error) => MetricCell::failed(model, seed, set, error),
    }
}

fn set_name(batch: usize) -> String {
    format!("batch{batch}")
}

fn run_job(spec: &ModelSpec, prepared: &PreparedSeed, config: &ExperimentConfig) -> JobOutput {
    let name = spec.name();
    let seed = prepared.seed;
    let bins = config.ece_bins;
    let fit_seed = seeds::derive(seed, &[seeds::tag::FIT, spec.id()]);

    let model = match spec.fit(&prepared.train, fit_seed) {
        Ok(model) => model,
        Err(e) => {
            let message = format!("fit failed: {e}");
            let mut cells =
                vec![MetricCell::failed(name, seed, "val", message.clone())];
            for (batch, _) in &prepared.test_batches {
                cells.push(MetricCell::failed(name, seed, &set_name(*batch), message.clone()));
            }
            return JobOutput {
                cells,
                drifted: DriftedCell {
                    model: name.to_string(),
                    seed,
                    pooled: None,
                    ece_batch_mean: None,
                    error: Some(message.clone()),
                },
                monitor: MonitorSummary::failed(name, seed, message),
            };
        }
    };

    let val_records = predict_records(&model, &prepared.val);
    let mut cells = vec![make_cell(name, seed, "val", &val_records, bins)];

    let mut batch_records = Vec::with_capacity(prepared.test_batches.len());
    for (batch, data) in &prepared.test_batches {
        let records = predict_records(&model, data);
        cells.push(make_cell(name, seed, &set_name(*batch), &records, bins));
        batch_records.push(records);
    }

    let drifted = drifted_cell(name, seed, &batch_records, bins);
    let monitor = monitor_summary(name, seed, config, &val_records, &batch_records);
    JobOutput {
        cells,
        drifted,
        monitor,
    }
}

fn drifted_cell(
    name: &str,
    seed: u64,
    batch_records: &[Result<Vec<PredictionRecord>, String>],
    bins: usize,
) -> DriftedCell {
    let mut pooled: Vec<PredictionRecord> = Vec::new();
    let mut batch_eces: Vec<f64> = Vec::new();
    for records in batch_records {
        let records = match records {
            Ok(records) => records,
            Err(e) => {
                return DriftedCell {
                    model: name.to_string(),
                    seed,
                    pooled: None,
                    ece_batch_mean: None,
                    error: Some(e.clone()),
                }
            }
        };
        match ece(records, bins) {
            Ok(report) => batch_eces.push(report.ece),
            Err(e) => {
                return DriftedCell {
                    model: name.to_string(),
                    seed,
                    pooled: None,
                    ece_batch_mean: None,
                    error: Some(e.to_string()),
                }
            }
        }
        pooled.extend(records.iter().cloned());
    }
    if pooled.is_empty() {
        // No held-out batches configured; nothing drifted to report.
        return DriftedCell {
            model: name.to_string(),
            seed,
            pooled: None,
            ece_batch_mean: None,
            error: None,
        };
    }
    match cell_metrics(&pooled, bins) {
        Ok(metrics) => DriftedCell {
            model: name.to_string(),
            seed,
            pooled: Some(metrics),
            ece_batch_mean: Some(batch_eces.iter().sum::<f64>() / batch_eces.len() as f64),
            error: None,
        },
        Err(error) => DriftedCell {
            model: name.to_string(),
            seed,
            pooled: None,
            ece_batch_mean: None,
            error: Some(error),
        },
    }
}

fn monitor_summary(
    name: &str,
    seed: u64,
    config: &ExperimentConfig,
    val_records: &Result<Vec<PredictionRecord>, String>,
    batch_records: &[Result<Vec<PredictionRecord>, String>],
) -> MonitorSummary {
    let val_records = match val_records {
        Ok(records) => records,
        Err(e) => return MonitorSummary::failed(name, seed, e.clone()),
    };
    let baseline: Vec<f64> = val_records.iter().map(|r| r.confidence()).collect();
    let mut state = match monitor_init(
        &baseline,
        config.monitor.window_size,
        config.monitor.sensitivity,
    ) {
        Ok(state) => state,
        Err(e) => return MonitorSummary::failed(name, seed, e.to_string()),
    };

    let mut first_alarm_index = None;
    let mut alarm_count = 0usize;
    let mut index = 0usize;
    for records in batch_records {
        let records = match records {
            Ok(records) => records,
            Err(e) => return MonitorSummary::failed(name, seed, e.clone()),
        };
        for record in records {
            match state.update(record.confidence()) {
                Ok(MonitorStatus::Alarm) => {
                    alarm_count += 1;
                    first_alarm_index.get_or_insert(index);
                }
                Ok(_) => {}
                Err(e) => return MonitorSummary::failed(name, seed, e.to_string()),
            }
            index += 1;
        }
    }
    MonitorSummary {
        model: name.to_string(),
        seed,
        num_samples: index,
        first_alarm_index,
        alarm_count,
        baseline_mean: Some(state.baseline_mean()),
        threshold: Some(state.threshold()),
        error: None,
    }
}

/// Runs the full protocol described by `config`.
///
/// Per seed: shuffle-split the training batches, standardize on the
/// train half, fit every roster model with its own derived fit seed,
/// score "val" and every held-out batch, and stream the drift monitor.
/// (model, seed) jobs execute in parallel with results assembled in
/// deterministic roster-then-seed order, so repeated runs serialize to
/// identical bytes.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let data = load_data_source(&config.data)?;
    let prepared: Vec<PreparedSeed> = config
        .seeds
        .iter()
        .map(|&seed| prepare_seed(&data, config, seed))
        .collect::<Result<_, _>>()?;

    let mut evaluation_sets = vec!["val".to_string()];
    for (batch, _) in &prepared[0].test_batches {
        evaluation_sets.push(set_name(*batch));
    }

    let jobs: Vec<(usize, usize)> = (0..config.models.len())
        .flat_map(|mi| (0..config.seeds.len()).map(move |si| (mi, si)))
        .collect();
    let outputs: Vec<JobOutput> = jobs
        .into_par_iter()
        .map(|(mi, si)| run_job(&config.models[mi], &prepared[si], config))
        .collect();

    let mut cells = Vec::with_capacity(outputs.len() * evaluation_sets.len());
    let mut drifted = Vec::with_capacity(outputs.len());
    let mut monitors = Vec::with_capacity(outputs.len());
    for output in outputs {
        cells.extend(output.cells);
        drifted.push(output.drifted);
        monitors.push(output.monitor);
    }

    let aggregates = aggregate_seeds(&cells)?;
    let drifted_aggregates = aggregate_drifted(&drifted);
    Ok(ExperimentResult {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        evaluation_sets,
        cells,
        aggregates,
        drifted,
        drifted_aggregates,
        monitors,
    })
}
