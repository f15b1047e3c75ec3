//! Result serialization: the canonical JSON document plus four CSV
//! projections (cell grid, aggregates, metrics over time, and the
//! validation-versus-drifted calibration comparison).
//!
//! Every writer is a pure projection of [`ExperimentResult`] — nothing
//! is recomputed from data or models — and emits rows in the result's
//! deterministic order, so identical results produce identical bytes.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::harness::run::ExperimentResult;
use crate::harness::HarnessError;

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Pretty-printed JSON bytes of the result, with a trailing newline.
/// Two equal results always yield identical bytes.
pub fn result_to_json_bytes(result: &ExperimentResult) -> Result<Vec<u8>, HarnessError> {
    let mut bytes = serde_json::to_vec_pretty(result)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes the canonical result document.
pub fn write_result_json(result: &ExperimentResult, path: &Path) -> Result<(), HarnessError> {
    let bytes = result_to_json_bytes(result)?;
    std::fs::write(path, bytes).map_err(io_error(path))
}

fn open_csv(path: &Path) -> Result<csv::Writer<BufWriter<File>>, HarnessError> {
    let file = File::create(path).map_err(io_error(path))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn field(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-cell grid: `model,seed,set,accuracy,mean_confidence,ece,error`.
/// Failed cells leave the metric fields empty and carry the reason.
pub fn write_cells_csv(result: &ExperimentResult, path: &Path) -> Result<(), HarnessError> {
    let mut writer = open_csv(path)?;
    writer.write_record(["model", "seed", "set", "accuracy", "mean_confidence", "ece", "error"])?;
    for cell in &result.cells {
        writer.write_record([
            cell.model.clone(),
            cell.seed.to_string(),
            cell.set.clone(),
            field(cell.metrics.as_ref().map(|m| m.accuracy)),
            field(cell.metrics.as_ref().map(|m| m.mean_confidence)),
            field(cell.metrics.as_ref().map(|m| m.ece)),
            cell.error.clone().unwrap_or_default(),
        ])?;
    }
    writer.flush().map_err(io_error(path))?;
    Ok(())
}

/// Cross-seed aggregates: `model,set,seeds_used` then mean/std pairs for
/// accuracy, mean confidence, and ECE.
pub fn write_aggregates_csv(result: &ExperimentResult, path: &Path) -> Result<(), HarnessError> {
    let mut writer = open_csv(path)?;
    writer.write_record([
        "model",
        "set",
        "seeds_used",
        "accuracy_mean",
        "accuracy_std",
        "mean_confidence_mean",
        "mean_confidence_std",
        "ece_mean",
        "ece_std",
    ])?;
    for aggregate in &result.aggregates {
        writer.write_record([
            aggregate.model.clone(),
            aggregate.set.clone(),
            aggregate.seeds_used.to_string(),
            field(aggregate.accuracy.as_ref().map(|s| s.mean)),
            field(aggregate.accuracy.as_ref().map(|s| s.std)),
            field(aggregate.mean_confidence.as_ref().map(|s| s.mean)),
            field(aggregate.mean_confidence.as_ref().map(|s| s.std)),
            field(aggregate.ece.as_ref().map(|s| s.mean)),
            field(aggregate.ece.as_ref().map(|s| s.std)),
        ])?;
    }
    writer.flush().map_err(io_error(path))?;
    Ok(())
}

/// Plot-ready degradation curves: one row per evaluation set in temporal
/// order, with per-model seed-mean accuracy and mean confidence columns
/// (`<model>_accuracy`, `<model>_confidence`, roster order).
pub fn write_time_series_csv(result: &ExperimentResult, path: &Path) -> Result<(), HarnessError> {
    let models: Vec<&str> = result.config.models.iter().map(|m| m.name()).collect();
    let mut writer = open_csv(path)?;
    let mut header = vec!["set".to_string()];
    for model in &models {
        header.push(format!("{model}_accuracy"));
        header.push(format!("{model}_confidence"));
    }
    writer.write_record(&header)?;
    for set in &result.evaluation_sets {
        let mut row = vec![set.clone()];
        for model in &models {
            let aggregate = result
                .aggregates
                .iter()
                .find(|a| a.model == *model && a.set == *set);
            row.push(field(
                aggregate.and_then(|a| a.accuracy.as_ref()).map(|s| s.mean),
            ));
            row.push(field(
                aggregate
                    .and_then(|a| a.mean_confidence.as_ref())
                    .map(|s| s.mean),
            ));
        }
        writer.write_record(&row)?;
    }
    writer.flush().map_err(io_error(path))?;
    Ok(())
}

/// Plot-ready calibration comparison: one row per model with validation
/// ECE (mean, std across seeds) against the drifted per-batch-mean ECE
/// and the pooled drifted ECE.
pub fn write_calibration_comparison_csv(
    result: &ExperimentResult,
    path: &Path,
) -> Result<(), HarnessError> {
    let mut writer = open_csv(path)?;
    writer.write_record([
        "model",
        "val_ece_mean",
        "val_ece_std",
        "drifted_ece_mean",
        "drifted_ece_std",
        "drifted_pooled_ece_mean",
        "drifted_pooled_ece_std",
    ])?;
    for model in result.config.models.iter().map(|m| m.name()) {
        let val = result
            .aggregates
            .iter()
            .find(|a| a.model == model && a.set == "val")
            .and_then(|a| a.ece.as_ref());
        let drifted = result.drifted_aggregates.iter().find(|a| a.model == model);
        writer.write_record([
            model.to_string(),
            field(val.map(|s| s.mean)),
            field(val.map(|s| s.std)),
            field(drifted.and_then(|a| a.ece_batch_mean.as_ref()).map(|s| s.mean)),
            field(drifted.and_then(|a| a.ece_batch_mean.as_ref()).map(|s| s.std)),
            field(drifted.and_then(|a| a.ece_pooled.as_ref()).map(|s| s.mean)),
            field(drifted.and_then(|a| a.ece_pooled.as_ref()).map(|s| s.std)),
        ])?;
    }
    writer.flush().map_err(io_error(path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{
        DataSource, ExperimentConfig, KnnParams, ModelSpec, MonitorParams, TreeParams,
    };
    use crate::harness::run::run_experiment;
    use crate::synth::SynthConfig;

    fn small_result() -> ExperimentResult {
        let config = ExperimentConfig {
            data: DataSource::Synth {
                config: SynthConfig {
                    num_classes: 3,
                    num_features: 4,
                    samples_per_batch: 60,
                    num_batches: 3,
                    class_separation: 6.0,
                    gain_decay_per_batch: 0.2,
                    offset_drift_per_batch: 1.0,
                    noise_deviation: 1.0,
                },
                seed: 9,
            },
            train_batches: vec![0],
            split_fraction: 0.5,
            seeds: vec![1, 2],
            models: vec![
                ModelSpec::Knn(KnnParams::default()),
                ModelSpec::DecisionTree(TreeParams::default()),
            ],
            ece_bins: 10,
            monitor: MonitorParams {
                window_size: 10,
                sensitivity: 3.0,
            },
        };
        run_experiment(&config).unwrap()
    }

    #[test]
    fn json_round_trips_and_is_reproducible() {
        let result = small_result();
        let bytes = result_to_json_bytes(&result).unwrap();
        assert_eq!(bytes, result_to_json_bytes(&result).unwrap());
        let back: ExperimentResult = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, result);
    }

    #[test]
    fn files_are_written_and_stable() {
        let dir = tempfile::tempdir().unwrap();
        let result = small_result();
        let json = dir.path().join("result.json");
        write_result_json(&result, &json).unwrap();
        let first = std::fs::read(&json).unwrap();
        write_result_json(&result, &json).unwrap();
        assert_eq!(first, std::fs::read(&json).unwrap());
        let loaded: ExperimentResult =
            serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
        assert_eq!(loaded, result);
    }

    #[test]
    fn cells_csv_has_one_row_per_cell() {
        let dir = tempfile::tempdir().unwrap();
        let result = small_result();
        let path = dir.path().join("cells.csv");
        write_cells_csv(&result, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "model,seed,set,accuracy,mean_confidence,ece,error");
        assert_eq!(lines.len(), 1 + result.cells.len());
        assert!(lines[1].starts_with("knn,1,val,"));
    }

    #[test]
    fn aggregates_csv_matches_result_shape() {
        let dir = tempfile::tempdir().unwrap();
        let result = small_result();
        let path = dir.path().join("aggregates.csv");
        write_aggregates_csv(&result, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + result.aggregates.len());
    }

    #[test]
    fn time_series_csv_has_a_row_per_set_and_model_columns() {
        let dir = tempfile::tempdir().unwrap();
        let result = small_result();
        let path = dir.path().join("over_time.csv");
        write_time_series_csv(&result, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "set,knn_accuracy,knn_confidence,dt_accuracy,dt_confidence"
        );
        assert_eq!(lines.len(), 1 + result.evaluation_sets.len());
        assert!(lines[1].starts_with("val,"));
        assert!(lines[2].starts_with("batch1,"));
    }

    #[test]
    fn calibration_csv_lists_each_model_once() {
        let dir = tempfile::tempdir().unwrap();
        let result = small_result();
        let path = dir.path().join("calibration.csv");
        write_calibration_comparison_csv(&result, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("knn,"));
        assert!(lines[2].starts_with("dt,"));
        // No empty metric fields: both models evaluated on both views.
        for line in &lines[1..] {
            assert!(!line.contains(",,"), "unexpected empty field in {line}");
        }
    }
}
