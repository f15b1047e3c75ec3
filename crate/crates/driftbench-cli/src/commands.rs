//! The three commands. Each writes its artifacts under the resolved
//! output directory — never anywhere else — and keeps standard output
//! for the human-readable summary.

use std::fs;
use std::path::{Path, PathBuf};

use driftbench::data::serialize_csv;
use driftbench::harness::{
    run_experiment, write_aggregates_csv, write_calibration_comparison_csv, write_cells_csv,
    write_result_json, write_time_series_csv, ExperimentResult, StatPair,
};
use driftbench::synth::generate_drift_stream;

use crate::document::Resolved;
use crate::error::{data_error, from_harness, internal_error, CliError};

pub const RESULT_FILE: &str = "result.json";
pub const CELLS_FILE: &str = "cells.csv";
pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const TIME_SERIES_FILE: &str = "metrics_over_time.csv";
pub const CALIBRATION_FILE: &str = "calibration_comparison.csv";
pub const SYNTH_FILE: &str = "synth.csv";

/// Fits every (model, seed) cell, writes the result document plus the
/// cell and aggregate tables, and prints the per-model summary.
pub fn cmd_run(resolved: &Resolved) -> Result<(), CliError> {
    let config = resolved.experiment_config()?;
    init_workers(resolved.jobs)?;
    let result = run_experiment(&config).map_err(from_harness)?;

    ensure_out_dir(&resolved.out_dir)?;
    write_result_json(&result, &resolved.out_dir.join(RESULT_FILE)).map_err(from_harness)?;
    write_cells_csv(&result, &resolved.out_dir.join(CELLS_FILE)).map_err(from_harness)?;
    write_aggregates_csv(&result, &resolved.out_dir.join(AGGREGATES_FILE))
        .map_err(from_harness)?;

    print_summary(&result, resolved.jobs);
    println!(
        "wrote {RESULT_FILE}, {CELLS_FILE}, {AGGREGATES_FILE} to {}",
        resolved.out_dir.display()
    );
    Ok(())
}

/// Generates one synthetic drift stream and writes it as a canonical
/// CSV dataset.
pub fn cmd_synth(resolved: &Resolved) -> Result<(), CliError> {
    let (config, seed) = resolved.synth_request()?;
    let dataset = generate_drift_stream(&config, seed)
        .map_err(|e| from_harness(driftbench::harness::HarnessError::Synth(e)))?;

    ensure_out_dir(&resolved.out_dir)?;
    let path = resolved.out_dir.join(SYNTH_FILE);
    let file = fs::File::create(&path)
        .map_err(|e| data_error(format!("cannot write {}: {e}", path.display())))?;
    serialize_csv(&dataset, file)
        .map_err(|e| data_error(format!("cannot write {}: {e}", path.display())))?;

    println!(
        "wrote {} rows in {} batches to {}",
        dataset.len(),
        dataset.batch_ids().len(),
        path.display()
    );
    Ok(())
}

/// Re-derives the two plot-ready tables — metrics over time and the
/// validation-versus-drifted calibration comparison — from an existing
/// result document. Never recomputes anything.
pub fn cmd_report(resolved: &Resolved, result_path: Option<PathBuf>) -> Result<(), CliError> {
    let path = result_path.unwrap_or_else(|| resolved.out_dir.join(RESULT_FILE));
    let bytes = fs::read(&path)
        .map_err(|e| data_error(format!("cannot read result {}: {e}", path.display())))?;
    let result: ExperimentResult = serde_json::from_slice(&bytes)
        .map_err(|e| data_error(format!("malformed result {}: {e}", path.display())))?;

    ensure_out_dir(&resolved.out_dir)?;
    write_time_series_csv(&result, &resolved.out_dir.join(TIME_SERIES_FILE))
        .map_err(from_harness)?;
    write_calibration_comparison_csv(&result, &resolved.out_dir.join(CALIBRATION_FILE))
        .map_err(from_harness)?;

    println!(
        "wrote {TIME_SERIES_FILE}, {CALIBRATION_FILE} to {}",
        resolved.out_dir.display()
    );
    Ok(())
}

fn ensure_out_dir(out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| data_error(format!("cannot create {}: {e}", out_dir.display())))
}

/// Caps the global worker pool when `--jobs`/`jobs` is set; otherwise
/// the library's default parallelism applies.
fn init_workers(jobs: Option<usize>) -> Result<(), CliError> {
    let Some(jobs) = jobs else { return Ok(()) };
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(internal_error)
}

fn stat_pair(stat: &Option<StatPair>) -> String {
    match stat {
        Some(s) => format!("{:.4} \u{b1} {:.4}", s.mean, s.std),
        None => "-".to_string(),
    }
}

fn stat_mean(stat: &Option<StatPair>) -> String {
    match stat {
        Some(s) => format!("{:.4}", s.mean),
        None => "-".to_string(),
    }
}

/// Per-model table: validation accuracy and ECE (mean over seeds with
/// spread), then the drifted-batch means.
fn print_summary(result: &ExperimentResult, jobs: Option<usize>) {
    println!(
        "{:<7} {:>17} {:>17} {:>11} {:>11}",
        "model", "val_accuracy", "val_ece", "drift_acc", "drift_ece"
    );
    for model in result.config.models.iter().map(|m| m.name()) {
        let val = result
            .aggregates
            .iter()
            .find(|cell| cell.model == model && cell.set == "val");
        let drifted = result
            .drifted_aggregates
            .iter()
            .find(|cell| cell.model == model);
        println!(
            "{:<7} {:>17} {:>17} {:>11} {:>11}",
            model,
            val.map_or_else(|| "-".to_string(), |c| stat_pair(&c.accuracy)),
            val.map_or_else(|| "-".to_string(), |c| stat_pair(&c.ece)),
            drifted.map_or_else(|| "-".to_string(), |c| stat_mean(&c.accuracy)),
            drifted.map_or_else(|| "-".to_string(), |c| stat_mean(&c.ece_batch_mean)),
        );
    }
    let drifted_sets = result.evaluation_sets.len().saturating_sub(1);
    println!(
        "seeds: {}   evaluation sets: val + {} drifted batches",
        result.config.seeds.len(),
        drifted_sets
    );
    match jobs {
        Some(n) => println!("workers: {n}"),
        None => println!("workers: default"),
    }
}
