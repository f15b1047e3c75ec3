//! End-to-end acceptance suite. Each test checks one numbered criterion and
//! prints a single `criterion N: PASS/SKIP — detail` line; run with
//! `cargo test --test acceptance -- --nocapture --test-threads=1` to see the
//! lines in order.
//!
//! Criteria 1–4 exercise the real gas-sensor batches and need the data files
//! on disk (see `datasets/ucsd/README.md`). When the files are absent those
//! tests print a SKIP line and pass without asserting anything about the
//! data; they never fabricate results. Criteria 5–9 are self-contained.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;

use driftbench::data::{Dataset, Sample};
use driftbench::harness::{
    result_to_json_bytes, run_experiment, AggregateCell, DataSource, DriftedAggregate,
    ExperimentConfig, ExperimentResult, FittedModel, ModelSpec, MonitorParams,
    NeuralEnsembleParams, NeuralParams, TrainingParams,
};
use driftbench::metrics::{ece, PredictionRecord};
use driftbench::neural::{mcd_predict_proba, mlp_init, softmax, train, DropoutMode, MlpModel, TrainConfig};
use driftbench::seeds;
use driftbench::svm::{platt_apply, platt_fit};
use driftbench::synth::{generate_drift_stream, SynthConfig};
use driftbench::{Classifier, ProbVector};

// ---------------------------------------------------------------------------
// Pinned thresholds. Changing any of these weakens the suite; don't.
// ---------------------------------------------------------------------------

/// Criterion 1: minimum degradation from validation to drifted accuracy.
const MIN_ACCURACY_DROP: f64 = 0.10;
/// Criterion 1: minimum validation accuracy for every model.
const MIN_VAL_ACCURACY: f64 = 0.90;
/// Criterion 2: maximum validation ECE for every model.
const MAX_VAL_ECE: f64 = 0.10;
/// Criterion 4: how many of the 7 models must show inflated seed variance.
const MIN_MODELS_WITH_INFLATED_STD: usize = 6;
/// Criteria 1–4: wall-clock budget for the full 7-model x 10-seed protocol.
const DATASET_RUN_BUDGET_SECS: f64 = 3600.0;
/// Criterion 5: agreement tolerance against the brute-force oracle.
const ECE_ORACLE_TOLERANCE: f64 = 1e-12;
/// Criterion 5: wall-clock budget.
const ECE_ORACLE_BUDGET_SECS: f64 = 10.0;
/// Criterion 6: finite-difference step.
const FD_STEP: f64 = 1e-5;
/// Criterion 6: maximum relative error between analytic and numeric grads.
const MAX_GRADIENT_RELATIVE_ERROR: f64 = 1e-4;
/// Criterion 6: wall-clock budget.
const GRADIENT_BUDGET_SECS: f64 = 30.0;
/// Criterion 7: wall-clock budget for both drift-control runs.
const DRIFT_CONTROL_BUDGET_SECS: f64 = 300.0;
/// Criterion 7: quiet runs required out of 20 when nothing drifts.
const MIN_QUIET_RUNS: usize = 19;
/// Criterion 8: wall-clock budget.
const INVARIANT_BUDGET_SECS: f64 = 120.0;

fn announce(criterion: u32, status: &str, detail: &str) {
    println!("criterion {criterion}: {status} — {detail}");
}

// ---------------------------------------------------------------------------
// Criteria 1–4: the real gas-sensor batches, one shared protocol run.
// ---------------------------------------------------------------------------

const SENSOR_DIR_VAR: &str = "DRIFTBENCH_UCSD_DIR";
const SENSOR_BATCH_FILES: usize = 10;
const SENSOR_FEATURES: usize = 128;
const SENSOR_CLASSES: usize = 6;

/// Locates `batch1.dat` .. `batch10.dat`: under `$DRIFTBENCH_UCSD_DIR` when
/// set, else under `datasets/ucsd/` in the repository root.
fn sensor_batch_paths() -> Option<Vec<PathBuf>> {
    let dir = match std::env::var_os(SENSOR_DIR_VAR) {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../datasets/ucsd"),
    };
    let paths: Vec<PathBuf> = (1..=SENSOR_BATCH_FILES)
        .map(|n| dir.join(format!("batch{n}.dat")))
        .collect();
    paths.iter().all(|p| p.is_file()).then_some(paths)
}

/// One full protocol run shared by criteria 1–4, with its wall-clock time.
/// `None` means the data files are not on disk.
fn sensor_run() -> Option<&'static (ExperimentResult, f64)> {
    static RUN: OnceLock<Option<(ExperimentResult, f64)>> = OnceLock::new();
    RUN.get_or_init(|| {
        let paths = sensor_batch_paths()?;
        let config = ExperimentConfig {
            data: DataSource::LibsvmFiles {
                paths,
                num_features: SENSOR_FEATURES,
                num_classes: SENSOR_CLASSES,
            },
            train_batches: vec![0, 1],
            split_fraction: 0.5,
            seeds: (1..=10).collect(),
            models: ModelSpec::default_roster(),
            ece_bins: 10,
            monitor: MonitorParams::default(),
        };
        let started = Instant::now();
        let result = run_experiment(&config).expect("protocol run on the sensor batches");
        Some((result, started.elapsed().as_secs_f64()))
    })
    .as_ref()
}

fn skip_sensor(criterion: u32) {
    announce(
        criterion,
        "SKIP",
        &format!(
            "gas-sensor batches not found; set {SENSOR_DIR_VAR} or place \
             batch1.dat..batch10.dat under datasets/ucsd/"
        ),
    );
}

fn aggregate<'r>(result: &'r ExperimentResult, model: &str, set: &str) -> &'r AggregateCell {
    result
        .aggregates
        .iter()
        .find(|a| a.model == model && a.set == set)
        .unwrap_or_else(|| panic!("missing aggregate for ({model}, {set})"))
}

fn drifted_aggregate<'r>(result: &'r ExperimentResult, model: &str) -> &'r DriftedAggregate {
    result
        .drifted_aggregates
        .iter()
        .find(|a| a.model == model)
        .unwrap_or_else(|| panic!("missing drifted aggregate for {model}"))
}

fn roster_names(result: &ExperimentResult) -> Vec<String> {
    result.config.models.iter().map(|m| m.name().to_string()).collect()
}

/// Seed-mean accuracy averaged over the drifted batches (each batch weighted
/// equally, matching the per-batch reading of the degradation curve).
fn drifted_batch_mean_accuracy(result: &ExperimentResult, model: &str) -> f64 {
    let sets: Vec<&String> = result
        .evaluation_sets
        .iter()
        .filter(|s| s.as_str() != "val")
        .collect();
    assert!(!sets.is_empty(), "no drifted evaluation sets");
    let total: f64 = sets
        .iter()
        .map(|set| {
            aggregate(result, model, set)
                .accuracy
                .as_ref()
                .expect("accuracy aggregate")
                .mean
        })
        .sum();
    total / sets.len() as f64
}

#[test]
fn criterion_1_accuracy_degrades_under_drift() {
    let Some((result, secs)) = sensor_run() else {
        skip_sensor(1);
        return;
    };
    assert!(
        *secs < DATASET_RUN_BUDGET_SECS,
        "protocol run took {secs:.0} s, budget {DATASET_RUN_BUDGET_SECS:.0} s"
    );
    let mut worst_drop = f64::INFINITY;
    let mut worst_val = f64::INFINITY;
    for model in roster_names(result) {
        let val = aggregate(result, &model, "val")
            .accuracy
            .as_ref()
            .expect("validation accuracy")
            .mean;
        let drifted = drifted_batch_mean_accuracy(result, &model);
        let drop = val - drifted;
        assert!(
            val >= MIN_VAL_ACCURACY,
            "{model}: validation accuracy {val:.4} below {MIN_VAL_ACCURACY}"
        );
        assert!(
            drop >= MIN_ACCURACY_DROP,
            "{model}: drifted accuracy {drifted:.4} drops only {drop:.4} from validation {val:.4}"
        );
        worst_drop = worst_drop.min(drop);
        worst_val = worst_val.min(val);
    }
    announce(
        1,
        "PASS",
        &format!(
            "every model loses ≥ {MIN_ACCURACY_DROP} accuracy on drifted batches \
             (smallest drop {worst_drop:.3}, lowest validation accuracy {worst_val:.3}, \
             run took {secs:.0} s)"
        ),
    );
}

#[test]
fn criterion_2_calibration_decays_under_drift() {
    let Some((result, _)) = sensor_run() else {
        skip_sensor(2);
        return;
    };
    let mut worst_val_ece: f64 = 0.0;
    let mut smallest_gap = f64::INFINITY;
    for model in roster_names(result) {
        let val_ece = aggregate(result, &model, "val")
            .ece
            .as_ref()
            .expect("validation ECE")
            .mean;
        let drifted_ece = drifted_aggregate(result, &model)
            .ece_batch_mean
            .as_ref()
            .expect("drifted ECE")
            .mean;
        assert!(
            val_ece <= MAX_VAL_ECE,
            "{model}: validation ECE {val_ece:.4} above {MAX_VAL_ECE}"
        );
        assert!(
            drifted_ece > val_ece,
            "{model}: drifted ECE {drifted_ece:.4} does not exceed validation ECE {val_ece:.4}"
        );
        worst_val_ece = worst_val_ece.max(val_ece);
        smallest_gap = smallest_gap.min(drifted_ece - val_ece);
    }
    announce(
        2,
        "PASS",
        &format!(
            "drifted ECE exceeds validation ECE for every model \
             (smallest gap {smallest_gap:.3}, largest validation ECE {worst_val_ece:.3})"
        ),
    );
}

#[test]
fn criterion_3_forest_calibration_degrades_least() {
    let Some((result, _)) = sensor_run() else {
        skip_sensor(3);
        return;
    };
    let mut ranked: Vec<(String, f64)> = roster_names(result)
        .into_iter()
        .map(|model| {
            let ece = drifted_aggregate(result, &model)
                .ece_batch_mean
                .as_ref()
                .expect("drifted ECE")
                .mean;
            (model, ece)
        })
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    assert_eq!(
        ranked[0].0, "rf",
        "smallest drifted ECE belongs to {} ({:.4}), not rf",
        ranked[0].0, ranked[0].1
    );
    announce(
        3,
        "PASS",
        &format!(
            "rf has the smallest drifted ECE ({:.3}; runner-up {} at {:.3})",
            ranked[0].1, ranked[1].0, ranked[1].1
        ),
    );
}

#[test]
fn criterion_4_seed_variance_inflates_under_drift() {
    let Some((result, _)) = sensor_run() else {
        skip_sensor(4);
        return;
    };
    let names = roster_names(result);
    let inflated: Vec<&String> = names
        .iter()
        .filter(|model| {
            let val_std = aggregate(result, model, "val")
                .ece
                .as_ref()
                .expect("validation ECE")
                .std;
            let drifted_std = drifted_aggregate(result, model)
                .ece_batch_mean
                .as_ref()
                .expect("drifted ECE")
                .std;
            drifted_std > val_std
        })
        .collect();
    assert!(
        inflated.len() >= MIN_MODELS_WITH_INFLATED_STD,
        "only {} of {} models show inflated seed variance: {inflated:?}",
        inflated.len(),
        names.len()
    );
    announce(
        4,
        "PASS",
        &format!(
            "ECE seed variance grows under drift for {} of {} models",
            inflated.len(),
            names.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: ECE against an independently coded brute-force oracle.
// ---------------------------------------------------------------------------

/// Brute-force expected calibration error over raw `(probabilities, label)`
/// pairs, written from the definition: partition [0, 1] into `bins` equal
/// intervals (last one closed), average |bin accuracy − bin mean confidence|
/// weighted by bin occupancy. Shares no code with the production
/// implementation; even argmax is redone here.
fn oracle_ece(raw: &[(Vec<f64>, usize)], bins: usize) -> f64 {
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0f64; bins];
    let mut hit_sum = vec![0.0f64; bins];
    for (probs, label) in raw {
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate().skip(1) {
            if p > probs[best] {
                best = i;
            }
        }
        let confidence = probs[best];
        let correct = best == *label;
        let mut bin = (confidence * bins as f64).floor() as usize;
        if bin >= bins {
            bin = bins - 1;
        }
        count[bin] += 1;
        conf_sum[bin] += confidence;
        if correct {
            hit_sum[bin] += 1.0;
        }
    }
    let n = raw.len() as f64;
    (0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let m = count[b] as f64;
            (m / n) * (hit_sum[b] / m - conf_sum[b] / m).abs()
        })
        .sum()
}

#[test]
fn criterion_5_calibration_error_matches_brute_force_oracle() {
    let started = Instant::now();
    let mut rng = seeds::rng(0xD01F, &[50]);
    let bin_choices = [1usize, 10, 15];
    let mut max_gap: f64 = 0.0;
    for case in 0..1000 {
        let n = rng.random_range(1..=500);
        let classes = rng.random_range(2..=10);
        let bins = bin_choices[case % bin_choices.len()];
        let raw: Vec<(Vec<f64>, usize)> = (0..n)
            .map(|_| {
                let drawn: Vec<f64> = (0..classes).map(|_| rng.random::<f64>() + 1e-9).collect();
                let total: f64 = drawn.iter().sum();
                let probs: Vec<f64> = drawn.into_iter().map(|v| v / total).collect();
                (probs, rng.random_range(0..classes))
            })
            .collect();
        let records: Vec<PredictionRecord> = raw
            .iter()
            .map(|(probs, label)| {
                PredictionRecord::new(
                    ProbVector::new(probs.clone()).expect("normalized probabilities"),
                    *label,
                )
                .expect("valid record")
            })
            .collect();
        let report = ece(&records, bins).expect("calibration report");
        let oracle = oracle_ece(&raw, bins);
        let gap = (report.ece - oracle).abs();
        assert!(
            gap <= ECE_ORACLE_TOLERANCE,
            "case {case}: ece {} vs oracle {oracle} (gap {gap:e}, n={n}, \
             classes={classes}, bins={bins})",
            report.ece
        );
        max_gap = max_gap.max(gap);
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(
        secs < ECE_ORACLE_BUDGET_SECS,
        "oracle comparison took {secs:.1} s, budget {ECE_ORACLE_BUDGET_SECS} s"
    );
    announce(
        5,
        "PASS",
        &format!("1000 randomized record sets agree within {max_gap:.2e} in {secs:.1} s"),
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: analytic gradients against central finite differences.
// ---------------------------------------------------------------------------

fn central_difference(
    model: &mut MlpModel,
    theta: &[f64],
    index: usize,
    step: f64,
    data: &Dataset,
) -> f64 {
    let mut plus = theta.to_vec();
    plus[index] += step;
    model.set_flat_parameters(&plus).expect("set parameters");
    let loss_plus = model.loss(data).expect("loss");
    let mut minus = theta.to_vec();
    minus[index] -= step;
    model.set_flat_parameters(&minus).expect("set parameters");
    let loss_minus = model.loss(data).expect("loss");
    model.set_flat_parameters(theta).expect("restore parameters");
    (loss_plus - loss_minus) / (2.0 * step)
}

#[test]
fn criterion_6_analytic_gradients_match_finite_differences() {
    let started = Instant::now();
    let mut rng = seeds::rng(0xD01F, &[60]);
    let mut max_relative_error: f64 = 0.0;
    let mut corner_refinements = 0usize;
    for net in 0..20u64 {
        let num_features = rng.random_range(2..=6);
        let num_classes = rng.random_range(2..=5);
        let sizes = [num_features, 6, 5, 4, num_classes];
        let mut model =
            MlpModel::with_layer_sizes(&sizes, seeds::derive(0xD01F, &[60, net])).expect("model");
        // Move every parameter off its initialization value. Biases start
        // at zero, so a sample that silences a whole hidden layer would
        // otherwise leave each later pre-activation exactly on the
        // activation corner, where the loss is not differentiable and no
        // finite difference converges to the (sub)gradient.
        let nudged: Vec<f64> = model
            .flat_parameters()
            .iter()
            .map(|value| value + rng.random_range(-0.3..0.3))
            .collect();
        model.set_flat_parameters(&nudged).expect("nudge parameters");
        let num_samples = rng.random_range(1..=8);
        let samples: Vec<Sample> = (0..num_samples)
            .map(|_| Sample {
                features: (0..num_features)
                    .map(|_| rng.random::<f64>() * 4.0 - 2.0)
                    .collect(),
                label: rng.random_range(0..num_classes),
                batch: 0,
            })
            .collect();
        let data = Dataset::from_parts(samples, num_features, num_classes).expect("dataset");
        let (_, analytic) = model.loss_gradient(&data).expect("analytic gradient");
        let theta = model.flat_parameters();
        for index in 0..theta.len() {
            let numeric = central_difference(&mut model, &theta, index, FD_STEP, &data);
            let scale = analytic[index].abs().max(numeric.abs()).max(1e-6);
            let relative = (analytic[index] - numeric).abs() / scale;
            if relative < MAX_GRADIENT_RELATIVE_ERROR {
                max_relative_error = max_relative_error.max(relative);
                continue;
            }
            // The loss is piecewise smooth: a step that straddles an
            // activation corner corrupts the estimate even though the
            // gradient is right. A 100x smaller step moves off the
            // corner; it must agree, and this escape must stay rare.
            let refined = central_difference(&mut model, &theta, index, FD_STEP / 100.0, &data);
            let refined_scale = analytic[index].abs().max(refined.abs()).max(1e-6);
            let refined_relative = (analytic[index] - refined).abs() / refined_scale;
            assert!(
                refined_relative < MAX_GRADIENT_RELATIVE_ERROR,
                "net {net}, parameter {index}: analytic {} vs numeric {numeric} \
                 (relative error {relative:.2e}; still {refined_relative:.2e} \
                 at step {:e})",
                analytic[index],
                FD_STEP / 100.0
            );
            corner_refinements += 1;
            assert!(
                corner_refinements <= 5,
                "too many activation-corner refinements; gradients are suspect"
            );
        }
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(
        secs < GRADIENT_BUDGET_SECS,
        "gradient check took {secs:.1} s, budget {GRADIENT_BUDGET_SECS} s"
    );
    announce(
        6,
        "PASS",
        &format!(
            "20 networks, max relative error {max_relative_error:.2e}, \
             {corner_refinements} corner refinements, {secs:.1} s"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: the synthetic stream degrades every model and trips the
// monitor, and a driftless stream keeps the monitor quiet.
// ---------------------------------------------------------------------------

const DRIFT_SAMPLES_PER_BATCH: usize = 120;

fn drift_control_config(
    gain_decay: f64,
    offset_drift: f64,
    seeds: Vec<u64>,
    models: Vec<ModelSpec>,
) -> ExperimentConfig {
    ExperimentConfig {
        data: DataSource::Synth {
            config: SynthConfig {
                num_classes: 4,
                num_features: 8,
                samples_per_batch: DRIFT_SAMPLES_PER_BATCH,
                num_batches: 8,
                class_separation: 6.0,
                gain_decay_per_batch: gain_decay,
                offset_drift_per_batch: offset_drift,
                noise_deviation: 1.0,
            },
            seed: 1,
        },
        train_batches: vec![0],
        split_fraction: 0.5,
        seeds,
        models,
        ece_bins: 10,
        monitor: MonitorParams {
            window_size: 50,
            sensitivity: 3.0,
        },
    }
}

#[test]
fn criterion_7_synthetic_drift_is_detected_and_quiet_without_drift() {
    let started = Instant::now();

    // Drifting stream: gain decay 0.15 over 8 batches at separation 6.
    let drifting = drift_control_config(0.15, 1.5, vec![0, 1], ModelSpec::default_roster());
    let result = run_experiment(&drifting).expect("drifting run");
    let last_set = result
        .evaluation_sets
        .last()
        .expect("evaluation sets")
        .clone();
    assert_eq!(last_set, "batch7");
    for model in roster_names(&result) {
        let first = aggregate(&result, &model, "val")
            .accuracy
            .as_ref()
            .expect("first-batch accuracy")
            .mean;
        let last = aggregate(&result, &model, &last_set)
            .accuracy
            .as_ref()
            .expect("last-batch accuracy")
            .mean;
        assert!(
            last < first,
            "{model}: batch 7 accuracy {last:.4} not below batch 0 accuracy {first:.4}"
        );
    }
    let alarm_limit = 3 * DRIFT_SAMPLES_PER_BATCH;
    let mut alarm_indices = Vec::new();
    for monitor in result.monitors.iter().filter(|m| m.model == "rf") {
        let index = monitor.first_alarm_index.unwrap_or_else(|| {
            panic!("rf monitor raised no alarm for seed {}", monitor.seed)
        });
        assert!(
            index < alarm_limit,
            "rf monitor alarm at sample {index} for seed {}, limit {alarm_limit}",
            monitor.seed
        );
        alarm_indices.push(index);
    }
    assert_eq!(alarm_indices.len(), drifting.seeds.len());

    // Driftless stream: identical generator with both drift rates at zero.
    let quiet_config = drift_control_config(
        0.0,
        0.0,
        (0..20).collect(),
        vec![ModelSpec::RandomForest(Default::default())],
    );
    let quiet_result = run_experiment(&quiet_config).expect("driftless run");
    let quiet = quiet_result
        .monitors
        .iter()
        .filter(|m| m.first_alarm_index.is_none() && m.error.is_none())
        .count();
    assert!(
        quiet >= MIN_QUIET_RUNS,
        "only {quiet} of 20 driftless runs stayed quiet"
    );

    let secs = started.elapsed().as_secs_f64();
    assert!(
        secs < DRIFT_CONTROL_BUDGET_SECS,
        "drift control took {secs:.1} s, budget {DRIFT_CONTROL_BUDGET_SECS} s"
    );
    announce(
        7,
        "PASS",
        &format!(
            "all models degrade by batch 7; rf alarms at samples {alarm_indices:?} \
             (limit {alarm_limit}); {quiet}/20 driftless runs quiet; {secs:.1} s"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: probability and identity invariants across all 7 models.
// ---------------------------------------------------------------------------

fn invariant_training_data() -> Dataset {
    generate_drift_stream(
        &SynthConfig {
            num_classes: 3,
            num_features: 4,
            samples_per_batch: 60,
            num_batches: 1,
            class_separation: 4.0,
            gain_decay_per_batch: 0.0,
            offset_drift_per_batch: 0.0,
            noise_deviation: 1.0,
        },
        7,
    )
    .expect("training data")
}

/// Probe points: the training inputs plus scaled and shifted copies, so the
/// invariants also hold far outside the training support.
fn probe_points(data: &Dataset) -> Vec<Vec<f64>> {
    let mut points = Vec::new();
    for sample in data.samples() {
        points.push(sample.features.clone());
    }
    for sample in data.samples().iter().take(10) {
        points.push(sample.features.iter().map(|v| v * 3.0).collect());
        points.push(sample.features.iter().map(|v| v - 5.0).collect());
    }
    points.push(vec![0.0; data.num_features()]);
    points
}

fn assert_simplex(probs: &ProbVector, classes: usize, context: &str) {
    let values = probs.probs();
    assert_eq!(values.len(), classes, "{context}: wrong class count");
    for &p in values {
        assert!((0.0..=1.0).contains(&p), "{context}: probability {p} outside [0, 1]");
    }
    let total: f64 = values.iter().sum();
    assert!(
        (total - 1.0).abs() < 1e-9,
        "{context}: probabilities sum to {total}"
    );
}

#[test]
fn criterion_8_probability_and_identity_invariants() {
    let started = Instant::now();
    let data = invariant_training_data();
    let points = probe_points(&data);

    // Every roster model emits a valid probability simplex everywhere.
    for spec in ModelSpec::default_roster() {
        let fitted = spec.fit(&data, 11).expect("fit");
        for (i, point) in points.iter().enumerate() {
            let probs = fitted.predict_proba(point).expect("prediction");
            assert_simplex(&probs, data.num_classes(), &format!("{} point {i}", spec.name()));
        }
    }

    // The forest's probabilities are the arithmetic mean of its trees'.
    let forest_fit = ModelSpec::RandomForest(Default::default())
        .fit(&data, 11)
        .expect("forest fit");
    let FittedModel::RandomForest(forest) = &forest_fit else {
        panic!("random_forest spec fitted something else");
    };
    for point in &points {
        let combined = forest.predict_proba(point).expect("forest prediction");
        let mut mean = vec![0.0; data.num_classes()];
        for tree in forest.trees() {
            for (m, p) in mean.iter_mut().zip(tree.predict_proba(point).expect("tree").probs()) {
                *m += p;
            }
        }
        for m in &mut mean {
            *m /= forest.trees().len() as f64;
        }
        for (a, b) in combined.probs().iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12, "forest mean-of-trees identity broken");
        }
    }

    // A one-member ensemble is exactly the single network it contains.
    let ensemble_fit = ModelSpec::NeuralEnsemble(NeuralEnsembleParams {
        members: 1,
        training: TrainingParams::default(),
    })
    .fit(&data, 5)
    .expect("ensemble fit");
    let FittedModel::NeuralEnsemble(ensemble) = &ensemble_fit else {
        panic!("neural_ensemble spec fitted something else");
    };
    let solo_seed = seeds::derive(5, &[seeds::tag::MEMBER, 0]);
    let solo_fit = ModelSpec::Neural(NeuralParams {
        training: TrainingParams::default(),
    })
    .fit(&data, solo_seed)
    .expect("solo fit");
    let FittedModel::Neural(solo) = &solo_fit else {
        panic!("neural spec fitted something else");
    };
    assert_eq!(
        ensemble.members()[0].flat_parameters(),
        solo.flat_parameters(),
        "one-member ensemble differs from the equivalent single network"
    );
    for point in &points {
        assert_eq!(
            ensemble_fit.predict_proba(point).expect("ensemble").probs(),
            solo_fit.predict_proba(point).expect("solo").probs(),
            "one-member ensemble prediction differs from the single network"
        );
    }

    // Dropout-free Monte Carlo averaging collapses to one deterministic pass.
    let plain = mlp_init(data.num_features(), data.num_classes(), 99);
    let trained = train(
        plain,
        &data,
        &TrainConfig {
            epochs: 5,
            seed: 99,
            ..TrainConfig::default()
        },
    )
    .expect("training");
    for point in points.iter().take(20) {
        let averaged = mcd_predict_proba(&trained, point, 20, 123).expect("averaged");
        let single = softmax(&trained.forward(point, DropoutMode::Off).expect("forward"))
            .expect("softmax");
        assert_eq!(
            averaged.probs(),
            single.probs(),
            "zero-dropout Monte Carlo differs from a deterministic pass"
        );
    }

    // Sigmoid calibration fitted on positively ordered scores is monotone.
    let scores = [-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0];
    let labels = scores.map(|s| s > 0.0);
    let params = platt_fit(&scores, &labels).expect("calibration fit");
    let mut previous = f64::NEG_INFINITY;
    let mut s = -5.0;
    while s <= 5.0 {
        let p = platt_apply(&params, s);
        assert!((0.0..=1.0).contains(&p), "calibrated probability {p} outside [0, 1]");
        assert!(
            p >= previous - 1e-12,
            "calibrated probability decreases at score {s}: {p} < {previous}"
        );
        previous = p;
        s += 0.25;
    }

    // Softmax is invariant to a constant shift of the logits.
    let mut rng = seeds::rng(0xD01F, &[80]);
    for _ in 0..50 {
        let logits: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let base = softmax(&logits).expect("softmax");
        for shift in [-50.0, 0.5, 1000.0] {
            let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
            let moved = softmax(&shifted).expect("softmax");
            for (a, b) in base.probs().iter().zip(moved.probs()) {
                assert!(
                    (a - b).abs() < 1e-9,
                    "softmax changed under shift {shift}: {a} vs {b}"
                );
            }
        }
    }

    let secs = started.elapsed().as_secs_f64();
    assert!(
        secs < INVARIANT_BUDGET_SECS,
        "invariant suite took {secs:.1} s, budget {INVARIANT_BUDGET_SECS} s"
    );
    announce(8, "PASS", &format!("all 7 models hold the invariants in {secs:.1} s"));
}

// ---------------------------------------------------------------------------
// Criterion 9: the same configuration serializes to identical bytes twice.
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_identical_configs_produce_identical_bytes() {
    let config = ExperimentConfig {
        data: DataSource::Synth {
            config: SynthConfig {
                num_classes: 3,
                num_features: 5,
                samples_per_batch: 50,
                num_batches: 4,
                class_separation: 5.0,
                gain_decay_per_batch: 0.1,
                offset_drift_per_batch: 0.5,
                noise_deviation: 1.0,
            },
            seed: 3,
        },
        train_batches: vec![0],
        split_fraction: 0.5,
        seeds: vec![0, 1],
        models: vec![
            ModelSpec::DecisionTree(Default::default()),
            ModelSpec::Neural(NeuralParams {
                training: TrainingParams::default(),
            }),
        ],
        ece_bins: 10,
        monitor: MonitorParams::default(),
    };
    let first = result_to_json_bytes(&run_experiment(&config).expect("first run"))
        .expect("first serialization");
    let second = result_to_json_bytes(&run_experiment(&config).expect("second run"))
        .expect("second serialization");
    assert_eq!(first, second, "two identical runs serialized differently");
    announce(
        9,
        "PASS",
        &format!("two runs produced identical result JSON ({} bytes)", first.len()),
    );
}

