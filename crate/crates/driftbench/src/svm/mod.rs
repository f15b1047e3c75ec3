//! Kernel SVM with calibrated probability outputs.
//!
//! Multiclass classification is one-vs-rest: one binary SVM per class,
//! each paired with a Platt sigmoid fitted on out-of-fold decision values
//! from a 5-fold cross-validation, so the calibration never sees decision
//! values produced by a machine trained on the same points. Per-class
//! probabilities are normalized to a simplex at predict time.

mod kernel;
mod platt;
mod smo;

pub use kernel::{rbf_scale_gamma, Kernel};
pub use platt::{platt_apply, platt_fit, platt_nll, PlattParams};
pub use smo::{svm_fit_binary, BinarySvmModel};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::models::{check_dimensions, Classifier, ModelError, ProbVector};
use crate::seeds;

/// Number of cross-validation folds used for calibration values.
const CALIBRATION_FOLDS: usize = 5;

/// Probability floor: when every per-class Platt probability is below
/// this, the prediction falls back to the uniform distribution.
const PROBABILITY_FLOOR: f64 = 1e-12;

/// One-vs-rest SVM with per-class Platt calibration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MulticlassSvmModel {
    machines: Vec<(BinarySvmModel, PlattParams)>,
    num_features: usize,
}

impl MulticlassSvmModel {
    /// The per-class binary machines and their sigmoid parameters,
    /// indexed by class.
    pub fn machines(&self) -> &[(BinarySvmModel, PlattParams)] {
        &self.machines
    }
}

/// Fold assignment: a seeded permutation chopped into `folds` nearly equal
/// contiguous chunks; every index lands in exactly one fold.
fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut permutation: Vec<usize> = (0..n).collect();
    permutation.shuffle(&mut seeds::rng(seed, &[seeds::tag::FOLD]));
    let mut fold_of = vec![0usize; n];
    for (position, &index) in permutation.iter().enumerate() {
        fold_of[index] = position * folds / n;
    }
    fold_of
}

/// Fits the one-vs-rest model with 5-fold cross-validated calibration.
///
/// Every class needs at least 5 samples so each fold's complement contains
/// both OvR labels often enough to train. Folds are shared across classes
/// (one partition per fit, derived from the seed).
pub fn svm_fit_multiclass(
    train: &Dataset,
    kernel: Kernel,
    c_reg: f64,
    tol: f64,
    seed: u64,
) -> Result<MulticlassSvmModel, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let num_classes = train.num_classes();
    if num_classes < 2 {
        return Err(ModelError::TooFewClasses {
            required: 2,
            found: num_classes,
        });
    }
    for (class, &count) in train.class_counts().iter().enumerate() {
        if count < CALIBRATION_FOLDS {
            return Err(ModelError::ClassTooSmall {
                class,
                count,
                required: CALIBRATION_FOLDS,
            });
        }
    }

    let n = train.len();
    let features: Vec<&[f64]> = train.samples().iter().map(|s| s.features.as_slice()).collect();
    let labels: Vec<usize> = train.samples().iter().map(|s| s.label).collect();
    let fold_of = fold_assignment(n, CALIBRATION_FOLDS, seed);

    let machines: Result<Vec<(BinarySvmModel, PlattParams)>, ModelError> = (0..num_classes)
        .into_par_iter()
        .map(|class| {
            let y: Vec<f64> = labels
                .iter()
                .map(|&l| if l == class { 1.0 } else { -1.0 })
                .collect();
            let positive: Vec<bool> = labels.iter().map(|&l| l == class).collect();

            // Out-of-fold decision values for calibration.
            let mut calibration_values = vec![0.0f64; n];
            for fold in 0..CALIBRATION_FOLDS {
                let train_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
                let held_out: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
                let fold_has_both = {
                    let mut pos = false;
                    let mut neg = false;
                    for &i in &train_idx {
                        if y[i] > 0.0 {
                            pos = true;
                        } else {
                            neg = true;
                        }
                    }
                    pos && neg
                };
                if !fold_has_both {
                    // Degenerate fold complement: emit the constant label
                    // of the only class present as the decision value.
                    let constant = if train_idx.iter().any(|&i| y[i] > 0.0) {
                        1.0
                    } else {
                        -1.0
                    };
                    for &i in &held_out {
                        calibration_values[i] = constant;
                    }
                    continue;
                }
                let fold_features: Vec<&[f64]> =
                    train_idx.iter().map(|&i| features[i]).collect();
                let fold_y: Vec<f64> = train_idx.iter().map(|&i| y[i]).collect();
                let fold_model = smo::fit_from_parts(
                    &fold_features,
                    &fold_y,
                    train.num_features(),
                    kernel,
                    c_reg,
                    tol,
                )?;
                for &i in &held_out {
                    calibration_values[i] = fold_model.decision_value(features[i])?;
                }
            }
            let platt = platt_fit(&calibration_values, &positive)?;

            // The deployed machine trains on everything.
            let full =
                smo::fit_from_parts(&features, &y, train.num_features(), kernel, c_reg, tol)?;
            Ok((full, platt))
        })
        .collect();

    Ok(MulticlassSvmModel {
        machines: machines?,
        num_features: train.num_features(),
    })
}

/// Per-class calibrated probabilities, sum-normalized.
pub fn svm_predict_proba(
    model: &MulticlassSvmModel,
    features: &[f64],
) -> Result<ProbVector, ModelError> {
    model.predict_proba(features)
}

impl Classifier for MulticlassSvmModel {
    fn num_classes(&self) -> usize {
        self.machines.len()
    }

    fn num_features(&self) -> usize {
        self.num_features
    }

    fn predict_proba(&self, features: &[f64]) -> Result<ProbVector, ModelError> {
        check_dimensions(self.num_features, features)?;
        let mut probs = Vec::with_capacity(self.machines.len());
        for (machine, platt) in &self.machines {
            probs.push(platt_apply(platt, machine.decision_value(features)?));
        }
        if probs.iter().all(|&p| p < PROBABILITY_FLOOR) {
            return Ok(ProbVector::uniform(self.machines.len()));
        }
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        ProbVector::new(probs)
    }
}
