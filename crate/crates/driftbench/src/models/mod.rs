//! Probabilistic classifiers and the contract they share.
//!
//! Every model in this crate — the neighbors/tree/forest family here, the
//! SVM in [`crate::svm`], and the networks in [`crate::neural`] — implements
//! [`Classifier`]: given a feature vector it returns a [`ProbVector`], a
//! validated point on the probability simplex. The predicted class is the
//! argmax and the model's *confidence* in a prediction is the maximum
//! probability; every metric and the drift monitor are built on those two
//! definitions.

mod forest;
mod knn;
mod tree;

pub use forest::{rf_fit, rf_fit_with, ForestConfig, ForestModel};
pub use knn::{knn_fit, KnnModel};
pub use tree::{dt_fit, TreeModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors shared by model fitting and prediction across all families.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("feature dimensionality mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set must contain at least {required} classes, found {found}")]
    TooFewClasses { required: usize, found: usize },
    #[error("class {class} has {count} samples, need at least {required}")]
    ClassTooSmall {
        class: usize,
        count: usize,
        required: usize,
    },
    #[error("neighbor count k={k} outside valid range 1..={max}")]
    InvalidNeighborCount { k: usize, max: usize },
    #[error("{name} must be strictly positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("{name} = {value} outside valid range {range}")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
}

/// Slack allowed between the probability sum and 1.
const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// A probability distribution over classes: entries are finite,
/// non-negative, and sum to 1 within `1e-9`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates and wraps a probability vector.
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        if probs.is_empty() {
            return Err(ModelError::InvalidProbability("empty vector".to_string()));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !p.is_finite() {
                return Err(ModelError::InvalidProbability(format!(
                    "non-finite entry {p}"
                )));
            }
            if p < 0.0 {
                return Err(ModelError::InvalidProbability(format!(
                    "negative entry {p}"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(ModelError::InvalidProbability(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(ProbVector(probs))
    }

    /// The uniform distribution over `num_classes` classes.
    pub fn uniform(num_classes: usize) -> Self {
        ProbVector(vec![1.0 / num_classes as f64; num_classes])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    /// Index of the most probable class; ties go to the lowest class id.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// The maximum probability — the model's confidence in its prediction.
    pub fn confidence(&self) -> f64 {
        self.0[self.argmax()]
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = ModelError;

    fn try_from(v: Vec<f64>) -> Result<Self, ModelError> {
        ProbVector::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Vec<f64> {
        p.0
    }
}

/// The prediction contract every model family implements.
///
/// Implementations are immutable after fitting, so a fitted model can be
/// shared across threads and queried concurrently.
pub trait Classifier: Send + Sync {
    fn num_classes(&self) -> usize;

    fn num_features(&self) -> usize;

    /// Class-probability distribution for one feature vector.
    fn predict_proba(&self, features: &[f64]) -> Result<ProbVector, ModelError>;

    /// Predicted class: argmax of the probabilities, ties to the lowest id.
    fn predict(&self, features: &[f64]) -> Result<usize, ModelError> {
        Ok(self.predict_proba(features)?.argmax())
    }
}

/// Checks a query vector against the model's expected dimensionality.
pub(crate) fn check_dimensions(expected: usize, features: &[f64]) -> Result<(), ModelError> {
    if features.len() != expected {
        return Err(ModelError::DimensionMismatch {
            expected,
            found: features.len(),
        });
    }
    Ok(())
}
