//! k-nearest-neighbors classifier with inverse-distance-weighted
//! probabilities.
//!
//! The probability assigned to class `c` is the normalized sum of weights
//! `1 / (distance + 1e-12)` over the `k` nearest training samples with that
//! label. Exact feature matches short-circuit the weighting: if any of the
//! `k` neighbors sits at distance zero, the probability mass is the class
//! frequency among those exact matches (so a single exact match yields
//! probability 1 for its class, exactly).

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::models::{check_dimensions, Classifier, ModelError, ProbVector};

/// Guard added to distances before inversion so finite weights exist for
/// arbitrarily close (but not identical) neighbors.
const DISTANCE_EPSILON: f64 = 1e-12;

/// A fitted nearest-neighbors model; stores the training set verbatim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    k: usize,
    num_features: usize,
    num_classes: usize,
}

/// Memorizes the training set. `k` must lie in `1..=n`.
pub fn knn_fit(train: &Dataset, k: usize) -> Result<KnnModel, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if k < 1 || k > train.len() {
        return Err(ModelError::InvalidNeighborCount {
            k,
            max: train.len(),
        });
    }
    Ok(KnnModel {
        features: train.samples().iter().map(|s| s.features.clone()).collect(),
        labels: train.samples().iter().map(|s| s.label).collect(),
        k,
        num_features: train.num_features(),
        num_classes: train.num_classes(),
    })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }
}

impl Classifier for KnnModel {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn num_features(&self) -> usize {
        self.num_features
    }

    fn predict_proba(&self, features: &[f64]) -> Result<ProbVector, ModelError> {
        check_dimensions(self.num_features, features)?;
        // (distance, training index); index breaks distance ties so the
        // neighbor set is deterministic.
        let mut order: Vec<(f64, usize)> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, x)| (euclidean(features, x), i))
            .collect();
        let k = self.k;
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("finite distances"));
            order.truncate(k);
        }
        order.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));

        let mut probs = vec![0.0; self.num_classes];
        let exact: Vec<&(f64, usize)> = order.iter().filter(|(d, _)| *d == 0.0).collect();
        if !exact.is_empty() {
            let share = 1.0 / exact.len() as f64;
            for (_, i) in exact {
                probs[self.labels[*i]] += share;
            }
        } else {
            let mut total = 0.0;
            for (d, i) in &order {
                let w = 1.0 / (d + DISTANCE_EPSILON);
                probs[self.labels[*i]] += w;
                total += w;
            }
            for p in &mut probs {
                *p /= total;
            }
        }
        ProbVector::new(probs)
    }
}
