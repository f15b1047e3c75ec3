//! Random forest: bagged trees with per-split feature subsampling.
//!
//! Each tree trains on a bootstrap resample (n draws with replacement) and
//! considers `ceil(sqrt(D))` randomly chosen features at every split. The
//! forest's probability output is the plain arithmetic mean of its trees'
//! leaf distributions, summed in tree order — a deliberately fixed
//! reduction so results are reproducible bit for bit.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::models::tree::{fit_tree, FeatureSampling};
use crate::models::{check_dimensions, Classifier, ModelError, ProbVector, TreeModel};
use crate::seeds;

/// Knobs for forest fitting. The two booleans exist for equivalence
/// testing: with both disabled and one tree, the forest collapses to
/// exactly [`dt_fit`](crate::models::dt_fit).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestConfig {
    pub num_trees: usize,
    pub max_depth: usize,
    /// Draw a bootstrap resample per tree (else train on the full set).
    pub bootstrap: bool,
    /// Consider only `ceil(sqrt(D))` features per split (else all).
    pub subsample_features: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            num_trees: 100,
            max_depth: 6,
            bootstrap: true,
            subsample_features: true,
        }
    }
}

/// A fitted forest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<TreeModel>,
    num_features: usize,
    num_classes: usize,
}

/// Fits a standard forest: bootstrap on, feature subsampling on.
pub fn rf_fit(
    train: &Dataset,
    num_trees: usize,
    max_depth: usize,
    seed: u64,
) -> Result<ForestModel, ModelError> {
    rf_fit_with(
        train,
        &ForestConfig {
            num_trees,
            max_depth,
            ..ForestConfig::default()
        },
        seed,
    )
}

/// Fits a forest with explicit configuration.
///
/// Tree `i` draws its bootstrap and split-sampling randomness from the
/// derived stream `(seed, TREE, i)`, so the fit is independent of thread
/// scheduling and of how many trees surround it.
pub fn rf_fit_with(
    train: &Dataset,
    config: &ForestConfig,
    seed: u64,
) -> Result<ForestModel, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if config.num_trees == 0 {
        return Err(ModelError::ParameterOutOfRange {
            name: "num_trees",
            value: 0.0,
            range: "1..",
        });
    }
    let n = train.len();
    let subsample = (train.num_features() as f64).sqrt().ceil() as usize;
    let trees: Result<Vec<TreeModel>, ModelError> = (0..config.num_trees)
        .into_par_iter()
        .map(|i| {
            let tree_seed = seeds::derive(seed, &[seeds::tag::TREE, i as u64]);
            let indices: Vec<usize> = if config.bootstrap {
                let mut rng = seeds::rng(tree_seed, &[]);
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let sampling = if config.subsample_features {
                FeatureSampling::Subsample(subsample)
            } else {
                FeatureSampling::All
            };
            fit_tree(train, &indices, config.max_depth, sampling, tree_seed)
        })
        .collect();
    Ok(ForestModel {
        trees: trees?,
        num_features: train.num_features(),
        num_classes: train.num_classes(),
    })
}

impl ForestModel {
    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }
}

impl Classifier for ForestModel {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn num_features(&self) -> usize {
        self.num_features
    }

    fn predict_proba(&self, features: &[f64]) -> Result<ProbVector, ModelError> {
        check_dimensions(self.num_features, features)?;
        let mut sums = vec![0.0; self.num_classes];
        for tree in &self.trees {
            let p = tree.predict_proba(features)?;
            for (s, &v) in sums.iter_mut().zip(p.probs()) {
                *s += v;
            }
        }
        let t = self.trees.len() as f64;
        for s in &mut sums {
            *s /= t;
        }
        ProbVector::new(sums)
    }
}
