//! CART-style decision tree with Gini impurity and class-fraction leaves.
//!
//! Splits are axis-aligned thresholds chosen to minimize the
//! sample-weighted Gini impurity of the two children. Candidate thresholds
//! are the midpoints between consecutive distinct sorted feature values;
//! ties are broken toward the lowest feature index, then the lowest
//! threshold. Growth stops at `max_depth`, on pure nodes, or when no split
//! strictly reduces impurity. A leaf predicts the class-count fractions of
//! the training samples that reached it.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::models::{check_dimensions, Classifier, ModelError, ProbVector};
use crate::seeds;

/// Minimum impurity decrease for a split to be accepted; guards against
/// splits that only exist through floating-point noise.
const MIN_IMPURITY_DECREASE: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        /// Child index for `x[feature] <= threshold`.
        left: usize,
        /// Child index for `x[feature] > threshold`.
        right: usize,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

/// A fitted decision tree. Nodes live in a flat arena; node 0 is the root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeModel {
    nodes: Vec<Node>,
    num_features: usize,
    num_classes: usize,
}

/// Controls how the tree fitter selects candidate features at each split;
/// used by the forest to inject per-split feature subsampling.
pub(crate) enum FeatureSampling {
    All,
    /// Sample this many distinct feature indices per split.
    Subsample(usize),
}

/// Fits a tree on the full feature set.
///
/// The fit is deterministic; the seed exists so all fitters share one
/// signature (it only matters for forests, which subsample features).
pub fn dt_fit(train: &Dataset, max_depth: usize, seed: u64) -> Result<TreeModel, ModelError> {
    fit_tree(
        train,
        &(0..train.len()).collect::<Vec<_>>(),
        max_depth,
        FeatureSampling::All,
        seed,
    )
}

/// Fits a tree on a subset of sample indices (forest bootstrap hands in
/// repeated indices) with the given feature-sampling policy.
pub(crate) fn fit_tree(
    train: &Dataset,
    indices: &[usize],
    max_depth: usize,
    sampling: FeatureSampling,
    seed: u64,
) -> Result<TreeModel, ModelError> {
    if train.is_empty() || indices.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mut builder = TreeBuilder {
        train,
        nodes: Vec::new(),
        sampling,
        rng: seeds::rng(seed, &[seeds::tag::TREE]),
    };
    builder.grow(indices, max_depth);
    Ok(TreeModel {
        nodes: builder.nodes,
        num_features: train.num_features(),
        num_classes: train.num_classes(),
    })
}

struct TreeBuilder<'a> {
    train: &'a Dataset,
    nodes: Vec<Node>,
    sampling: FeatureSampling,
    rng: rand_chacha::ChaCha8Rng,
}

/// Gini impurity of a class-count vector: `1 - sum((c_k / n)^2)`.
fn gini(counts: &[u32], total: f64) -> f64 {
    let mut sum_sq = 0.0;
    for &c in counts {
        let p = c as f64 / total;
        sum_sq += p * p;
    }
    1.0 - sum_sq
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    weighted_impurity: f64,
}

impl TreeBuilder<'_> {
    fn class_counts(&self, indices: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.train.num_classes()];
        for &i in indices {
            counts[self.train.samples()[i].label] += 1;
        }
        counts
    }

    /// Grows the subtree for `indices`, returning its arena index.
    fn grow(&mut self, indices: &[usize], depth_left: usize) -> usize {
        let counts = self.class_counts(indices);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if depth_left == 0 || pure {
            return self.push_leaf(counts);
        }
        let parent_impurity = gini(&counts, indices.len() as f64);
        match self.best_split(indices, parent_impurity) {
            None => self.push_leaf(counts),
            Some(split) => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                    indices.iter().copied().partition(|&i| {
                        self.train.samples()[i].features[split.feature] <= split.threshold
                    });
                // Reserve the split slot before growing children so the
                // arena layout is parent-before-children.
                let slot = self.nodes.len();
                self.nodes.push(Node::Leaf { counts: vec![] });
                let left = self.grow(&left_idx, depth_left - 1);
                let right = self.grow(&right_idx, depth_left - 1);
                self.nodes[slot] = Node::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left,
                    right,
                };
                slot
            }
        }
    }

    fn push_leaf(&mut self, counts: Vec<u32>) -> usize {
        self.nodes.push(Node::Leaf { counts });
        self.nodes.len() - 1
    }

    /// Candidate features for one split, ascending. Subsampling draws
    /// without replacement from the fitter's seeded stream.
    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.train.num_features();
        match self.sampling {
            FeatureSampling::All => (0..d).collect(),
            FeatureSampling::Subsample(m) => {
                let m = m.min(d);
                let mut chosen = rand::seq::index::sample(&mut self.rng, d, m).into_vec();
                chosen.sort_unstable();
                chosen
            }
        }
    }

    fn best_split(&mut self, indices: &[usize], parent_impurity: f64) -> Option<BestSplit> {
        let num_classes = self.train.num_classes();
        let total = indices.len();
        let mut best: Option<BestSplit> = None;
        // Iterating features ascending and thresholds ascending, and
        // replacing only on strict improvement, implements the tie rule
        // (lowest feature, then lowest threshold).
        for feature in self.candidate_features() {
            let mut values: Vec<(f64, usize)> = indices
                .iter()
                .map(|&i| {
                    let s = &self.train.samples()[i];
                    (s.features[feature], s.label)
                })
                .collect();
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));

            let mut left_counts = vec![0u32; num_classes];
            let mut right_counts = self.class_counts(indices);
            let mut left_total = 0usize;
            for window in 0..total - 1 {
                let (value, label) = values[window];
                left_counts[label] += 1;
                right_counts[label] -= 1;
                left_total += 1;
                let next_value = values[window + 1].0;
                if next_value == value {
                    continue;
                }
                let threshold = value + (next_value - value) / 2.0;
                if threshold >= next_value {
                    // Adjacent floats can round the midpoint up onto the
                    // next value, which would desynchronize the evaluated
                    // counts from the actual partition; skip the candidate.
                    continue;
                }
                let right_total = total - left_total;
                let weighted = (left_total as f64 * gini(&left_counts, left_total as f64)
                    + right_total as f64 * gini(&right_counts, right_total as f64))
                    / total as f64;
                let improves = match &best {
                    None => weighted < parent_impurity - MIN_IMPURITY_DECREASE,
                    Some(b) => weighted < b.weighted_impurity,
                };
                if improves {
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        weighted_impurity: weighted,
                    });
                }
            }
        }
        best
    }
}

impl TreeModel {
    /// Number of nodes in the tree (splits + leaves).
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Depth of the tree: 0 for a single leaf.
    pub fn depth(&self) -> usize {
        fn depth_of(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + depth_of(nodes, *left).max(depth_of(nodes, *right))
                }
            }
        }
        depth_of(&self.nodes, 0)
    }
}

impl Classifier for TreeModel {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn num_features(&self) -> usize {
        self.num_features
    }

    fn predict_proba(&self, features: &[f64]) -> Result<ProbVector, ModelError> {
        check_dimensions(self.num_features, features)?;
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                Node::Leaf { counts } => {
                    let total: u32 = counts.iter().sum();
                    let probs = counts.iter().map(|&c| c as f64 / total as f64).collect();
                    return ProbVector::new(probs);
                }
            }
        }
    }
}
