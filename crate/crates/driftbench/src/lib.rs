//! Benchmark toolkit for measuring how probabilistic classifiers degrade —
//! in accuracy and in confidence calibration — when the data they score
//! drifts away from the data they were trained on.
//!
//! The crate provides:
//!
//! - dataset loading (libsvm and CSV formats), standardization, and the
//!   temporal train/validation/test split used throughout ([`data`]);
//! - a synthetic drift-stream generator with controllable sensor gain decay
//!   and offset drift ([`synth`]);
//! - seven from-scratch classifiers that all expose class-probability
//!   outputs: k-nearest neighbors, a CART decision tree, a random forest
//!   ([`models`]), an RBF/linear SVM with one-vs-rest Platt calibration
//!   ([`svm`]), and an MLP with softmax confidence, deep ensembling, and
//!   Monte-Carlo dropout ([`neural`]);
//! - accuracy, mean-confidence, and expected-calibration-error metrics
//!   ([`metrics`]);
//! - a confidence-based drift monitor ([`drift`]);
//! - an experiment harness that runs the full model × seed × batch grid and
//!   serializes results deterministically ([`harness`]).
//!
//! Everything is driven by explicit `u64` seeds (see [`seeds`]); two runs of
//! the same configuration produce byte-identical result files.

pub mod data;
pub mod drift;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod neural;
pub mod seeds;
pub mod svm;
pub mod synth;

pub use models::{Classifier, ModelError, ProbVector};
