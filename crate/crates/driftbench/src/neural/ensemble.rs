//! Uncertainty-aware wrappers around the MLP: deep ensembles (mean of
//! independently trained members) and Monte Carlo dropout (mean over
//! stochastic forward passes of one dropout-trained network).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::models::{Classifier, ModelError, ProbVector};
use crate::neural::mlp::{mlp_init, softmax, train, DropoutMode, MlpModel, TrainConfig};
use crate::seeds;

/// A bag of independently initialized and trained networks sharing one
/// architecture. Prediction averages the members' softmax outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    members: Vec<MlpModel>,
}

impl EnsembleModel {
    pub fn members(&self) -> &[MlpModel] {
        &self.members
    }
}

/// Trains `num_members` networks on the full training set (no bagging).
/// Member `i` derives its own seed from `(config.seed, MEMBER, i)`, which
/// in turn drives its weight initialization and its shuffle/dropout
/// streams, so members differ by initialization and data order only.
pub fn ensemble_fit(
    train_data: &Dataset,
    num_members: usize,
    config: &TrainConfig,
) -> Result<EnsembleModel, ModelError> {
    if num_members == 0 {
        return Err(ModelError::ParameterOutOfRange {
            name: "num_members",
            value: 0.0,
            range: "1..",
        });
    }
    let members: Vec<MlpModel> = (0..num_members)
        .into_par_iter()
        .map(|index| {
            let member_seed = seeds::derive(config.seed, &[seeds::tag::MEMBER, index as u64]);
            let model = mlp_init(
                train_data.num_features(),
                train_data.num_classes(),
                seeds::derive(member_seed, &[seeds::tag::INIT]),
            );
            let member_config = TrainConfig {
                seed: member_seed,
                ..config.clone()
            };
            train(model, train_data, &member_config)
        })
        .collect::<Result<_, _>>()?;
    Ok(EnsembleModel { members })
}

/// Arithmetic mean of the members' softmax outputs, in member order.
pub fn ensemble_predict_proba(
    ensemble: &EnsembleModel,
    features: &[f64],
) -> Result<ProbVector, ModelError> {
    mean_probs(ensemble.members.iter(), |member| {
        softmax(&member.forward(features, DropoutMode::Off)?)
    })
}

impl Classifier for EnsembleModel {
    fn num_classes(&self) -> usize {
        self.members[0].num_classes()
    }

    fn num_features(&self) -> usize {
        self.members[0].num_features()
    }

    fn predict_proba(&self, features: &[f64]) -> Result<ProbVector, ModelError> {
        ensemble_predict_proba(self, features)
    }
}

/// Mean softmax over `passes` dropout-active forward passes. Pass `i`
/// draws its masks from the stream derived from `(seed, PASS, i)`. When
/// the model's dropout rate is zero every pass is the same deterministic
/// computation, so the result equals a single clean pass exactly.
pub fn mcd_predict_proba(
    model: &MlpModel,
    features: &[f64],
    passes: usize,
    seed: u64,
) -> Result<ProbVector, ModelError> {
    if passes == 0 {
        return Err(ModelError::ParameterOutOfRange {
            name: "passes",
            value: 0.0,
            range: "1..",
        });
    }
    if model.dropout_rate() == 0.0 {
        return softmax(&model.forward(features, DropoutMode::Off)?);
    }
    mean_probs(0..passes, |index| {
        let pass_seed = seeds::derive(seed, &[seeds::tag::PASS, index as u64]);
        softmax(&model.forward(features, DropoutMode::Seeded(pass_seed))?)
    })
}

/// Monte Carlo dropout as a [`Classifier`]: a dropout-trained network
/// plus the pass count and mask seed its predictions average over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McdClassifier {
    pub model: MlpModel,
    pub passes: usize,
    pub seed: u64,
}

impl Classifier for McdClassifier {
    fn num_classes(&self) -> usize {
        self.model.num_classes()
    }

    fn num_features(&self) -> usize {
        self.model.num_features()
    }

    fn predict_proba(&self, features: &[f64]) -> Result<ProbVector, ModelError> {
        mcd_predict_proba(&self.model, features, self.passes, self.seed)
    }
}

/// Averages the probability vectors produced by `predict` over `items`,
/// accumulating in iteration order.
fn mean_probs<I, T>(
    items: I,
    mut predict: impl FnMut(T) -> Result<ProbVector, ModelError>,
) -> Result<ProbVector, ModelError>
where
    I: IntoIterator<Item = T>,
{
    let mut sum: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for item in items {
        let probs = predict(item)?;
        if sum.is_empty() {
            sum = vec![0.0; probs.num_classes()];
        }
        for (slot, &p) in sum.iter_mut().zip(probs.probs()) {
            *slot += p;
        }
        count += 1;
    }
    let scale = 1.0 / count as f64;
    ProbVector::new(sum.into_iter().map(|s| s * scale).collect())
}
