//! Fitting dispatch: turn a [`ModelSpec`] plus a derived seed into a
//! concrete fitted model, behind one serializable sum type.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::harness::config::{KernelChoice, ModelSpec};
use crate::harness::HarnessError;
use crate::models::{dt_fit, knn_fit, rf_fit_with, Classifier, ForestConfig, ModelError};
use crate::models::{ForestModel, KnnModel, ProbVector, TreeModel};
use crate::neural::{
    ensemble_fit, mlp_init, train, EnsembleModel, McdClassifier, MlpModel, TrainConfig,
};
use crate::seeds;
use crate::svm::{rbf_scale_gamma, svm_fit_multiclass, Kernel, MulticlassSvmModel};

/// Any fitted roster model. One enum rather than trait objects so results
/// can be serialized, compared, and reloaded.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FittedModel {
    Svm(MulticlassSvmModel),
    DecisionTree(TreeModel),
    Knn(KnnModel),
    RandomForest(ForestModel),
    Neural(MlpModel),
    NeuralEnsemble(EnsembleModel),
    NeuralMcd(McdClassifier),
}

macro_rules! dispatch {
    ($self:expr, $inner:ident => $body:expr) => {
        match $self {
            FittedModel::Svm($inner) => $body,
            FittedModel::DecisionTree($inner) => $body,
            FittedModel::Knn($inner) => $body,
            FittedModel::RandomForest($inner) => $body,
            FittedModel::Neural($inner) => $body,
            FittedModel::NeuralEnsemble($inner) => $body,
            FittedModel::NeuralMcd($inner) => $body,
        }
    };
}

impl Classifier for FittedModel {
    fn num_classes(&self) -> usize {
        dispatch!(self, m => m.num_classes())
    }

    fn num_features(&self) -> usize {
        dispatch!(self, m => m.num_features())
    }

    fn predict_proba(&self, features: &[f64]) -> Result<ProbVector, ModelError> {
        dispatch!(self, m => m.predict_proba(features))
    }
}

impl ModelSpec {
    /// Fits this specification on `train`. All model-internal randomness
    /// (weight init, bootstraps, folds, shuffling, dropout) flows from
    /// `seed` through documented derived streams.
    pub fn fit(&self, train: &Dataset, seed: u64) -> Result<FittedModel, ModelError> {
        let train_config = |training: &crate::harness::config::TrainingParams| TrainConfig {
            epochs: training.epochs,
            learning_rate: training.learning_rate,
            batch_size: training.batch_size,
            seed,
            ..TrainConfig::default()
        };
        Ok(match self {
            ModelSpec::Svm(p) => {
                let kernel = match p.kernel {
                    KernelChoice::Linear => Kernel::Linear,
                    KernelChoice::Rbf => Kernel::Rbf {
                        gamma: p.gamma.unwrap_or_else(|| rbf_scale_gamma(train)),
                    },
                };
                FittedModel::Svm(svm_fit_multiclass(
                    train,
                    kernel,
                    p.regularization,
                    p.tolerance,
                    seed,
                )?)
            }
            ModelSpec::DecisionTree(p) => FittedModel::DecisionTree(dt_fit(train, p.max_depth, seed)?),
            ModelSpec::Knn(p) => FittedModel::Knn(knn_fit(train, p.k)?),
            ModelSpec::RandomForest(p) => FittedModel::RandomForest(rf_fit_with(
                train,
                &ForestConfig {
                    num_trees: p.num_trees,
                    max_depth: p.max_depth,
                    ..ForestConfig::default()
                },
                seed,
            )?),
            ModelSpec::Neural(p) => {
                let model = mlp_init(
                    train.num_features(),
                    train.num_classes(),
                    seeds::derive(seed, &[seeds::tag::INIT]),
                );
                FittedModel::Neural(train_mlp(model, train, &train_config(&p.training))?)
            }
            ModelSpec::NeuralEnsemble(p) => FittedModel::NeuralEnsemble(ensemble_fit(
                train,
                p.members,
                &train_config(&p.training),
            )?),
            ModelSpec::NeuralMcd(p) => {
                let model = mlp_init(
                    train.num_features(),
                    train.num_classes(),
                    seeds::derive(seed, &[seeds::tag::INIT]),
                )
                .with_dropout(p.dropout)?;
                let trained = train_mlp(model, train, &train_config(&p.training))?;
                FittedModel::NeuralMcd(McdClassifier {
                    model: trained,
                    passes: p.passes,
                    seed,
                })
            }
        })
    }
}

fn train_mlp(
    model: MlpModel,
    data: &Dataset,
    config: &TrainConfig,
) -> Result<MlpModel, ModelError> {
    train(model, data, config)
}

/// Version-stamped envelope for persisted models.
#[derive(Debug, Serialize, Deserialize)]
struct SavedModel {
    version: String,
    model: FittedModel,
}

/// Writes the model as version-stamped JSON.
pub fn save_model(model: &FittedModel, path: &Path) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = BufWriter::new(file);
    let envelope = SavedModel {
        version: env!("CARGO_PKG_VERSION").to_string(),
        model: model.clone(),
    };
    serde_json::to_writer(&mut writer, &envelope)?;
    writer.write_all(b"\n").map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Reads a model saved by [`save_model`], refusing envelopes written by a
/// different build.
pub fn load_model(path: &Path) -> Result<FittedModel, HarnessError> {
    let file = File::open(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let envelope: SavedModel = serde_json::from_reader(BufReader::new(file))?;
    let expected = env!("CARGO_PKG_VERSION");
    if envelope.version != expected {
        return Err(HarnessError::ModelVersion {
            found: envelope.version,
            expected: expected.to_string(),
        });
    }
    Ok(envelope.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use crate::harness::config::{KnnParams, NeuralMcdParams, TrainingParams, TreeParams};
    use rand::Rng;

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = seeds::rng(seed, &[]);
        let samples: Vec<Sample> = (0..n)
            .map(|i| {
                let label = i % 2;
                let center = if label == 1 { 2.5 } else { -2.5 };
                Sample {
                    features: vec![
                        center + rng.random_range(-1.0..1.0),
                        center + rng.random_range(-1.0..1.0),
                    ],
                    label,
                    batch: 0,
                }
            })
            .collect();
        Dataset::from_parts(samples, 2, 2).unwrap()
    }

    #[test]
    fn every_family_fits_and_predicts_on_blobs() {
        let data = blobs(60, 3);
        let quick = TrainingParams {
            epochs: 5,
            ..TrainingParams::default()
        };
        let mut roster = ModelSpec::default_roster();
        for spec in &mut roster {
            match spec {
                ModelSpec::Neural(p) => p.training = quick.clone(),
                ModelSpec::NeuralEnsemble(p) => {
                    p.members = 2;
                    p.training = quick.clone();
                }
                ModelSpec::NeuralMcd(p) => {
                    p.passes = 4;
                    p.training = quick.clone();
                }
                _ => {}
            }
        }
        for spec in &roster {
            let model = spec.fit(&data, 11).unwrap();
            assert_eq!(model.num_classes(), 2, "{}", spec.name());
            assert_eq!(model.num_features(), 2, "{}", spec.name());
            let probs = model.predict_proba(&[1.0, 1.0]).unwrap();
            assert_eq!(probs.num_classes(), 2);
        }
    }

    #[test]
    fn fitting_is_deterministic_per_seed() {
        let data = blobs(40, 9);
        let spec = ModelSpec::NeuralMcd(NeuralMcdParams {
            passes: 3,
            training: TrainingParams {
                epochs: 4,
                ..TrainingParams::default()
            },
            ..NeuralMcdParams::default()
        });
        let a = spec.fit(&data, 21).unwrap();
        let b = spec.fit(&data, 21).unwrap();
        let x = [0.4, -0.4];
        assert_eq!(
            a.predict_proba(&x).unwrap().probs(),
            b.predict_proba(&x).unwrap().probs()
        );
    }

    #[test]
    fn fit_errors_surface() {
        let data = blobs(10, 1);
        let spec = ModelSpec::Knn(KnnParams { k: 100 });
        assert!(spec.fit(&data, 0).is_err(), "k larger than the dataset");
    }

    #[test]
    fn save_load_round_trip_preserves_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let data = blobs(40, 5);
        let model = ModelSpec::DecisionTree(TreeParams::default())
            .fit(&data, 7)
            .unwrap();
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        for x in [[0.0, 0.0], [2.0, 2.0], [-2.0, -1.0]] {
            assert_eq!(
                model.predict_proba(&x).unwrap().probs(),
                loaded.predict_proba(&x).unwrap().probs()
            );
        }
    }

    #[test]
    fn load_rejects_foreign_versions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let data = blobs(40, 5);
        let model = ModelSpec::Knn(KnnParams::default()).fit(&data, 7).unwrap();
        save_model(&model, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let tagged = concat!("\"version\":\"", env!("CARGO_PKG_VERSION"), "\"");
        assert!(text.contains(tagged));
        let swapped = text.replacen(tagged, "\"version\":\"0.0.0-other\"", 1);
        std::fs::write(&path, swapped).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(HarnessError::ModelVersion { .. })
        ));
    }
}
