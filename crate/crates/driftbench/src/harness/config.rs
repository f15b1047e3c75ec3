//! Experiment configuration: data source, protocol parameters, and the
//! model roster with per-model hyperparameters.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::harness::HarnessError;
use crate::synth::SynthConfig;

/// Where the experiment's samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// One sparse-format file per batch, in batch order.
    LibsvmFiles {
        paths: Vec<PathBuf>,
        num_features: usize,
        num_classes: usize,
    },
    /// A single canonical CSV with a batch column.
    Csv { path: PathBuf },
    /// Generated stream; `seed` fixes the data independently of the
    /// experiment seeds.
    Synth { config: SynthConfig, seed: u64 },
}

/// Drift monitor parameters applied to every model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorParams {
    pub window_size: usize,
    pub sensitivity: f64,
}

impl Default for MonitorParams {
    fn default() -> Self {
        MonitorParams {
            window_size: 50,
            sensitivity: 3.0,
        }
    }
}

/// Optimizer settings shared by the neural model variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for TrainingParams {
    fn default() -> Self {
        TrainingParams {
            epochs: 50,
            learning_rate: 1e-3,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    #[default]
    Rbf,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub regularization: f64,
    pub kernel: KernelChoice,
    /// RBF width; `None` scales it from the data as `1 / (D * variance)`.
    pub gamma: Option<f64>,
    pub tolerance: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            regularization: 1.0,
            kernel: KernelChoice::Rbf,
            gamma: None,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub num_trees: usize,
    pub max_depth: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            num_trees: 100,
            max_depth: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct NeuralParams {
    #[serde(flatten)]
    pub training: TrainingParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralEnsembleParams {
    pub members: usize,
    #[serde(flatten)]
    pub training: TrainingParams,
}

impl Default for NeuralEnsembleParams {
    fn default() -> Self {
        NeuralEnsembleParams {
            members: 10,
            training: TrainingParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralMcdParams {
    pub dropout: f64,
    pub passes: usize,
    #[serde(flatten)]
    pub training: TrainingParams,
}

impl Default for NeuralMcdParams {
    fn default() -> Self {
        NeuralMcdParams {
            dropout: 0.2,
            passes: 20,
            training: TrainingParams::default(),
        }
    }
}

/// One roster entry: which model family to fit and with which
/// hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Svm(SvmParams),
    DecisionTree(TreeParams),
    Knn(KnnParams),
    RandomForest(ForestParams),
    Neural(NeuralParams),
    NeuralEnsemble(NeuralEnsembleParams),
    NeuralMcd(NeuralMcdParams),
}

impl ModelSpec {
    /// Short display name used in result cells, reports, and CLI roster
    /// selection.
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Svm(_) => "svm",
            ModelSpec::DecisionTree(_) => "dt",
            ModelSpec::Knn(_) => "knn",
            ModelSpec::RandomForest(_) => "rf",
            ModelSpec::Neural(_) => "nn",
            ModelSpec::NeuralEnsemble(_) => "nn-ens",
            ModelSpec::NeuralMcd(_) => "nn-mcd",
        }
    }

    /// Stable tag mixed into this model's fit-seed derivation, so adding
    /// or removing roster entries never changes another model's stream.
    pub(crate) fn id(&self) -> u64 {
        match self {
            ModelSpec::Svm(_) => 1,
            ModelSpec::DecisionTree(_) => 2,
            ModelSpec::Knn(_) => 3,
            ModelSpec::RandomForest(_) => 4,
            ModelSpec::Neural(_) => 5,
            ModelSpec::NeuralEnsemble(_) => 6,
            ModelSpec::NeuralMcd(_) => 7,
        }
    }

    /// The default roster: every model family with its default
    /// hyperparameters, in canonical order.
    pub fn default_roster() -> Vec<ModelSpec> {
        vec![
            ModelSpec::Svm(SvmParams::default()),
            ModelSpec::DecisionTree(TreeParams::default()),
            ModelSpec::Knn(KnnParams::default()),
            ModelSpec::RandomForest(ForestParams::default()),
            ModelSpec::Neural(NeuralParams::default()),
            ModelSpec::NeuralEnsemble(NeuralEnsembleParams::default()),
            ModelSpec::NeuralMcd(NeuralMcdParams::default()),
        ]
    }

    /// Returns a copy with one named hyperparameter replaced; used by the
    /// grid search. Integer-valued parameters require an integral value.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<ModelSpec, HarnessError> {
        if !value.is_finite() {
            return Err(HarnessError::Config(format!(
                "hyperparameter {name} must be finite, got {value}"
            )));
        }
        let as_count = |value: f64| -> Result<usize, HarnessError> {
            if value.fract() != 0.0 || value < 0.0 || value > usize::MAX as f64 {
                return Err(HarnessError::Config(format!(
                    "hyperparameter {name} must be a non-negative integer, got {value}"
                )));
            }
            Ok(value as usize)
        };
        let mut spec = self.clone();
        match (&mut spec, name) {
            (ModelSpec::Svm(p), "regularization") => p.regularization = value,
            (ModelSpec::Svm(p), "gamma") => p.gamma = Some(value),
            (ModelSpec::Svm(p), "tolerance") => p.tolerance = value,
            (ModelSpec::DecisionTree(p), "max_depth") => p.max_depth = as_count(value)?,
            (ModelSpec::Knn(p), "k") => p.k = as_count(value)?,
            (ModelSpec::RandomForest(p), "num_trees") => p.num_trees = as_count(value)?,
            (ModelSpec::RandomForest(p), "max_depth") => p.max_depth = as_count(value)?,
            (ModelSpec::Neural(p), "epochs") => p.training.epochs = as_count(value)?,
            (ModelSpec::Neural(p), "learning_rate") => p.training.learning_rate = value,
            (ModelSpec::Neural(p), "batch_size") => p.training.batch_size = as_count(value)?,
            (ModelSpec::NeuralEnsemble(p), "members") => p.members = as_count(value)?,
            (ModelSpec::NeuralEnsemble(p), "epochs") => p.training.epochs = as_count(value)?,
            (ModelSpec::NeuralEnsemble(p), "learning_rate") => p.training.learning_rate = value,
            (ModelSpec::NeuralEnsemble(p), "batch_size") => {
                p.training.batch_size = as_count(value)?
            }
            (ModelSpec::NeuralMcd(p), "dropout") => p.dropout = value,
            (ModelSpec::NeuralMcd(p), "passes") => p.passes = as_count(value)?,
            (ModelSpec::NeuralMcd(p), "epochs") => p.training.epochs = as_count(value)?,
            (ModelSpec::NeuralMcd(p), "learning_rate") => p.training.learning_rate = value,
            (ModelSpec::NeuralMcd(p), "batch_size") => p.training.batch_size = as_count(value)?,
            _ => {
                return Err(HarnessError::Config(format!(
                    "model {} has no hyperparameter named {name}",
                    self.name()
                )))
            }
        }
        Ok(spec)
    }

    /// Hyperparameter sanity checks, surfaced as configuration errors
    /// before any fitting starts.
    fn validate(&self) -> Result<(), HarnessError> {
        let bad = |message: String| Err(HarnessError::Config(message));
        let check_training = |name: &str, t: &TrainingParams| -> Result<(), HarnessError> {
            if t.epochs == 0 {
                return bad(format!("{name}: epochs must be at least 1"));
            }
            if t.batch_size == 0 {
                return bad(format!("{name}: batch_size must be at least 1"));
            }
            if !(t.learning_rate >= 0.0 && t.learning_rate.is_finite()) {
                return bad(format!(
                    "{name}: learning_rate must be finite and >= 0, got {}",
                    t.learning_rate
                ));
            }
            Ok(())
        };
        match self {
            ModelSpec::Svm(p) => {
                if !(p.regularization > 0.0 && p.regularization.is_finite()) {
                    return bad(format!(
                        "svm: regularization must be positive, got {}",
                        p.regularization
                    ));
                }
                if !(p.tolerance > 0.0 && p.tolerance.is_finite()) {
                    return bad(format!("svm: tolerance must be positive, got {}", p.tolerance));
                }
                if let Some(gamma) = p.gamma {
                    if !(gamma > 0.0 && gamma.is_finite()) {
                        return bad(format!("svm: gamma must be positive, got {gamma}"));
                    }
                }
            }
            ModelSpec::DecisionTree(_) => {}
            ModelSpec::Knn(p) => {
                if p.k == 0 {
                    return bad("knn: k must be at least 1".to_string());
                }
            }
            ModelSpec::RandomForest(p) => {
                if p.num_trees == 0 {
                    return bad("rf: num_trees must be at least 1".to_string());
                }
            }
            ModelSpec::Neural(p) => check_training("nn", &p.training)?,
            ModelSpec::NeuralEnsemble(p) => {
                if p.members == 0 {
                    return bad("nn-ens: members must be at least 1".to_string());
                }
                check_training("nn-ens", &p.training)?;
            }
            ModelSpec::NeuralMcd(p) => {
                if !(0.0..1.0).contains(&p.dropout) {
                    return bad(format!("nn-mcd: dropout must be in [0, 1), got {}", p.dropout));
                }
                if p.passes == 0 {
                    return bad("nn-mcd: passes must be at least 1".to_string());
                }
                check_training("nn-mcd", &p.training)?;
            }
        }
        Ok(())
    }
}

/// Everything a run needs: data, protocol, roster, and scoring knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Batch ids whose pooled samples are shuffle-split into train and
    /// validation; all other batches are held out whole.
    #[serde(default = "default_train_batches")]
    pub train_batches: Vec<usize>,
    /// Fraction of the pooled training batches that becomes the train
    /// set, strictly inside (0, 1).
    #[serde(default = "default_split_fraction")]
    pub split_fraction: f64,
    pub seeds: Vec<u64>,
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_ece_bins")]
    pub ece_bins: usize,
    #[serde(default)]
    pub monitor: MonitorParams,
}

fn default_train_batches() -> Vec<usize> {
    vec![0, 1]
}

fn default_split_fraction() -> f64 {
    0.5
}

fn default_ece_bins() -> usize {
    10
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |message: String| Err(HarnessError::Config(message));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".to_string());
        }
        let mut seen_seeds = self.seeds.clone();
        seen_seeds.sort_unstable();
        seen_seeds.dedup();
        if seen_seeds.len() != self.seeds.len() {
            return bad("seeds must be distinct".to_string());
        }
        if self.models.is_empty() {
            return bad("the model roster must not be empty".to_string());
        }
        let mut names: Vec<&str> = self.models.iter().map(|m| m.name()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.models.len() {
            return bad("each model family may appear at most once in the roster".to_string());
        }
        for model in &self.models {
            model.validate()?;
        }
        if self.train_batches.is_empty() {
            return bad("train_batches must not be empty".to_string());
        }
        let mut batches = self.train_batches.clone();
        batches.sort_unstable();
        batches.dedup();
        if batches.len() != self.train_batches.len() {
            return bad("train_batches must be distinct".to_string());
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!(
                "split_fraction must be strictly inside (0, 1), got {}",
                self.split_fraction
            ));
        }
        if self.ece_bins == 0 {
            return bad("ece_bins must be at least 1".to_string());
        }
        if self.monitor.window_size == 0 {
            return bad("monitor window_size must be at least 1".to_string());
        }
        if !(self.monitor.sensitivity >= 0.0 && self.monitor.sensitivity.is_finite()) {
            return bad(format!(
                "monitor sensitivity must be finite and >= 0, got {}",
                self.monitor.sensitivity
            ));
        }
        if let DataSource::Synth { config, .. } = &self.data {
            config
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }
}
