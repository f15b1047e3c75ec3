//! Neural network models and their uncertainty variants.
//!
//! [`MlpModel`] is a small ReLU network trained with mini-batch Adam; its
//! clean softmax output is the plain neural baseline. [`EnsembleModel`]
//! averages several independently trained copies, and [`mcd_predict_proba`]
//! averages stochastic dropout passes of a single dropout-trained network.
//! All three expose probabilities through the [`Classifier`] trait.
//!
//! [`Classifier`]: crate::models::Classifier

mod ensemble;
mod mlp;

pub use ensemble::{
    ensemble_fit, ensemble_predict_proba, mcd_predict_proba, EnsembleModel, McdClassifier,
};
pub use mlp::{mlp_init, softmax, train, DropoutMode, MlpModel, TrainConfig, HIDDEN_SIZES};
