//! Synthetic classification streams with controlled sensor drift.
//!
//! Each class draws from an isotropic Gaussian whose mean sits at a scaled
//! one-hot corner. A batch-indexed degradation then distorts what the
//! "sensor" reports: batch `t` multiplies the physical reading by
//! `(1 - gain_decay_per_batch)^t` and adds `t * offset_drift_per_batch`,
//! feature-wise. Labels are the generating class, with uniform priors per
//! batch. The stream is a pure function of `(config, seed)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset, Sample};
use crate::seeds;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("synth config: {name} = {value} must be {requirement}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Shape and drift parameters of a generated stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub num_features: usize,
    pub samples_per_batch: usize,
    pub num_batches: usize,
    /// Scale of the one-hot class-mean corners.
    pub class_separation: f64,
    /// Fraction of sensor gain lost per batch, in `[0, 1]`.
    pub gain_decay_per_batch: f64,
    /// Additive shift accumulated per batch.
    pub offset_drift_per_batch: f64,
    /// Standard deviation of the isotropic Gaussian noise, `> 0`.
    pub noise_deviation: f64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let counts = [
            ("num_classes", self.num_classes),
            ("num_features", self.num_features),
            ("samples_per_batch", self.samples_per_batch),
            ("num_batches", self.num_batches),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(SynthError::InvalidParameter {
                    name,
                    value: 0.0,
                    requirement: "at least 1",
                });
            }
        }
        if !(self.noise_deviation > 0.0 && self.noise_deviation.is_finite()) {
            return Err(SynthError::InvalidParameter {
                name: "noise_deviation",
                value: self.noise_deviation,
                requirement: "finite and > 0",
            });
        }
        if !(0.0..=1.0).contains(&self.gain_decay_per_batch) {
            return Err(SynthError::InvalidParameter {
                name: "gain_decay_per_batch",
                value: self.gain_decay_per_batch,
                requirement: "in [0, 1]",
            });
        }
        if !self.class_separation.is_finite() {
            return Err(SynthError::InvalidParameter {
                name: "class_separation",
                value: self.class_separation,
                requirement: "finite",
            });
        }
        if !self.offset_drift_per_batch.is_finite() {
            return Err(SynthError::InvalidParameter {
                name: "offset_drift_per_batch",
                value: self.offset_drift_per_batch,
                requirement: "finite",
            });
        }
        Ok(())
    }

    /// Mean of class `c` before any degradation:
    /// `class_separation * e_(c mod num_features)`.
    pub fn class_mean(&self, class: usize) -> Vec<f64> {
        let mut mean = vec![0.0; self.num_features];
        mean[class % self.num_features] = self.class_separation;
        mean
    }
}

/// Generates the full stream. Within each batch, labels cycle through the
/// classes (`sample i` gets class `i mod C`), so per-batch class counts
/// differ by at most one. Each batch draws from its own derived stream,
/// so the content of batch `t` does not depend on the other batches.
pub fn generate_drift_stream(config: &SynthConfig, seed: u64) -> Result<Dataset, SynthError> {
    config.validate()?;
    let mut samples = Vec::with_capacity(config.samples_per_batch * config.num_batches);
    for batch in 0..config.num_batches {
        let gain = (1.0 - config.gain_decay_per_batch).powi(batch as i32);
        let offset = batch as f64 * config.offset_drift_per_batch;
        let mut rng = seeds::rng(seed, &[seeds::tag::SYNTH, batch as u64]);
        for index in 0..config.samples_per_batch {
            let label = index % config.num_classes;
            let mean = config.class_mean(label);
            let features = mean
                .into_iter()
                .map(|mu| {
                    let noise: f64 = rng.sample(StandardNormal);
                    gain * (mu + config.noise_deviation * noise) + offset
                })
                .collect();
            samples.push(Sample {
                features,
                label,
                batch,
            });
        }
    }
    Ok(Dataset::from_parts(
        samples,
        config.num_features,
        config.num_classes,
    )?)
}
