//! Confidence-baseline drift monitor.
//!
//! The monitor learns what "healthy" confidence looks like from a
//! validation set, then watches a stream of per-sample confidences
//! through a fixed-size ring window. Once the window is full, it raises
//! an alarm whenever the window mean falls more than `k` baseline
//! deviations below the baseline mean. Alarms are per-update: a window
//! that recovers goes back to ok.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower bound on the baseline deviation used in the threshold, so a
/// zero-variance baseline cannot make every dip alarm.
pub const SIGMA_FLOOR: f64 = 1e-3;

/// Slack accepted outside `[0, 1]` before a confidence is rejected;
/// values within it are clamped.
const CONFIDENCE_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("baseline requires at least 2 validation confidences, got {found}")]
    TooFewConfidences { found: usize },
    #[error("window_size must be at least 1")]
    InvalidWindowSize,
    #[error("sensitivity k must be finite and >= 0, got {value}")]
    InvalidSensitivity { value: f64 },
    #[error("confidence {value} is outside [0, 1]")]
    ConfidenceOutOfRange { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorStatus {
    /// The window has not filled yet; no judgment is made.
    Warmup,
    Ok,
    Alarm,
}

/// One monitored sample, as recorded in experiment output streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub sample_index: usize,
    /// Window mean at this update; absent during warmup.
    pub window_mean: Option<f64>,
    pub threshold: f64,
    pub status: MonitorStatus,
}

/// The monitor's full state: baseline statistics plus the ring window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorState {
    baseline_mean: f64,
    baseline_std: f64,
    window_size: usize,
    k: f64,
    window: VecDeque<f64>,
    status: MonitorStatus,
}

/// Fits the baseline (mean and population standard deviation) on
/// validation confidences and returns a monitor in warmup.
pub fn monitor_init(
    validation_confidences: &[f64],
    window_size: usize,
    k: f64,
) -> Result<MonitorState, MonitorError> {
    if validation_confidences.len() < 2 {
        return Err(MonitorError::TooFewConfidences {
            found: validation_confidences.len(),
        });
    }
    if window_size == 0 {
        return Err(MonitorError::InvalidWindowSize);
    }
    if !(k >= 0.0 && k.is_finite()) {
        return Err(MonitorError::InvalidSensitivity { value: k });
    }
    let confidences: Vec<f64> = validation_confidences
        .iter()
        .map(|&c| clamp_confidence(c))
        .collect::<Result<_, _>>()?;
    let n = confidences.len() as f64;
    let mean = confidences.iter().sum::<f64>() / n;
    let variance = confidences.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    Ok(MonitorState {
        baseline_mean: mean,
        baseline_std: variance.sqrt(),
        window_size,
        k,
        window: VecDeque::with_capacity(window_size),
        status: MonitorStatus::Warmup,
    })
}

fn clamp_confidence(value: f64) -> Result<f64, MonitorError> {
    if !(-CONFIDENCE_SLACK..=1.0 + CONFIDENCE_SLACK).contains(&value) {
        return Err(MonitorError::ConfidenceOutOfRange { value });
    }
    Ok(value.clamp(0.0, 1.0))
}

impl MonitorState {
    /// Pushes one confidence (evicting the oldest when the window is
    /// full) and returns the resulting status: warmup until the window
    /// has filled, then alarm iff the window mean is below
    /// [`threshold`](Self::threshold).
    pub fn update(&mut self, confidence: f64) -> Result<MonitorStatus, MonitorError> {
        let confidence = clamp_confidence(confidence)?;
        if self.window.len() == self.window_size {
            self.window.pop_front();
        }
        self.window.push_back(confidence);
        self.status = if self.window.len() < self.window_size {
            MonitorStatus::Warmup
        } else if self.window_mean().expect("window is full") < self.threshold() {
            MonitorStatus::Alarm
        } else {
            MonitorStatus::Ok
        };
        Ok(self.status)
    }

    /// `baseline_mean - k * max(baseline_std, SIGMA_FLOOR)`.
    pub fn threshold(&self) -> f64 {
        self.baseline_mean - self.k * self.baseline_std.max(SIGMA_FLOOR)
    }

    /// Mean of the current window contents; `None` while empty.
    pub fn window_mean(&self) -> Option<f64> {
        if self.window.is_empty() {
            None
        } else {
            Some(self.window.iter().sum::<f64>() / self.window.len() as f64)
        }
    }

    pub fn status(&self) -> MonitorStatus {
        self.status
    }

    pub fn baseline_mean(&self) -> f64 {
        self.baseline_mean
    }

    pub fn baseline_std(&self) -> f64 {
        self.baseline_std
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn sensitivity(&self) -> f64 {
        self.k
    }
}
