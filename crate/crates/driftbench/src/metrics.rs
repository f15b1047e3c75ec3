//! Accuracy, mean confidence, and expected calibration error.
//!
//! All metrics consume [`PredictionRecord`]s — a predicted class
//! distribution paired with the true label. Confidence is the maximum
//! probability; a model is well calibrated when, among predictions made
//! with confidence near `c`, a fraction near `c` is correct. ECE quantifies
//! the gap: confidences are histogrammed into `num_bins` equal-width bins
//! over [0, 1] and the bin-weighted absolute differences between accuracy
//! and mean confidence are summed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::ProbVector;

/// Errors from metric computation.
#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no prediction records")]
    EmptyRecords,
    #[error("number of bins must be at least 1")]
    InvalidBinCount,
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
}

/// One scored prediction: the model's class distribution and the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub probs: ProbVector,
    pub label: usize,
}

impl PredictionRecord {
    /// Pairs a distribution with its true label (which must be in range).
    pub fn new(probs: ProbVector, label: usize) -> Result<Self, MetricsError> {
        if label >= probs.num_classes() {
            return Err(MetricsError::LabelOutOfRange {
                label,
                num_classes: probs.num_classes(),
            });
        }
        Ok(PredictionRecord { probs, label })
    }

    pub fn is_correct(&self) -> bool {
        self.probs.argmax() == self.label
    }

    pub fn confidence(&self) -> f64 {
        self.probs.confidence()
    }
}

/// Fraction of records whose argmax equals the label.
pub fn accuracy(records: &[PredictionRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let correct = records.iter().filter(|r| r.is_correct()).count();
    Ok(correct as f64 / records.len() as f64)
}

/// Mean of the per-record confidences, accumulated in record order.
pub fn mean_confidence(records: &[PredictionRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let sum: f64 = records.iter().map(|r| r.confidence()).sum();
    Ok(sum / records.len() as f64)
}

/// One equal-width confidence bin of a calibration histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    /// Inclusive lower edge of the bin.
    pub lower: f64,
    /// Upper edge; records land here when `lower <= conf < upper`, except
    /// the last bin which also takes confidence exactly 1.
    pub upper: f64,
    pub count: usize,
    /// Fraction correct among records in the bin; 0 when empty.
    pub accuracy: f64,
    /// Mean confidence of records in the bin; 0 when empty.
    pub mean_confidence: f64,
}

/// Calibration summary for one set of predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub num_records: usize,
    pub accuracy: f64,
    pub mean_confidence: f64,
    /// Expected calibration error: `sum over bins of
    /// (count / n) * |bin accuracy - bin mean confidence|`.
    pub ece: f64,
    pub bins: Vec<CalibrationBin>,
}

impl CalibrationReport {
    /// Header for the scalar CSV row form, matching field declaration order.
    pub fn csv_header() -> &'static str {
        "num_records,accuracy,mean_confidence,ece"
    }

    /// Scalar fields as one CSV row (bins are JSON-only).
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.num_records, self.accuracy, self.mean_confidence, self.ece
        )
    }
}

/// Bin index for a confidence value: `floor(conf * num_bins)`, clamped so
/// confidence 1.0 stays in the last bin.
fn bin_index(confidence: f64, num_bins: usize) -> usize {
    ((confidence * num_bins as f64) as usize).min(num_bins - 1)
}

/// Computes the calibration report with `num_bins` equal-width bins.
///
/// Empty bins contribute zero to the ECE. With `num_bins = 1` the ECE
/// equals `|accuracy - mean_confidence|` exactly (identical summation
/// order, not merely within tolerance).
pub fn ece(records: &[PredictionRecord], num_bins: usize) -> Result<CalibrationReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    if num_bins == 0 {
        return Err(MetricsError::InvalidBinCount);
    }
    let n = records.len();
    let mut counts = vec![0usize; num_bins];
    let mut correct = vec![0usize; num_bins];
    let mut confidence_sums = vec![0.0f64; num_bins];
    for r in records {
        let c = r.confidence();
        let b = bin_index(c, num_bins);
        counts[b] += 1;
        confidence_sums[b] += c;
        if r.is_correct() {
            correct[b] += 1;
        }
    }
    let mut bins = Vec::with_capacity(num_bins);
    let mut ece_value = 0.0;
    for b in 0..num_bins {
        let (bin_accuracy, bin_confidence) = if counts[b] == 0 {
            (0.0, 0.0)
        } else {
            (
                correct[b] as f64 / counts[b] as f64,
                confidence_sums[b] / counts[b] as f64,
            )
        };
        if counts[b] > 0 {
            ece_value += counts[b] as f64 / n as f64 * (bin_accuracy - bin_confidence).abs();
        }
        bins.push(CalibrationBin {
            lower: b as f64 / num_bins as f64,
            upper: (b + 1) as f64 / num_bins as f64,
            count: counts[b],
            accuracy: bin_accuracy,
            mean_confidence: bin_confidence,
        });
    }
    Ok(CalibrationReport {
        num_records: n,
        accuracy: accuracy(records)?,
        mean_confidence: mean_confidence(records)?,
        ece: ece_value,
        bins,
    })
}
