//! Result cells and their cross-seed aggregation.

use serde::{Deserialize, Serialize};

use crate::harness::HarnessError;

/// Mean and population standard deviation of one metric across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatPair {
    pub mean: f64,
    pub std: f64,
}

impl StatPair {
    fn over(values: &[f64]) -> StatPair {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        StatPair {
            mean,
            std: variance.sqrt(),
        }
    }
}

/// The three scores shared by every evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub accuracy: f64,
    pub mean_confidence: f64,
    pub ece: f64,
}

/// One point of the result grid: a model, a seed, and one evaluation set
/// ("val" or "batchN"). A failed fit or evaluation leaves `metrics`
/// empty and records the reason — failures are first-class, not dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub model: String,
    pub seed: u64,
    pub set: String,
    pub metrics: Option<CellMetrics>,
    pub error: Option<String>,
}

impl MetricCell {
    pub fn failed(model: &str, seed: u64, set: &str, error: String) -> MetricCell {
        MetricCell {
            model: model.to_string(),
            seed,
            set: set.to_string(),
            metrics: None,
            error: Some(error),
        }
    }
}

/// Cross-seed summary for one (model, set) pair. `seeds_used` counts the
/// successful cells the statistics were computed from; metrics are absent
/// when every seed failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub model: String,
    pub set: String,
    pub seeds_used: usize,
    pub accuracy: Option<StatPair>,
    pub mean_confidence: Option<StatPair>,
    pub ece: Option<StatPair>,
}

/// Drifted-data summary for one (model, seed): all held-out batches
/// pooled into one record set, plus the per-batch mean of the
/// calibration error (each batch weighted equally).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftedCell {
    pub model: String,
    pub seed: u64,
    pub pooled: Option<CellMetrics>,
    pub ece_batch_mean: Option<f64>,
    pub error: Option<String>,
}

/// Cross-seed summary of the drifted-data cells for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftedAggregate {
    pub model: String,
    pub seeds_used: usize,
    pub accuracy: Option<StatPair>,
    pub mean_confidence: Option<StatPair>,
    pub ece_pooled: Option<StatPair>,
    pub ece_batch_mean: Option<StatPair>,
}

/// Checks grid completeness, then reduces cells to per-(model, set)
/// means and population standard deviations over the successful seeds.
/// Output order follows first appearance in `cells`.
pub fn aggregate_seeds(cells: &[MetricCell]) -> Result<Vec<AggregateCell>, HarnessError> {
    let mut groups: Vec<((String, String), Vec<&MetricCell>)> = Vec::new();
    for cell in cells {
        let key = (cell.model.clone(), cell.set.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(cell),
            None => groups.push((key, vec![cell])),
        }
    }
    if groups.is_empty() {
        return Err(HarnessError::IncompleteGrid("no cells to aggregate".to_string()));
    }
    let expected = groups[0].1.len();
    for ((model, set), members) in &groups {
        if members.len() != expected {
            return Err(HarnessError::IncompleteGrid(format!(
                "({model}, {set}) has {} cells, expected {expected}",
                members.len()
            )));
        }
        let mut seeds: Vec<u64> = members.iter().map(|c| c.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != members.len() {
            return Err(HarnessError::IncompleteGrid(format!(
                "({model}, {set}) contains duplicate seeds"
            )));
        }
    }

    Ok(groups
        .into_iter()
        .map(|((model, set), members)| {
            let ok: Vec<&CellMetrics> =
                members.iter().filter_map(|c| c.metrics.as_ref()).collect();
            let stat = |select: fn(&CellMetrics) -> f64| -> Option<StatPair> {
                if ok.is_empty() {
                    None
                } else {
                    Some(StatPair::over(
                        &ok.iter().map(|m| select(m)).collect::<Vec<f64>>(),
                    ))
                }
            };
            AggregateCell {
                model,
                set,
                seeds_used: ok.len(),
                accuracy: stat(|m| m.accuracy),
                mean_confidence: stat(|m| m.mean_confidence),
                ece: stat(|m| m.ece),
            }
        })
        .collect())
}

/// Reduces drifted cells to per-model statistics, in first-appearance
/// order. Seeds whose evaluation failed are excluded and counted out of
/// `seeds_used`.
pub fn aggregate_drifted(cells: &[DriftedCell]) -> Vec<DriftedAggregate> {
    let mut order: Vec<String> = Vec::new();
    for cell in cells {
        if !order.contains(&cell.model) {
            order.push(cell.model.clone());
        }
    }
    order
        .into_iter()
        .map(|model| {
            let mine: Vec<&DriftedCell> = cells.iter().filter(|c| c.model == model).collect();
            let pooled: Vec<&CellMetrics> = mine.iter().filter_map(|c| c.pooled.as_ref()).collect();
            let batch_means: Vec<f64> = mine.iter().filter_map(|c| c.ece_batch_mean).collect();
            let stat = |select: fn(&CellMetrics) -> f64| -> Option<StatPair> {
                if pooled.is_empty() {
                    None
                } else {
                    Some(StatPair::over(
                        &pooled.iter().map(|m| select(m)).collect::<Vec<f64>>(),
                    ))
                }
            };
            DriftedAggregate {
                model,
                seeds_used: pooled.len(),
                accuracy: stat(|m| m.accuracy),
                mean_confidence: stat(|m| m.mean_confidence),
                ece_pooled: stat(|m| m.ece),
                ece_batch_mean: if batch_means.is_empty() {
                    None
                } else {
                    Some(StatPair::over(&batch_means))
                },
            }
        })
        .collect()
}
