//! Platt scaling: maps raw SVM decision values to probabilities through a
//! fitted sigmoid `P(y = 1 | f) = 1 / (1 + exp(A f + B))`.
//!
//! Parameters are fitted by minimizing the negative log-likelihood of
//! smoothed targets (`(N+ + 1) / (N+ + 2)` for positives,
//! `1 / (N- + 2)` for negatives — the standard out-of-sample correction)
//! with Newton's method plus backtracking line search. All sigmoid
//! evaluations branch on the sign of the exponent so nothing overflows.

use serde::{Deserialize, Serialize};

use crate::models::ModelError;

/// Fitted sigmoid parameters. A well-separated fit has `a < 0` (larger
/// decision values mean higher positive-class probability).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
}

/// Newton stops when the gradient norm drops below this.
const GRADIENT_TOLERANCE: f64 = 1e-8;

/// Maximum Newton iterations.
const MAX_ITERATIONS: usize = 100;

/// Hessian ridge term keeping the Newton system well posed.
const SIGMA: f64 = 1e-12;

/// Minimum backtracking step before the search gives up.
const MIN_STEP: f64 = 1e-10;

/// Applies the fitted sigmoid to a decision value.
///
/// Evaluation branches on the sign of `A f + B` so large magnitudes cannot
/// overflow: both branches compute `1 / (1 + exp(A f + B))` exactly.
pub fn platt_apply(params: &PlattParams, decision_value: f64) -> f64 {
    let f_apb = params.a * decision_value + params.b;
    if f_apb >= 0.0 {
        (-f_apb).exp() / (1.0 + (-f_apb).exp())
    } else {
        1.0 / (1.0 + f_apb.exp())
    }
}

/// Negative log-likelihood of the smoothed targets under `params`; the
/// quantity [`platt_fit`] minimizes, exposed for diagnostics.
pub fn platt_nll(params: &PlattParams, decision_values: &[f64], labels: &[bool]) -> f64 {
    let (t_pos, t_neg) = smoothed_targets(labels);
    let mut nll = 0.0;
    for (&f, &positive) in decision_values.iter().zip(labels) {
        let t = if positive { t_pos } else { t_neg };
        let f_apb = params.a * f + params.b;
        // t*log(p) + (1-t)*log(1-p) rewritten to avoid evaluating logs of
        // quantities that underflow: p = 1/(1+exp(f_apb)).
        if f_apb >= 0.0 {
            nll += t * f_apb + (1.0 + (-f_apb).exp()).ln();
        } else {
            nll += (t - 1.0) * f_apb + (1.0 + f_apb.exp()).ln();
        }
    }
    nll
}

fn smoothed_targets(labels: &[bool]) -> (f64, f64) {
    let num_pos = labels.iter().filter(|&&l| l).count() as f64;
    let num_neg = labels.len() as f64 - num_pos;
    ((num_pos + 1.0) / (num_pos + 2.0), 1.0 / (num_neg + 2.0))
}

/// Fits sigmoid parameters to decision values with binary labels
/// (`true` = positive class).
///
/// Requires both classes present and finite decision values. Stops when
/// the gradient norm is below `1e-8` or after 100 Newton iterations,
/// whichever comes first.
pub fn platt_fit(decision_values: &[f64], labels: &[bool]) -> Result<PlattParams, ModelError> {
    if decision_values.len() != labels.len() {
        return Err(ModelError::DimensionMismatch {
            expected: labels.len(),
            found: decision_values.len(),
        });
    }
    if decision_values.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if decision_values.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("decision values"));
    }
    let num_pos = labels.iter().filter(|&&l| l).count();
    let num_neg = labels.len() - num_pos;
    if num_pos == 0 || num_neg == 0 {
        return Err(ModelError::TooFewClasses {
            required: 2,
            found: 1,
        });
    }

    let (t_pos, t_neg) = smoothed_targets(labels);
    let targets: Vec<f64> = labels
        .iter()
        .map(|&l| if l { t_pos } else { t_neg })
        .collect();

    let mut a = 0.0f64;
    let mut b = ((num_neg as f64 + 1.0) / (num_pos as f64 + 1.0)).ln();
    let params = |a: f64, b: f64| PlattParams { a, b };
    let mut objective = platt_nll(&params(a, b), decision_values, labels);

    for _ in 0..MAX_ITERATIONS {
        // Gradient and Hessian of the NLL in (a, b).
        let mut h11 = SIGMA;
        let mut h22 = SIGMA;
        let mut h21 = 0.0;
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        for (&f, &t) in decision_values.iter().zip(&targets) {
            let f_apb = a * f + b;
            let (p, q) = if f_apb >= 0.0 {
                let e = (-f_apb).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = f_apb.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < GRADIENT_TOLERANCE && g2.abs() < GRADIENT_TOLERANCE {
            break;
        }

        // Newton direction: solve H d = -g for the 2x2 system.
        let determinant = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / determinant;
        let db = -(-h21 * g1 + h11 * g2) / determinant;
        let gd = g1 * da + g2 * db;

        // Backtracking line search with sufficient decrease.
        let mut step = 1.0;
        while step >= MIN_STEP {
            let new_a = a + step * da;
            let new_b = b + step * db;
            let new_objective = platt_nll(&params(new_a, new_b), decision_values, labels);
            if new_objective < objective + 1e-4 * step * gd {
                a = new_a;
                b = new_b;
                objective = new_objective;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            // Line search failed: the current point is numerically optimal.
            break;
        }
    }
    Ok(PlattParams { a, b })
}
