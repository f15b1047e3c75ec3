//! Binary soft-margin SVM trained by sequential minimal optimization.
//!
//! Solves the standard dual
//!
//! ```text
//! min over a:  (1/2) a' Q a - e' a
//! subject to:  y' a = 0,  0 <= a_i <= C,  Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! with maximal-violating-pair working-set selection: each step picks the
//! most violating index from the "up" set and the most violating from the
//! "down" set, solves the two-variable subproblem analytically, clips to
//! the box, and updates the gradient incrementally. Optimization stops when
//! the KKT violation gap drops below `tol` or after `100 * n` iterations;
//! hitting the cap is reported on the model rather than hidden.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::models::{check_dimensions, ModelError};
use crate::svm::Kernel;

/// Numerical floor for the two-variable subproblem curvature.
const TAU: f64 = 1e-12;

/// Alphas below this are treated as zero when extracting support vectors.
const SV_THRESHOLD: f64 = 1e-12;

/// Precompute the full kernel matrix up to this many training samples;
/// larger problems fall back to computing kernel rows on demand.
const GRAM_LIMIT: usize = 6000;

/// Iteration budget per training sample.
const MAX_ITER_FACTOR: usize = 100;

/// A fitted binary SVM in support-vector form.
///
/// The decision function is
/// `f(x) = sum_i coefficient_i * K(sv_i, x) + bias` with
/// `coefficient_i = alpha_i * y_i`; its sign is the predicted class
/// (`> 0` means the positive class, label 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinarySvmModel {
    support_vectors: Vec<Vec<f64>>,
    coefficients: Vec<f64>,
    bias: f64,
    kernel: Kernel,
    c_reg: f64,
    converged: bool,
    kkt_gap: f64,
    iterations: usize,
    num_features: usize,
}

impl BinarySvmModel {
    pub fn num_support_vectors(&self) -> usize {
        self.support_vectors.len()
    }

    /// Signed weights `alpha_i * y_i`, one per support vector; their
    /// magnitudes lie in `(0, C]`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn regularization(&self) -> f64 {
        self.c_reg
    }

    /// Whether the solver reached the KKT tolerance within its iteration
    /// budget.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Final KKT violation gap (`< tol` when converged).
    pub fn kkt_gap(&self) -> f64 {
        self.kkt_gap
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Raw decision value `f(x)`.
    pub fn decision_value(&self, features: &[f64]) -> Result<f64, ModelError> {
        check_dimensions(self.num_features, features)?;
        let mut f = self.bias;
        for (sv, &coef) in self.support_vectors.iter().zip(&self.coefficients) {
            f += coef * self.kernel.eval(sv, features);
        }
        Ok(f)
    }
}

/// Fits a binary SVM on a two-class dataset (label 1 is the positive
/// class, label 0 negative).
///
/// The optimization itself is deterministic; the seed parameter keeps the
/// fit signature uniform across model families.
pub fn svm_fit_binary(
    train: &Dataset,
    kernel: Kernel,
    c_reg: f64,
    tol: f64,
    _seed: u64,
) -> Result<BinarySvmModel, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if train.num_classes() != 2 {
        return Err(ModelError::TooFewClasses {
            required: 2,
            found: train.num_classes(),
        });
    }
    let features: Vec<&[f64]> = train.samples().iter().map(|s| s.features.as_slice()).collect();
    let y: Vec<f64> = train
        .samples()
        .iter()
        .map(|s| if s.label == 1 { 1.0 } else { -1.0 })
        .collect();
    fit_from_parts(&features, &y, train.num_features(), kernel, c_reg, tol)
}

/// Fits from raw parts; `y` entries must be +1 or -1. Used directly by the
/// one-vs-rest wrapper so it can relabel without copying the dataset.
pub(crate) fn fit_from_parts(
    features: &[&[f64]],
    y: &[f64],
    num_features: usize,
    kernel: Kernel,
    c_reg: f64,
    tol: f64,
) -> Result<BinarySvmModel, ModelError> {
    if c_reg <= 0.0 {
        return Err(ModelError::NonPositiveParameter {
            name: "c_reg",
            value: c_reg,
        });
    }
    if tol <= 0.0 {
        return Err(ModelError::NonPositiveParameter {
            name: "tol",
            value: tol,
        });
    }
    fit_with_budget(features, y, num_features, kernel, c_reg, tol, None)
}

/// Like [`fit_from_parts`] with an explicit iteration budget override;
/// `None` means the standard `100 * n`. Lets tests exercise the
/// budget-exhausted path deterministically.
pub(crate) fn fit_with_budget(
    features: &[&[f64]],
    y: &[f64],
    num_features: usize,
    kernel: Kernel,
    c_reg: f64,
    tol: f64,
    budget: Option<usize>,
) -> Result<BinarySvmModel, ModelError> {
    let has_pos = y.iter().any(|&v| v > 0.0);
    let has_neg = y.iter().any(|&v| v < 0.0);
    if !has_pos || !has_neg {
        return Err(ModelError::TooFewClasses {
            required: 2,
            found: 1,
        });
    }

    let max_iterations = budget.unwrap_or(MAX_ITER_FACTOR * y.len());
    let solution = solve(features, y, &kernel, c_reg, tol, max_iterations);

    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..y.len() {
        if solution.alpha[i] > SV_THRESHOLD {
            support_vectors.push(features[i].to_vec());
            coefficients.push(solution.alpha[i] * y[i]);
        }
    }
    Ok(BinarySvmModel {
        support_vectors,
        coefficients,
        bias: solution.bias,
        kernel,
        c_reg,
        converged: solution.converged,
        kkt_gap: solution.kkt_gap,
        iterations: solution.iterations,
        num_features,
    })
}

struct Solution {
    alpha: Vec<f64>,
    bias: f64,
    converged: bool,
    kkt_gap: f64,
    iterations: usize,
}

/// Kernel matrix access: dense and precomputed for small problems, rows
/// computed on demand above [`GRAM_LIMIT`].
enum Gram<'a> {
    Dense(Vec<f64>, usize),
    Lazy {
        features: &'a [&'a [f64]],
        kernel: &'a Kernel,
        row_buffer: Vec<f64>,
        row_of: usize,
    },
}

impl<'a> Gram<'a> {
    fn new(features: &'a [&'a [f64]], kernel: &'a Kernel) -> Self {
        let n = features.len();
        if n <= GRAM_LIMIT {
            let mut matrix = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = kernel.eval(features[i], features[j]);
                    matrix[i * n + j] = v;
                    matrix[j * n + i] = v;
                }
            }
            Gram::Dense(matrix, n)
        } else {
            Gram::Lazy {
                features,
                kernel,
                row_buffer: vec![0.0; n],
                row_of: usize::MAX,
            }
        }
    }

    /// Row `i` of the kernel matrix.
    fn row(&mut self, i: usize) -> &[f64] {
        match self {
            Gram::Dense(matrix, n) => &matrix[i * *n..(i + 1) * *n],
            Gram::Lazy {
                features,
                kernel,
                row_buffer,
                row_of,
            } => {
                if *row_of != i {
                    for (j, slot) in row_buffer.iter_mut().enumerate() {
                        *slot = kernel.eval(features[i], features[j]);
                    }
                    *row_of = i;
                }
                row_buffer
            }
        }
    }

    fn diagonal(&mut self, i: usize) -> f64 {
        self.row(i)[i]
    }
}

fn solve(
    features: &[&[f64]],
    y: &[f64],
    kernel: &Kernel,
    c_reg: f64,
    tol: f64,
    max_iterations: usize,
) -> Solution {
    let n = y.len();
    let mut gram = Gram::new(features, kernel);
    let mut alpha = vec![0.0f64; n];
    // Gradient of the dual objective: G_i = (Q a)_i - 1.
    let mut gradient = vec![-1.0f64; n];

    let mut converged = false;
    let mut kkt_gap = f64::INFINITY;
    let mut iterations = 0;

    for iteration in 0..=max_iterations {
        // Working-set selection over the feasible direction sets.
        let mut i_best: Option<usize> = None;
        let mut m_up = f64::NEG_INFINITY;
        let mut j_best: Option<usize> = None;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let in_up = (y[t] > 0.0 && alpha[t] < c_reg) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] < 0.0 && alpha[t] < c_reg) || (y[t] > 0.0 && alpha[t] > 0.0);
            let score = -y[t] * gradient[t];
            if in_up && score > m_up {
                m_up = score;
                i_best = Some(t);
            }
            if in_low && score < m_low {
                m_low = score;
                j_best = Some(t);
            }
        }
        kkt_gap = m_up - m_low;
        iterations = iteration;
        if kkt_gap < tol {
            converged = true;
            break;
        }
        if iteration == max_iterations {
            break;
        }
        let (i, j) = match (i_best, j_best) {
            (Some(i), Some(j)) => (i, j),
            // Both sets are nonempty for any feasible alpha with two
            // classes present; this is unreachable but safe.
            _ => break,
        };

        let q_ii = gram.diagonal(i);
        let q_jj = gram.diagonal(j);
        let k_ij = gram.row(i)[j];
        let old_alpha_i = alpha[i];
        let old_alpha_j = alpha[j];

        // The subproblem curvature is ||phi(x_i) - phi(x_j)||^2 in feature
        // space for either label combination (it is Q_ii + Q_jj + 2 Q_ij
        // for opposite labels and Q_ii + Q_jj - 2 Q_ij for equal ones;
        // both reduce to this in kernel terms).
        let quad = (q_ii + q_jj - 2.0 * k_ij).max(TAU);
        if y[i] != y[j] {
            let delta = (-gradient[i] - gradient[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c_reg {
                    alpha[i] = c_reg;
                    alpha[j] = c_reg - diff;
                }
            } else if alpha[j] > c_reg {
                alpha[j] = c_reg;
                alpha[i] = c_reg + diff;
            }
        } else {
            let delta = (gradient[i] - gradient[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c_reg {
                if alpha[i] > c_reg {
                    alpha[i] = c_reg;
                    alpha[j] = sum - c_reg;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c_reg {
                if alpha[j] > c_reg {
                    alpha[j] = c_reg;
                    alpha[i] = sum - c_reg;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        // Incremental gradient update: G_t += Q_ti dA_i + Q_tj dA_j where
        // Q_ti = y_t y_i K_ti.
        let delta_i = alpha[i] - old_alpha_i;
        let delta_j = alpha[j] - old_alpha_j;
        {
            let row_i = gram.row(i);
            for t in 0..n {
                gradient[t] += y[t] * y[i] * row_i[t] * delta_i;
            }
        }
        {
            let row_j = gram.row(j);
            for t in 0..n {
                gradient[t] += y[t] * y[j] * row_j[t] * delta_j;
            }
        }
    }

    // Bias: average the per-point estimate -y_t G_t over free support
    // vectors; if none are free, take the midpoint of the violation bounds.
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..n {
        if alpha[t] > SV_THRESHOLD && alpha[t] < c_reg - SV_THRESHOLD {
            free_sum += -y[t] * gradient[t];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        let mut m_up = f64::NEG_INFINITY;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let in_up = (y[t] > 0.0 && alpha[t] < c_reg) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] < 0.0 && alpha[t] < c_reg) || (y[t] > 0.0 && alpha[t] > 0.0);
            let score = -y[t] * gradient[t];
            if in_up {
                m_up = m_up.max(score);
            }
            if in_low {
                m_low = m_low.min(score);
            }
        }
        (m_up + m_low) / 2.0
    };

    Solution {
        alpha,
        bias,
        converged,
        kkt_gap,
        iterations,
    }
}
