//! Kernel functions for the SVM.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;

/// A positive-definite kernel over feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// `K(a, b) = <a, b>`.
    Linear,
    /// `K(a, b) = exp(-gamma * ||a - b||^2)`.
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => a.iter().zip(b).map(|(&x, &y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let squared: f64 = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
                (-gamma * squared).exp()
            }
        }
    }
}

/// The `scale` heuristic for the RBF width: `1 / (D * var)` where `var` is
/// the variance of all feature values pooled together. Falls back to
/// `1 / D` when the data is constant.
pub fn rbf_scale_gamma(dataset: &Dataset) -> f64 {
    let d = dataset.num_features() as f64;
    let mut count = 0usize;
    let mut mean = 0.0;
    for s in dataset.samples() {
        for &x in &s.features {
            count += 1;
            mean += x;
        }
    }
    if count == 0 {
        return 1.0 / d.max(1.0);
    }
    mean /= count as f64;
    let mut var = 0.0;
    for s in dataset.samples() {
        for &x in &s.features {
            let diff = x - mean;
            var += diff * diff;
        }
    }
    var /= count as f64;
    if var > 0.0 {
        1.0 / (d * var)
    } else {
        1.0 / d.max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;

    #[test]
    fn linear_kernel_is_dot_product() {
        let k = Kernel::Linear;
        assert_eq!(k.eval(&[1.0, 2.0], &[3.0, -1.0]), 1.0);
    }

    #[test]
    fn rbf_kernel_properties() {
        let k = Kernel::Rbf { gamma: 0.5 };
        let a = [1.0, 2.0];
        let b = [2.0, 0.0];
        // K(x, x) = 1, symmetry, and values in (0, 1].
        assert_eq!(k.eval(&a, &a), 1.0);
        assert_eq!(k.eval(&a, &b), k.eval(&b, &a));
        let v = k.eval(&a, &b);
        assert!(v > 0.0 && v < 1.0);
        // ||a - b||^2 = 1 + 4 = 5, so K = exp(-2.5).
        assert!((v - (-2.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn scale_gamma_matches_pooled_variance() {
        let samples = vec![
            Sample {
                features: vec![0.0, 2.0],
                label: 0,
                batch: 0,
            },
            Sample {
                features: vec![4.0, 2.0],
                label: 0,
                batch: 0,
            },
        ];
        let d = Dataset::from_parts(samples, 2, 1).unwrap();
        // Pooled values {0, 2, 4, 2}: mean 2, variance (4 + 0 + 4 + 0)/4 = 2.
        let gamma = rbf_scale_gamma(&d);
        assert!((gamma - 1.0 / (2.0 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn scale_gamma_handles_constant_data() {
        let samples = vec![Sample {
            features: vec![3.0, 3.0],
            label: 0,
            batch: 0,
        }];
        let d = Dataset::from_parts(samples, 2, 1).unwrap();
        assert_eq!(rbf_scale_gamma(&d), 0.5);
    }

    #[test]
    fn kernel_serde_round_trips() {
        for k in [Kernel::Linear, Kernel::Rbf { gamma: 0.25 }] {
            let json = serde_json::to_string(&k).unwrap();
            let back: Kernel = serde_json::from_str(&json).unwrap();
            assert_eq!(back, k);
        }
    }
}
