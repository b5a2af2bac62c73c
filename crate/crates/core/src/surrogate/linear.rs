use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kge::logistic;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig { epochs: 300, learning_rate: 0.5, l2: 1e-4 }
    }
}

/// Logistic regression over sparse binary features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    /// Full-batch gradient descent from zero weights, so the result depends
    /// only on the data.
    pub fn fit(rows: &[&[u32]], labels: &[bool], num_features: usize, cfg: LinearConfig) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyExamples);
        }
        let n = rows.len() as f64;
        let mut w = vec![0.0; num_features];
        let mut b = 0.0;
        let mut grad = vec![0.0; num_features];
        for _ in 0..cfg.epochs {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for (row, &y) in rows.iter().zip(labels) {
                let z = b + row.iter().map(|&f| w[f as usize]).sum::<f64>();
                let err = logistic(z) - if y { 1.0 } else { 0.0 };
                gb += err;
                for &f in *row {
                    grad[f as usize] += err;
                }
            }
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi -= cfg.learning_rate * (gi / n + cfg.l2 * *wi);
            }
            b -= cfg.learning_rate * gb / n;
        }
        Ok(LinearModel { weights: w, bias: b })
    }

    pub fn decision_value(&self, row: &[u32]) -> f64 {
        self.bias + row.iter().filter_map(|&f| self.weights.get(f as usize)).sum::<f64>()
    }

    pub fn predict(&self, row: &[u32]) -> bool {
        self.decision_value(row) >= 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::tree::agreement;

    #[test]
    fn separable_single_feature() {
        let rows: [&[u32]; 4] = [&[0], &[0], &[], &[]];
        let labels = [true, true, false, false];
        let m = LinearModel::fit(&rows, &labels, 1, LinearConfig::default()).unwrap();
        assert_eq!(agreement(|r| m.predict(r), &rows, &labels), 1.0);
    }

    #[test]
    fn xor_is_out_of_reach() {
        let rows: [&[u32]; 4] = [&[], &[1], &[0], &[0, 1]];
        let labels = [false, true, true, false];
        // Any linear threshold over two bits realizes one of the 14 linearly
        // separable Boolean functions; none of them matches XOR on more than
        // three of the four inputs.
        let points = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)];
        let mut best = 0;
        for &w0 in &[-2.0, -1.0, 0.0, 1.0, 2.0] {
            for &w1 in &[-2.0, -1.0, 0.0, 1.0, 2.0] {
                for &b in &[-2.5, -1.5, -0.5, 0.5, 1.5] {
                    let hits =
                        points.iter().zip(labels).filter(|((x0, x1), y)| (w0 * x0 + w1 * x1 + b >= 0.0) == *y).count();
                    best = best.max(hits);
                }
            }
        }
        assert_eq!(best, 3);
        let m = LinearModel::fit(&rows, &labels, 2, LinearConfig::default()).unwrap();
        assert!(agreement(|r| m.predict(r), &rows, &labels) <= 0.75);
    }

    #[test]
    fn all_zero_features_stay_finite() {
        let rows: [&[u32]; 3] = [&[], &[], &[]];
        let m = LinearModel::fit(&rows, &[true, false, true], 4, LinearConfig::default()).unwrap();
        assert!(m.weights.iter().all(|w| w.is_finite()) && m.bias.is_finite());
        assert!(m.predict(&[]));
    }
}
