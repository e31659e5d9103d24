use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_training_set, hexfloat};
use crate::error::{Error, Result};

/// Two-class Fisher discriminant: `w = S_w^-1 (mu1 - mu0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lda {
    #[serde(with = "hexfloat::vec")]
    pub w: Vec<f64>,
    /// Class 1 is predicted when `w . x > threshold`.
    #[serde(with = "hexfloat::scalar")]
    pub threshold: f64,
}

impl Lda {
    pub fn fit(x: &[Vec<f64>], y: &[usize], ridge: f64) -> Result<Self> {
        let dim = check_training_set(x, y)?;
        let mut mu = [DVector::zeros(dim), DVector::zeros(dim)];
        let mut counts = [0usize; 2];
        for (row, &c) in x.iter().zip(y) {
            counts[c] += 1;
            mu[c] += DVector::from_column_slice(row);
        }
        for c in 0..2 {
            mu[c] /= counts[c] as f64;
        }
        let mut sw = DMatrix::zeros(dim, dim);
        for (row, &c) in x.iter().zip(y) {
            let d = DVector::from_column_slice(row) - &mu[c];
            sw.ger(1.0, &d, &d, 1.0);
        }
        let dof = if x.len() > 2 { x.len() - 2 } else { x.len() };
        sw /= dof as f64;
        for i in 0..dim {
            sw[(i, i)] += ridge;
        }
        let diff = &mu[1] - &mu[0];
        if diff.norm() == 0.0 {
            return Err(Error::Degenerate("class means coincide".into()));
        }
        let w = match sw.clone().cholesky() {
            Some(ch) => ch.solve(&diff),
            None => sw
                .lu()
                .solve(&diff)
                .ok_or_else(|| Error::Degenerate("within-class scatter is singular".into()))?,
        };
        if !w.iter().all(|v| v.is_finite()) || w.norm() == 0.0 {
            return Err(Error::Degenerate("within-class scatter is singular".into()));
        }
        let n = x.len() as f64;
        let log_ratio = (counts[1] as f64 / n).ln() - (counts[0] as f64 / n).ln();
        let threshold = w.dot(&((&mu[0] + &mu[1]) * 0.5)) - log_ratio;
        Ok(Self {
            w: w.iter().copied().collect(),
            threshold,
        })
    }

    pub fn project(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.project(x) - self.threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_direction_follows_mean_difference() {
        // Points at mu_c +- e_i give each class a scatter proportional to I.
        let mus = [[0.5, -1.0, 2.0], [3.0, 0.25, -1.5]];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (c, mu) in mus.iter().enumerate() {
            for i in 0..3 {
                for s in [-1.0, 1.0] {
                    let mut row = mu.to_vec();
                    row[i] += s;
                    x.push(row);
                    y.push(c);
                }
            }
        }
        let m = Lda::fit(&x, &y, 1e-6).unwrap();
        let d: Vec<f64> = (0..3).map(|i| mus[1][i] - mus[0][i]).collect();
        let dot: f64 = m.w.iter().zip(&d).map(|(a, b)| a * b).sum();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(dot / (norm(&m.w) * norm(&d)) >= 1.0 - 1e-9);
    }

    #[test]
    fn equal_means_rejected() {
        let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]];
        assert!(matches!(Lda::fit(&x, &[0, 0, 1, 1], 1e-6), Err(Error::Degenerate(_))));
    }
}
