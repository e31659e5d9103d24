use serde::{Deserialize, Serialize};

use super::{check_training_set, hexfloat};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    #[serde(with = "hexfloat::matrix")]
    pub means: Vec<Vec<f64>>,
    #[serde(with = "hexfloat::matrix")]
    pub variances: Vec<Vec<f64>>,
    #[serde(with = "hexfloat::vec")]
    pub log_priors: Vec<f64>,
}

impl GaussianNb {
    pub fn fit(x: &[Vec<f64>], y: &[usize], var_floor: f64) -> Result<Self> {
        let dim = check_training_set(x, y)?;
        let mut means = vec![vec![0.0; dim]; 2];
        let mut variances = vec![vec![0.0; dim]; 2];
        let mut counts = [0usize; 2];
        for (row, &c) in x.iter().zip(y) {
            counts[c] += 1;
            means[c].iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        for c in 0..2 {
            means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
        }
        for (row, &c) in x.iter().zip(y) {
            for ((s, v), m) in variances[c].iter_mut().zip(row).zip(&means[c]) {
                *s += (v - m) * (v - m);
            }
        }
        for c in 0..2 {
            variances[c]
                .iter_mut()
                .for_each(|s| *s = (*s / counts[c] as f64).max(var_floor));
        }
        let n = x.len() as f64;
        let log_priors = counts.iter().map(|&k| (k as f64 / n).ln()).collect();
        Ok(Self {
            means,
            variances,
            log_priors,
        })
    }

    pub fn log_joint(&self, x: &[f64], class: usize) -> f64 {
        let ll: f64 = x
            .iter()
            .zip(&self.means[class])
            .zip(&self.variances[class])
            .map(|((v, m), s)| -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + (v - m) * (v - m) / s))
            .sum();
        self.log_priors[class] + ll
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.log_joint(x, 1) - self.log_joint(x, 0)
    }
}
