use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension z-scoring with statistics from a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Population mean and std per dimension; std is floored at 1e-8.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidArgument("cannot fit a normalizer on no samples".into()))?;
        let dim = first.as_ref().len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::ShapeMismatch {
                    op: "normalizer fit",
                    lhs: vec![dim],
                    rhs: vec![r.len()],
                });
            }
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                op: "normalizer apply",
                lhs: vec![self.dim()],
                rhs: vec![row.len()],
            });
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn apply_all<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r.as_ref())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_set() {
        let n = Normalizer::fit(&[[0.0], [2.0]]).unwrap();
        assert_eq!(n.apply(&[0.0]).unwrap(), vec![-1.0]);
        assert_eq!(n.apply(&[2.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn constant_dimension_maps_to_zero() {
        let n = Normalizer::fit(&[[3.0, 1.0], [3.0, 2.0]]).unwrap();
        assert_eq!(n.std[0], STD_FLOOR);
        assert_eq!(n.apply(&[3.0, 1.5]).unwrap()[0], 0.0);
    }

    #[test]
    fn empty_fit_fails() {
        let rows: Vec<Vec<f64>> = vec![];
        assert!(Normalizer::fit(&rows).is_err());
    }

    #[test]
    fn fit_set_is_standardized() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![i as f64 * 0.37 - 4.0, ((i * 31) % 17) as f64 * 1e3])
            .collect();
        let n = Normalizer::fit(&rows).unwrap();
        let z = n.apply_all(&rows).unwrap();
        for d in 0..2 {
            let col: Vec<f64> = z.iter().map(|r| r[d]).collect();
            let (m, s) = crate::util::mean_std(&col);
            assert!(m.abs() < 1e-9);
            assert!((s - 1.0).abs() < 1e-6);
        }
    }
}
