//! Baseline binary classifiers over band-power vectors: Gaussian naive Bayes,
//! Fisher LDA and SMO-trained support vector machines.
//!
//! Labels are class indices `0` and `1`. Every model breaks exact ties toward
//! the lower index.

mod gnb;
pub mod hexfloat;
mod lda;
mod svm;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use gnb::GaussianNb;
pub use lda::Lda;
pub use svm::{auto_gamma, dual_objective, solve_dual, DualSolution, Kernel, Svm, SvmConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassicalKind {
    #[serde(rename = "gnb")]
    Gnb,
    #[serde(rename = "lda")]
    Lda,
    #[serde(rename = "svm-linear")]
    SvmLinear,
    #[serde(rename = "svm-rbf")]
    SvmRbf,
}

impl ClassicalKind {
    pub const ALL: [ClassicalKind; 4] = [Self::Gnb, Self::Lda, Self::SvmLinear, Self::SvmRbf];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Gnb => "gnb",
            Self::Lda => "lda",
            Self::SvmLinear => "svm-linear",
            Self::SvmRbf => "svm-rbf",
        }
    }
}

impl fmt::Display for ClassicalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassicalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("classical model", s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalConfig {
    pub gnb_var_floor: f64,
    pub lda_ridge: f64,
    pub svm: SvmConfig,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            gnb_var_floor: 1e-9,
            lda_ridge: 1e-6,
            svm: SvmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassicalModel {
    Gnb(GaussianNb),
    Lda(Lda),
    Svm(Svm),
}

impl ClassicalModel {
    pub fn fit(kind: ClassicalKind, x: &[Vec<f64>], y: &[usize], config: &ClassicalConfig) -> Result<Self> {
        Ok(match kind {
            ClassicalKind::Gnb => Self::Gnb(GaussianNb::fit(x, y, config.gnb_var_floor)?),
            ClassicalKind::Lda => Self::Lda(Lda::fit(x, y, config.lda_ridge)?),
            ClassicalKind::SvmLinear => Self::Svm(Svm::fit(x, y, Kernel::Linear, &config.svm)?),
            ClassicalKind::SvmRbf => {
                let gamma = config.svm.gamma.unwrap_or_else(|| svm::auto_gamma(x));
                Self::Svm(Svm::fit(x, y, Kernel::Rbf { gamma }, &config.svm)?)
            }
        })
    }

    /// Signed score; positive favours class 1.
    pub fn decision(&self, x: &[f64]) -> f64 {
        match self {
            Self::Gnb(m) => m.decision(x),
            Self::Lda(m) => m.decision(x),
            Self::Svm(m) => m.decision(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        (self.decision(x) > 0.0) as usize
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Shared argument checks; returns the feature dimension.
pub(crate) fn check_training_set(x: &[Vec<f64>], y: &[usize]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            op: "training set",
            lhs: vec![x.len()],
            rhs: vec![y.len()],
        });
    }
    let dim = x.first().map(Vec::len).unwrap_or(0);
    if dim == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    for row in x {
        if row.len() != dim {
            return Err(Error::ShapeMismatch {
                op: "training row",
                lhs: vec![dim],
                rhs: vec![row.len()],
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite feature".into()));
        }
    }
    if let Some(bad) = y.iter().find(|&&l| l > 1) {
        return Err(Error::invalid("class label", bad));
    }
    if !y.contains(&0) || !y.contains(&1) {
        return Err(Error::Degenerate("training set holds a single class".into()));
    }
    Ok(dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in ClassicalKind::ALL {
            assert_eq!(k.to_string().parse::<ClassicalKind>().unwrap(), k);
        }
        assert!("knn".parse::<ClassicalKind>().is_err());
    }

    #[test]
    fn single_class_is_an_error() {
        let x = vec![vec![1.0], vec![2.0]];
        for k in ClassicalKind::ALL {
            assert!(matches!(
                ClassicalModel::fit(k, &x, &[1, 1], &ClassicalConfig::default()),
                Err(Error::Degenerate(_))
            ));
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64 * 0.7).sin() + (i % 2) as f64, (i as f64 * 1.3).cos()])
            .collect();
        let y: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let dir = tempfile::tempdir().unwrap();
        for k in ClassicalKind::ALL {
            let m = ClassicalModel::fit(k, &x, &y, &ClassicalConfig::default()).unwrap();
            let path = dir.path().join(format!("{k}.json"));
            m.save(&path).unwrap();
            let back = ClassicalModel::load(&path).unwrap();
            assert_eq!(back, m);
            for row in &x {
                assert_eq!(back.decision(row).to_bits(), m.decision(row).to_bits());
            }
        }
    }
}
