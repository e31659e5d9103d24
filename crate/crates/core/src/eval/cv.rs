use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub repetition: usize,
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Ordered by (repetition, fold).
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    pub fn runs(&self) -> usize {
        self.folds.len()
    }
}

/// Repeated stratified k-fold. Each class is shuffled and dealt round-robin,
/// continuing the deal across classes, so per-fold class counts differ from
/// the exact share by less than one sample and fold sizes by at most one.
pub fn stratified_cv(labels: &[usize], k: usize, repetitions: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || repetitions == 0 {
        return Err(Error::InvalidArgument(format!("k = {k}, repetitions = {repetitions}")));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for (c, idx) in by_class.iter().enumerate() {
        if !idx.is_empty() && idx.len() < k {
            return Err(Error::Degenerate(format!("class {c} has {} samples, fewer than k = {k}", idx.len())));
        }
    }
    let mut folds = Vec::with_capacity(k * repetitions);
    for rep in 0..repetitions {
        let mut assign = vec![0usize; labels.len()];
        let mut slot = 0;
        for (c, idx) in by_class.iter().enumerate() {
            let mut idx = idx.clone();
            idx.shuffle(&mut rng(derive_seed(seed, &[rep as u64, c as u64])));
            for i in idx {
                assign[i] = slot % k;
                slot += 1;
            }
        }
        for f in 0..k {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assign[i] == f);
            folds.push(Fold {
                repetition: rep,
                fold: f,
                train,
                test,
            });
        }
    }
    Ok(FoldPlan {
        k,
        repetitions,
        seed,
        folds,
    })
}
