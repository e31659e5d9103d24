use std::collections::BTreeSet;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::stratified_cv;
use super::dataset::{DataView, Dataset, FeatureKind};
use super::harness::{CvConfig, SCHEMA_VERSION};
use super::metrics::MeanStd;
use crate::data::{ClLabel, Parameter};
use crate::error::{Error, Result};
use crate::features::Normalizer;
use crate::neural::{build, similarity, train_siamese, Arch, Model, TrainConfig};
use crate::util::derive_seed;

/// Mean score above which a pair is called similar.
pub const SIMILAR_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityConfig {
    pub cv: CvConfig,
    pub train: TrainConfig,
    /// Score only pairs recorded from different participants.
    pub cross_participant: bool,
    pub threshold: f64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            cv: CvConfig::default(),
            // Strong decay lets single-label folds collapse on held-out
            // inputs too, not just the ones seen in training.
            train: TrainConfig {
                lr: 3e-3,
                max_epochs: 30,
                patience: 5,
                weight_decay: 20.0,
                ..TrainConfig::default()
            },
            cross_participant: true,
            threshold: SIMILAR_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Similar,
    Dissimilar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub a: Parameter,
    pub b: Parameter,
    pub labels: (ClLabel, ClLabel),
    pub score: MeanStd,
    pub runs: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub schema_version: u32,
    pub threshold: f64,
    pub rows: Vec<SimilarityRow>,
}

/// The 15 unordered parameter pairs in table order.
pub fn parameter_pairs() -> Vec<(Parameter, Parameter)> {
    let all = Parameter::ALL;
    let mut out = Vec::new();
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            out.push((all[i], all[j]));
        }
    }
    out
}

fn majority_label(data: &Dataset, p: Parameter) -> ClLabel {
    let (n, high) = data
        .meta
        .iter()
        .zip(&data.labels)
        .filter(|(m, _)| m.parameter == p)
        .fold((0, 0), |(n, h), (_, &l)| (n + 1, h + l));
    ClLabel::from_index((2 * high > n) as usize)
}

/// Trains a Siamese tower on one fold and scores the held-out cross-pairs.
fn score_fold(
    data: &Dataset,
    train: &[usize],
    test: &[usize],
    (a, b): (Parameter, Parameter),
    cfg: &SimilarityConfig,
    seed: u64,
) -> Result<f64> {
    let log = Mutex::new(BTreeSet::new());
    let view = DataView::new(data, train, &log);
    let rows = view.rows(FeatureKind::Topo)?;
    let norm = Normalizer::fit(&rows)?;
    let x = norm.apply_all(&rows)?;
    let mut model = Model::new(build(Arch::Siamese, seed)?)?;
    let xs: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
    train_siamese(&mut model, &xs, &view.labels(), &cfg.train.with_seed(seed))?;

    let topo = data.rows(FeatureKind::Topo)?;
    let test_rows: Vec<Vec<f64>> = test.iter().map(|&i| norm.apply(&topo[i])).collect::<Result<_>>()?;
    let emb = model.embeddings(&test_rows.iter().map(Vec::as_slice).collect::<Vec<_>>())?;
    let mut total = 0.0;
    let mut n = 0usize;
    for (i, &si) in test.iter().enumerate() {
        if data.meta[si].parameter != a {
            continue;
        }
        for (j, &sj) in test.iter().enumerate() {
            if data.meta[sj].parameter != b {
                continue;
            }
            if cfg.cross_participant && data.meta[si].participant == data.meta[sj].participant {
                continue;
            }
            total += similarity(&emb[i], &emb[j]);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Degenerate(format!("no held-out {a}/{b} pairs to score")));
    }
    Ok(total / n as f64)
}

/// Siamese similarity for every parameter pair under repeated CV. The
/// dataset needs topographic features; labels are CL classes.
pub fn pairwise_similarity(data: &Dataset, cfg: &SimilarityConfig) -> Result<SimilarityReport> {
    data.rows(FeatureKind::Topo)?;
    let mut rows = Vec::with_capacity(15);
    for (pi, (a, b)) in parameter_pairs().into_iter().enumerate() {
        let idx: Vec<usize> = (0..data.len())
            .filter(|&i| data.meta[i].parameter == a || data.meta[i].parameter == b)
            .collect();
        let member: Vec<usize> = idx.iter().map(|&i| (data.meta[i].parameter == b) as usize).collect();
        if member.iter().filter(|&&m| m == 0).count() < cfg.cv.k || member.iter().filter(|&&m| m == 1).count() < cfg.cv.k {
            return Err(Error::Degenerate(format!("pair {a}/{b} has too few samples for {}-fold CV", cfg.cv.k)));
        }
        let plan = stratified_cv(&member, cfg.cv.k, cfg.cv.repetitions, derive_seed(cfg.cv.seed, &[pi as u64]))?;
        let scores: Vec<f64> = plan
            .folds
            .par_iter()
            .map(|f| {
                let train: Vec<usize> = f.train.iter().map(|&i| idx[i]).collect();
                let test: Vec<usize> = f.test.iter().map(|&i| idx[i]).collect();
                let seed = derive_seed(plan.seed, &[f.repetition as u64, f.fold as u64]);
                score_fold(data, &train, &test, (a, b), cfg, seed)
            })
            .collect::<Result<_>>()?;
        let score = MeanStd::of(&scores);
        rows.push(SimilarityRow {
            a,
            b,
            labels: (majority_label(data, a), majority_label(data, b)),
            score,
            runs: scores.len(),
            verdict: if score.mean > cfg.threshold {
                Verdict::Similar
            } else {
                Verdict::Dissimilar
            },
        });
    }
    Ok(SimilarityReport {
        schema_version: SCHEMA_VERSION,
        threshold: cfg.threshold,
        rows,
    })
}
