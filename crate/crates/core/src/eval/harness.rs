use std::collections::BTreeSet;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{stratified_cv, Fold, FoldPlan};
use super::dataset::{DataView, Dataset};
use super::metrics::{Confusion, MeanStd};
use crate::error::{Error, Result};
use crate::util::derive_seed;

pub const SCHEMA_VERSION: u32 = 1;

/// Something that can be trained on one fold and then asked for labels.
pub trait Learner: Send + Sync {
    fn name(&self) -> String;

    /// Names of the prediction heads; the first is the learner itself.
    fn heads(&self) -> Vec<String> {
        vec![self.name()]
    }

    fn fit(&self, train: &DataView<'_>, seed: u64) -> Result<Box<dyn Fitted>>;
}

pub trait Fitted: Send {
    /// One prediction vector per head, in `Learner::heads` order.
    fn predict(&self, test: &DataView<'_>) -> Result<Vec<Vec<usize>>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: 5,
            repetitions: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub repetition: usize,
    pub fold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub name: String,
    pub runs: usize,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
    /// Summed over runs, `counts[actual][predicted]`.
    pub confusion: Confusion,
    pub per_run: Vec<RunMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub learner: String,
    pub k: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub n_samples: usize,
    /// Folds whose training part held a single class.
    pub skipped: Vec<(usize, usize)>,
    pub heads: Vec<MetricsReport>,
}

impl EvalReport {
    pub fn head(&self, name: &str) -> Option<&MetricsReport> {
        self.heads.iter().find(|h| h.name == name)
    }

    pub fn primary(&self) -> &MetricsReport {
        &self.heads[0]
    }
}

/// Samples read during fitting and during prediction of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunAudit {
    pub repetition: usize,
    pub fold: usize,
    pub fit_accessed: BTreeSet<usize>,
    pub predict_accessed: BTreeSet<usize>,
}

enum Outcome {
    Done(Vec<Confusion>, RunAudit),
    Skipped(usize, usize),
}

fn run_fold(learner: &dyn Learner, data: &Dataset, fold: &Fold, seed: u64, n_heads: usize) -> Result<Outcome> {
    let classes: BTreeSet<usize> = fold.train.iter().map(|&i| data.labels[i]).collect();
    if classes.len() < 2 {
        return Ok(Outcome::Skipped(fold.repetition, fold.fold));
    }
    let fit_log = Mutex::new(BTreeSet::new());
    let predict_log = Mutex::new(BTreeSet::new());
    let run_seed = derive_seed(seed, &[fold.repetition as u64, fold.fold as u64]);
    let fitted = learner.fit(&DataView::new(data, &fold.train, &fit_log), run_seed)?;
    let fit_accessed = fit_log.into_inner().unwrap_or_default();
    let train: BTreeSet<usize> = fold.train.iter().copied().collect();
    if let Some(i) = fit_accessed.difference(&train).next() {
        return Err(Error::Leakage(format!(
            "{} read sample {i} outside the training fold (repetition {}, fold {})",
            learner.name(),
            fold.repetition,
            fold.fold
        )));
    }
    let preds = fitted.predict(&DataView::new(data, &fold.test, &predict_log))?;
    if preds.len() != n_heads || preds.iter().any(|p| p.len() != fold.test.len()) {
        return Err(Error::ShapeMismatch {
            op: "predictions",
            lhs: vec![n_heads, fold.test.len()],
            rhs: preds.iter().map(Vec::len).collect(),
        });
    }
    let truth: Vec<usize> = fold.test.iter().map(|&i| data.labels[i]).collect();
    let confusions = preds.iter().map(|p| Confusion::from_predictions(&truth, p)).collect();
    Ok(Outcome::Done(
        confusions,
        RunAudit {
            repetition: fold.repetition,
            fold: fold.fold,
            fit_accessed,
            predict_accessed: predict_log.into_inner().unwrap_or_default(),
        },
    ))
}

/// Runs the learner over a fold plan. Runs execute in parallel; the report
/// is assembled in (repetition, fold) order, so it does not depend on
/// scheduling.
pub fn evaluate_plan(learner: &dyn Learner, data: &Dataset, plan: &FoldPlan) -> Result<(EvalReport, Vec<RunAudit>)> {
    let heads = learner.heads();
    let outcomes: Vec<Result<Outcome>> = plan
        .folds
        .par_iter()
        .map(|f| run_fold(learner, data, f, plan.seed, heads.len()))
        .collect();
    let mut skipped = Vec::new();
    let mut audits = Vec::new();
    let mut per_head: Vec<Vec<(usize, usize, Confusion)>> = vec![Vec::new(); heads.len()];
    for o in outcomes {
        match o? {
            Outcome::Skipped(r, f) => skipped.push((r, f)),
            Outcome::Done(conf, audit) => {
                for (h, c) in conf.into_iter().enumerate() {
                    per_head[h].push((audit.repetition, audit.fold, c));
                }
                audits.push(audit);
            }
        }
    }
    let heads = heads
        .into_iter()
        .zip(per_head)
        .map(|(name, runs)| summarize(name, &runs))
        .collect();
    Ok((
        EvalReport {
            schema_version: SCHEMA_VERSION,
            learner: learner.name(),
            k: plan.k,
            repetitions: plan.repetitions,
            seed: plan.seed,
            n_samples: data.len(),
            skipped,
            heads,
        },
        audits,
    ))
}

pub fn evaluate(learner: &dyn Learner, data: &Dataset, cfg: &CvConfig) -> Result<EvalReport> {
    let plan = stratified_cv(&data.labels, cfg.k, cfg.repetitions, cfg.seed)?;
    Ok(evaluate_plan(learner, data, &plan)?.0)
}

fn summarize(name: String, runs: &[(usize, usize, Confusion)]) -> MetricsReport {
    let per_run: Vec<RunMetrics> = runs
        .iter()
        .map(|(r, f, c)| RunMetrics {
            repetition: *r,
            fold: *f,
            precision: c.macro_precision(),
            recall: c.macro_recall(),
            f1: c.macro_f1(),
        })
        .collect();
    let mut confusion = Confusion::default();
    for (_, _, c) in runs {
        confusion.add(c);
    }
    let col = |f: fn(&RunMetrics) -> f64| MeanStd::of(&per_run.iter().map(f).collect::<Vec<_>>());
    MetricsReport {
        name,
        runs: per_run.len(),
        precision: col(|m| m.precision),
        recall: col(|m| m.recall),
        f1: col(|m| m.f1),
        confusion,
        per_run,
    }
}
