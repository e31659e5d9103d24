use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::model::{Mode, Model};
use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::features::Normalizer;
use crate::util::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-loss improvement before stopping.
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
    /// Contrastive margin for Siamese training.
    pub margin: f64,
    /// Decoupled weight decay, scaled by `lr` as in AdamW.
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            val_fraction: 0.2,
            seed: 0,
            margin: DEFAULT_MARGIN,
            weight_decay: 0.0,
        }
    }
}

/// Large enough that cross-class pairs are pushed to scores near zero.
pub const DEFAULT_MARGIN: f64 = 5.0;

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.batch_size > 1
            && self.max_epochs > 0
            && self.patience > 0
            && (0.0..1.0).contains(&self.val_fraction)
            && self.margin > 0.0
            && self.weight_decay >= 0.0;
        if positive {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("train config {self:?}")))
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

/// Adam with bias correction and optional decoupled weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: &TrainConfig, store: &ParamStore) -> Self {
        let zeros = || store.params.iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &[(usize, Vec<f64>)]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let keep = 1.0 - self.lr * self.weight_decay;
        for (id, g) in grads {
            let p = store.get_mut(*id);
            if !p.trainable || p.frozen {
                continue;
            }
            let (m, v) = (&mut self.m[*id], &mut self.v[*id]);
            for i in 0..g.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p.data[i] = keep * p.data[i] - self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Stratified hold-out split; returns `(train, val)` index lists. The
/// validation part is empty when a class is too small to spare a sample.
pub fn stratified_split(labels: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut r = rng(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut r);
        let k = (idx.len() as f64 * fraction).round() as usize;
        if k == 0 || k + 2 > idx.len() {
            return ((0..labels.len()).collect(), Vec::new());
        }
        val.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Mini-batches of a shuffled index list; a trailing batch of one joins the
/// previous batch so batch statistics stay defined.
pub fn batches(idx: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = idx.chunks(size).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().unwrap_or_default();
        if let Some(prev) = out.last_mut() {
            prev.extend(last);
        }
    }
    out
}

type BatchLoss<'a> = dyn Fn(&Model, &mut Graph, &[usize], Mode) -> Result<Var> + 'a;

fn fit(model: &mut Model, split: (&[usize], &[usize]), cfg: &TrainConfig, loss_fn: &BatchLoss<'_>) -> Result<TrainReport> {
    cfg.validate()?;
    let (train_idx, val_idx) = split;
    if train_idx.is_empty() {
        return Err(Error::Degenerate("empty training split".into()));
    }
    let mut adam = Adam::new(cfg, &model.params);
    let mut report = TrainReport::default();
    let mut best: Option<(f64, ParamStore)> = None;
    let mut since_best = 0;
    for epoch in 0..cfg.max_epochs {
        let mut order = train_idx.to_vec();
        order.shuffle(&mut rng(derive_seed(cfg.seed, &[1, epoch as u64])));
        let mut total = 0.0;
        for (b, batch) in batches(&order, cfg.batch_size).iter().enumerate() {
            let mut g = Graph::new();
            let seed = derive_seed(cfg.seed, &[2, epoch as u64, b as u64]);
            let loss = loss_fn(model, &mut g, batch, Mode::Train { seed })?;
            let value = g.value(loss)[0];
            if !value.is_finite() {
                return Err(Error::Numeric(format!(
                    "{} loss {value} at epoch {epoch}, batch {b}",
                    model.spec.arch
                )));
            }
            total += value * batch.len() as f64;
            g.backward(loss)?;
            adam.step(&mut model.params, &g.param_grads());
            model.apply_bn_updates(&g);
        }
        report.train_loss.push(total / train_idx.len() as f64);
        report.epochs_run = epoch + 1;
        if val_idx.is_empty() {
            report.best_epoch = epoch;
            continue;
        }
        let mut val = 0.0;
        for chunk in val_idx.chunks(64) {
            let mut g = Graph::new();
            let loss = loss_fn(model, &mut g, chunk, Mode::Eval)?;
            val += g.value(loss)[0] * chunk.len() as f64;
        }
        val /= val_idx.len() as f64;
        report.val_loss.push(val);
        if best.as_ref().is_none_or(|(b, _)| val < *b) {
            best = Some((val, model.params.clone()));
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok(report)
}

fn gather<'a>(samples: &[&'a [f64]], idx: &[usize]) -> Vec<&'a [f64]> {
    idx.iter().map(|&i| samples[i]).collect()
}

fn check_inputs(model: &Model, samples: &[&[f64]], labels: &[usize]) -> Result<()> {
    if samples.len() != labels.len() || samples.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "training set",
            lhs: vec![samples.len()],
            rhs: vec![labels.len()],
        });
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    let len = model.input_len();
    if let Some(s) = samples.iter().find(|s| s.len() != len) {
        return Err(Error::ShapeMismatch {
            op: "training sample",
            lhs: vec![len],
            rhs: vec![s.len()],
        });
    }
    Ok(())
}

fn default_split(labels: &[usize], cfg: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    stratified_split(labels, cfg.val_fraction, derive_seed(cfg.seed, &[0]))
}

fn check_split((train, val): (&[usize], &[usize]), n: usize) -> Result<()> {
    if let Some(&i) = train.iter().chain(val).find(|&&i| i >= n) {
        return Err(Error::InvalidArgument(format!("split index {i} out of range for {n} samples")));
    }
    if val.iter().any(|i| train.contains(i)) {
        return Err(Error::InvalidArgument("train and validation splits overlap".into()));
    }
    Ok(())
}

/// Softmax cross-entropy training of a 2-way classifier.
pub fn train_classifier(model: &mut Model, samples: &[&[f64]], labels: &[usize], cfg: &TrainConfig) -> Result<TrainReport> {
    let (train, val) = default_split(labels, cfg);
    train_classifier_split(model, samples, labels, (&train, &val), cfg)
}

/// As [`train_classifier`] with the caller's `(train, val)` index split;
/// `val` only drives early stopping.
pub fn train_classifier_split(
    model: &mut Model,
    samples: &[&[f64]],
    labels: &[usize],
    split: (&[usize], &[usize]),
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    check_inputs(model, samples, labels)?;
    check_split(split, labels.len())?;
    let loss = |m: &Model, g: &mut Graph, idx: &[usize], mode: Mode| -> Result<Var> {
        let inputs = m.input_batch(g, &gather(samples, idx))?;
        let out = m.forward(g, &inputs, mode)?;
        let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        g.softmax_cross_entropy(out.output, &y)
    };
    fit(model, split, cfg, &loss)
}

/// Every unordered pair within a batch, with `1.0` for same-label pairs.
pub fn batch_pairs(labels: &[usize]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut y = Vec::new();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            left.push(i);
            right.push(j);
            y.push((labels[i] == labels[j]) as u8 as f64);
        }
    }
    (left, right, y)
}

/// Contrastive training of a shared-weight tower on all in-batch pairs.
pub fn train_siamese(model: &mut Model, samples: &[&[f64]], labels: &[usize], cfg: &TrainConfig) -> Result<TrainReport> {
    check_inputs(model, samples, labels)?;
    let margin = cfg.margin;
    let loss = |m: &Model, g: &mut Graph, idx: &[usize], mode: Mode| -> Result<Var> {
        let inputs = m.input_batch(g, &gather(samples, idx))?;
        let emb = m.forward(g, &inputs, mode)?.embedding;
        let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        let (l, r, t) = batch_pairs(&y);
        let a = g.select_rows(emb, &l)?;
        let b = g.select_rows(emb, &r)?;
        let d = g.l2_distance(a, b)?;
        g.contrastive_loss(d, &t, margin)
    };
    let (train, val) = default_split(labels, cfg);
    fit(model, (&train, &val), cfg, &loss)
}

/// Two trained encoders feeding a head on their z-scored, concatenated
/// embeddings.
#[derive(Debug, Clone)]
pub struct Fusion {
    pub temporal: Model,
    pub spatial: Model,
    pub head: Model,
    pub normalizer: Normalizer,
}

impl Fusion {
    fn features(temporal: &Model, spatial: &Model, t: &[&[f64]], s: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let et = temporal.embeddings(t)?;
        let es = spatial.embeddings(s)?;
        Ok(et.into_iter().zip(es).map(|(mut a, b)| {
            a.extend(b);
            a
        }).collect())
    }

    /// Trains the head only; encoders are frozen for the duration.
    pub fn fit_head(
        mut temporal: Model,
        mut spatial: Model,
        mut head: Model,
        t: &[&[f64]],
        s: &[&[f64]],
        labels: &[usize],
        cfg: &TrainConfig,
    ) -> Result<(Self, TrainReport)> {
        if t.len() != s.len() {
            return Err(Error::ShapeMismatch {
                op: "fusion inputs",
                lhs: vec![t.len()],
                rhs: vec![s.len()],
            });
        }
        temporal.set_frozen(true);
        spatial.set_frozen(true);
        let feats = Self::features(&temporal, &spatial, t, s)?;
        let normalizer = Normalizer::fit(&feats)?;
        let z = normalizer.apply_all(&feats)?;
        let rows: Vec<&[f64]> = z.iter().map(Vec::as_slice).collect();
        let report = train_classifier(&mut head, &rows, labels, cfg)?;
        Ok((
            Self {
                temporal,
                spatial,
                head,
                normalizer,
            },
            report,
        ))
    }

    pub fn predict(&self, t: &[&[f64]], s: &[&[f64]]) -> Result<Vec<usize>> {
        let feats = Self::features(&self.temporal, &self.spatial, t, s)?;
        let z = self.normalizer.apply_all(&feats)?;
        let rows: Vec<&[f64]> = z.iter().map(Vec::as_slice).collect();
        self.head.predict(&rows)
    }
}
