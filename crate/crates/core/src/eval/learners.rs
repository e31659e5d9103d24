use serde::{Deserialize, Serialize};

use super::dataset::{DataView, FeatureKind};
use super::harness::{Fitted, Learner};
use crate::classical::{ClassicalConfig, ClassicalKind, ClassicalModel};
use crate::error::Result;
use crate::features::Normalizer;
use crate::neural::{build, stratified_split, train_classifier, train_classifier_split, Arch, Fusion, Model, TrainConfig};
use crate::util::derive_seed;

/// Z-scores rows with statistics from the training rows only.
fn normalized(norm: &Normalizer, rows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    norm.apply_all(rows)
}

fn as_slices(rows: &[Vec<f64>]) -> Vec<&[f64]> {
    rows.iter().map(Vec::as_slice).collect()
}

/// GNB, LDA or SVM on z-scored feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalLearner {
    pub kind: ClassicalKind,
    pub feature: FeatureKind,
    pub config: ClassicalConfig,
}

impl ClassicalLearner {
    pub fn new(kind: ClassicalKind, feature: FeatureKind) -> Self {
        Self {
            kind,
            feature,
            config: ClassicalConfig::default(),
        }
    }
}

struct FittedClassical {
    feature: FeatureKind,
    norm: Normalizer,
    model: ClassicalModel,
}

impl Learner for ClassicalLearner {
    fn name(&self) -> String {
        format!("{}/{}", self.kind, self.feature)
    }

    fn fit(&self, train: &DataView<'_>, _seed: u64) -> Result<Box<dyn Fitted>> {
        let rows = train.rows(self.feature)?;
        let norm = Normalizer::fit(&rows)?;
        let x = normalized(&norm, &rows)?;
        let model = ClassicalModel::fit(self.kind, &x, &train.labels(), &self.config)?;
        Ok(Box::new(FittedClassical {
            feature: self.feature,
            norm,
            model,
        }))
    }
}

impl Fitted for FittedClassical {
    fn predict(&self, test: &DataView<'_>) -> Result<Vec<Vec<usize>>> {
        let x = normalized(&self.norm, &test.rows(self.feature)?)?;
        Ok(vec![x.iter().map(|r| self.model.predict(r)).collect()])
    }
}

/// One of the neural classifiers on its matching representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralLearner {
    pub arch: Arch,
    pub feature: FeatureKind,
    pub train: TrainConfig,
}

struct Encoder {
    feature: FeatureKind,
    norm: Normalizer,
    model: Model,
}

impl Encoder {
    fn fit(arch: Arch, feature: FeatureKind, train: &DataView<'_>, cfg: &TrainConfig, seed: u64) -> Result<Self> {
        Self::fit_split(arch, feature, train, None, cfg, seed)
    }

    fn fit_split(
        arch: Arch,
        feature: FeatureKind,
        train: &DataView<'_>,
        split: Option<(&[usize], &[usize])>,
        cfg: &TrainConfig,
        seed: u64,
    ) -> Result<Self> {
        let rows = train.rows(feature)?;
        let norm = Normalizer::fit(&rows)?;
        let x = normalized(&norm, &rows)?;
        let mut model = Model::new(build(arch, seed)?)?;
        let cfg = cfg.with_seed(seed);
        match split {
            Some(split) => train_classifier_split(&mut model, &as_slices(&x), &train.labels(), split, &cfg)?,
            None => train_classifier(&mut model, &as_slices(&x), &train.labels(), &cfg)?,
        };
        Ok(Self { feature, norm, model })
    }

    fn inputs(&self, view: &DataView<'_>) -> Result<Vec<Vec<f64>>> {
        normalized(&self.norm, &view.rows(self.feature)?)
    }
}

impl Learner for NeuralLearner {
    fn name(&self) -> String {
        format!("{}/{}", self.arch, self.feature)
    }

    fn fit(&self, train: &DataView<'_>, seed: u64) -> Result<Box<dyn Fitted>> {
        Ok(Box::new(Encoder::fit(self.arch, self.feature, train, &self.train, seed)?))
    }
}

impl Fitted for Encoder {
    fn predict(&self, test: &DataView<'_>) -> Result<Vec<Vec<usize>>> {
        let x = self.inputs(test)?;
        Ok(vec![self.model.predict(&as_slices(&x))?])
    }
}

/// Temporal and spatial encoders trained on the fold, then a head on their
/// frozen embeddings. Also reports each encoder alone on the same fold.
///
/// Both encoders share one early-stopping split of the training fold; the
/// head then fits on embeddings of the whole fold.
pub struct FusionLearner {
    pub temporal: (Arch, FeatureKind),
    pub spatial: (Arch, FeatureKind),
    pub encoder_train: TrainConfig,
    pub head_train: TrainConfig,
}

impl Default for FusionLearner {
    fn default() -> Self {
        Self {
            temporal: (Arch::EegNet, FeatureKind::Raw),
            spatial: (Arch::Topo(crate::neural::Variant::A), FeatureKind::Topo),
            encoder_train: TrainConfig {
                lr: 3e-3,
                max_epochs: 20,
                patience: 5,
                ..TrainConfig::default()
            },
            head_train: TrainConfig::default(),
        }
    }
}

struct FittedFusion {
    temporal: Encoder,
    spatial: Encoder,
    fusion: Fusion,
}

impl Learner for FusionLearner {
    fn name(&self) -> String {
        "fusion".into()
    }

    fn heads(&self) -> Vec<String> {
        vec![
            self.name(),
            format!("{}/{}", self.temporal.0, self.temporal.1),
            format!("{}/{}", self.spatial.0, self.spatial.1),
        ]
    }

    fn fit(&self, train: &DataView<'_>, seed: u64) -> Result<Box<dyn Fitted>> {
        let (ta, tf) = self.temporal;
        let (sa, sf) = self.spatial;
        let labels = train.labels();
        let (enc_idx, val_idx) = stratified_split(&labels, self.encoder_train.val_fraction, derive_seed(seed, &[3]));
        let split = (!val_idx.is_empty()).then_some((enc_idx.as_slice(), val_idx.as_slice()));
        let temporal = Encoder::fit_split(ta, tf, train, split, &self.encoder_train, derive_seed(seed, &[0]))?;
        let spatial = Encoder::fit_split(sa, sf, train, split, &self.encoder_train, derive_seed(seed, &[1]))?;
        let tx = temporal.inputs(train)?;
        let sx = spatial.inputs(train)?;
        let head_seed = derive_seed(seed, &[2]);
        let head = Model::new(build(Arch::FusionMlp, head_seed)?)?;
        let (fusion, _) = Fusion::fit_head(
            temporal.model.clone(),
            spatial.model.clone(),
            head,
            &as_slices(&tx),
            &as_slices(&sx),
            &labels,
            &self.head_train.with_seed(head_seed),
        )?;
        Ok(Box::new(FittedFusion {
            temporal,
            spatial,
            fusion,
        }))
    }
}

impl Fitted for FittedFusion {
    fn predict(&self, test: &DataView<'_>) -> Result<Vec<Vec<usize>>> {
        let tx = self.temporal.inputs(test)?;
        let sx = self.spatial.inputs(test)?;
        let (t, s) = (as_slices(&tx), as_slices(&sx));
        Ok(vec![
            self.fusion.predict(&t, &s)?,
            self.temporal.model.predict(&t)?,
            self.spatial.model.predict(&s)?,
        ])
    }
}
