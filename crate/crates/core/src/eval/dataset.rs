use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ChannelLayout, Epoch, EpochLabels};
use crate::error::{Error, Result};
use crate::features::{stft_spectrogram, welch_band_psd, TopoInterpolator, SPECT_HOP, SPECT_WIN, TOPO_RESOLUTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// 70 band powers, channel-major.
    Psd,
    /// 5 x 32 x 32 band-power maps.
    Topo,
    /// 14 x 25 x 33 min-max scaled spectrograms.
    Spect,
    /// 14 x 256 stimulus samples.
    Raw,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] = [FeatureKind::Psd, FeatureKind::Topo, FeatureKind::Spect, FeatureKind::Raw];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureKind::Psd => "psd",
            FeatureKind::Topo => "topo",
            FeatureKind::Spect => "spect",
            FeatureKind::Raw => "raw",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("feature kind", s))
    }
}

/// Feature rows for each requested representation, with binary labels and
/// the per-sample epoch metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub labels: Vec<usize>,
    pub meta: Vec<EpochLabels>,
    features: BTreeMap<FeatureKind, Vec<Vec<f64>>>,
}

/// Computes one representation for every epoch.
pub fn compute_features(epochs: &[Epoch], kind: FeatureKind, layout: &ChannelLayout) -> Result<Vec<Vec<f64>>> {
    match kind {
        FeatureKind::Psd => Ok(epochs.par_iter().map(|e| welch_band_psd(e).values).collect()),
        FeatureKind::Raw => Ok(epochs.iter().map(|e| e.stimulus.as_slice().to_vec()).collect()),
        FeatureKind::Spect => epochs
            .par_iter()
            .map(|e| Ok(stft_spectrogram(e, SPECT_WIN, SPECT_HOP)?.to_cnn_input()))
            .collect(),
        FeatureKind::Topo => {
            let interp = TopoInterpolator::for_layout(layout, TOPO_RESOLUTION)?;
            epochs
                .par_iter()
                .map(|e| Ok(interp.render(&welch_band_psd(e))?.to_chw()))
                .collect()
        }
    }
}

impl Dataset {
    /// Labels come from each epoch's CL label (High = 1).
    pub fn from_epochs(epochs: &[Epoch], kinds: &[FeatureKind], layout: &ChannelLayout) -> Result<Self> {
        let labels = epochs
            .iter()
            .enumerate()
            .map(|(i, e)| {
                e.labels
                    .cl_label
                    .map(|c| c.index())
                    .ok_or_else(|| Error::invalid("cl_label", format!("missing on epoch {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_labels(epochs, labels, kinds, layout)
    }

    pub fn with_labels(epochs: &[Epoch], labels: Vec<usize>, kinds: &[FeatureKind], layout: &ChannelLayout) -> Result<Self> {
        if labels.len() != epochs.len() {
            return Err(Error::ShapeMismatch {
                op: "dataset labels",
                lhs: vec![epochs.len()],
                rhs: vec![labels.len()],
            });
        }
        let mut features = BTreeMap::new();
        for &k in kinds {
            features.insert(k, compute_features(epochs, k, layout)?);
        }
        Ok(Self {
            labels,
            meta: epochs.iter().map(|e| e.labels.clone()).collect(),
            features,
        })
    }

    /// Builds a dataset from precomputed rows.
    pub fn from_rows(labels: Vec<usize>, meta: Vec<EpochLabels>, features: BTreeMap<FeatureKind, Vec<Vec<f64>>>) -> Result<Self> {
        let n = labels.len();
        if meta.len() != n || features.values().any(|rows| rows.len() != n) {
            return Err(Error::ShapeMismatch {
                op: "dataset",
                lhs: vec![n],
                rhs: features.values().map(Vec::len).chain([meta.len()]).collect(),
            });
        }
        Ok(Self { labels, meta, features })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn kinds(&self) -> Vec<FeatureKind> {
        self.features.keys().copied().collect()
    }

    pub fn rows(&self, kind: FeatureKind) -> Result<&[Vec<f64>]> {
        self.features
            .get(&kind)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidArgument(format!("dataset has no {kind} features")))
    }

    /// Same samples with replaced labels (used for permutation controls).
    pub fn relabel(&self, labels: Vec<usize>) -> Result<Self> {
        Self::from_rows(labels, self.meta.clone(), self.features.clone())
    }

    /// Same rows with the labels randomly permuted; the chance-level control.
    pub fn shuffled(&self, seed: u64) -> Result<Self> {
        let mut labels = self.labels.clone();
        labels.shuffle(&mut crate::util::rng(seed));
        self.relabel(labels)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            meta: idx.iter().map(|&i| self.meta[i].clone()).collect(),
            features: self
                .features
                .iter()
                .map(|(k, rows)| (*k, idx.iter().map(|&i| rows[i].clone()).collect()))
                .collect(),
        }
    }
}

/// Read access to a subset of a dataset. Every sample handed out is logged,
/// which lets the harness prove what a learner looked at.
pub struct DataView<'a> {
    data: &'a Dataset,
    idx: &'a [usize],
    log: &'a Mutex<BTreeSet<usize>>,
}

impl<'a> DataView<'a> {
    pub fn new(data: &'a Dataset, idx: &'a [usize], log: &'a Mutex<BTreeSet<usize>>) -> Self {
        Self { data, idx, log }
    }

    fn record(&self) {
        if let Ok(mut set) = self.log.lock() {
            set.extend(self.idx.iter().copied());
        }
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.record();
        self.idx.iter().map(|&i| self.data.labels[i]).collect()
    }

    pub fn rows(&self, kind: FeatureKind) -> Result<Vec<&'a [f64]>> {
        let rows = self.data.rows(kind)?;
        self.record();
        Ok(self.idx.iter().map(|&i| rows[i].as_slice()).collect())
    }

    pub fn meta(&self) -> Vec<&'a EpochLabels> {
        self.record();
        self.idx.iter().map(|&i| &self.data.meta[i]).collect()
    }
}
