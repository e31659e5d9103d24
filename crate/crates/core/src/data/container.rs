//! Binary container for epochs, feature tensors and model weights.
//!
//! Layout: the 5 magic bytes `SNLD1`, a little-endian `u32` giving the length
//! of a UTF-8 JSON header, the header itself, then `count * prod(sample_shape)`
//! little-endian IEEE-754 doubles.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::{Epoch, EpochLabels, Matrix};
use super::{EPOCH_SAMPLES, FIXATION_SAMPLES, N_CHANNELS, STIMULUS_SAMPLES};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"SNLD1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerHeader {
    /// "epochs", "features" or "model".
    pub content: String,
    pub version: u32,
    pub count: usize,
    pub sample_shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<EpochLabels>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl ContainerHeader {
    pub fn new(content: &str, count: usize, sample_shape: Vec<usize>) -> Self {
        Self {
            content: content.to_string(),
            version: VERSION,
            count,
            sample_shape,
            labels: Vec::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn values_len(&self) -> usize {
        self.count * self.sample_shape.iter().product::<usize>()
    }
}

pub fn encode_container(header: &ContainerHeader, values: &[f64]) -> Result<Vec<u8>> {
    if values.len() != header.values_len() {
        return Err(Error::ShapeMismatch {
            op: "container",
            lhs: vec![header.values_len()],
            rhs: vec![values.len()],
        });
    }
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(9 + json.len() + values.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_container(bytes: &[u8]) -> Result<(ContainerHeader, Vec<f64>)> {
    if bytes.len() < 9 || &bytes[..5] != MAGIC {
        return Err(Error::MalformedHeader("missing SNLD1 magic".into()));
    }
    let hlen = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let body = bytes
        .get(9..9 + hlen)
        .ok_or_else(|| Error::MalformedHeader("truncated header".into()))?;
    let header: ContainerHeader =
        serde_json::from_slice(body).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let blob = &bytes[9 + hlen..];
    if blob.len() != header.values_len() * 8 {
        return Err(Error::MalformedHeader(format!(
            "payload holds {} bytes, header declares {} values",
            blob.len(),
            header.values_len()
        )));
    }
    let values = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}

pub fn write_container(path: &Path, header: &ContainerHeader, values: &[f64]) -> Result<()> {
    let bytes = encode_container(header, values)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_container(path: &Path) -> Result<(ContainerHeader, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_container(&bytes)
}

pub fn write_epochs(epochs: &[Epoch], path: &Path) -> Result<()> {
    let mut header = ContainerHeader::new("epochs", epochs.len(), vec![N_CHANNELS, EPOCH_SAMPLES]);
    header.labels = epochs.iter().map(|e| e.labels.clone()).collect();
    header
        .meta
        .insert("fixation_samples".into(), FIXATION_SAMPLES.into());
    header
        .meta
        .insert("stimulus_samples".into(), STIMULUS_SAMPLES.into());
    let mut values = Vec::with_capacity(header.values_len());
    for e in epochs {
        values.extend_from_slice(e.concatenated().as_slice());
    }
    write_container(path, &header, &values)
}

pub fn read_epochs(path: &Path) -> Result<Vec<Epoch>> {
    let (header, values) = read_container(path)?;
    if header.content != "epochs" {
        return Err(Error::MalformedHeader(format!(
            "expected epochs container, found {:?}",
            header.content
        )));
    }
    if header.sample_shape != [N_CHANNELS, EPOCH_SAMPLES] {
        if header.sample_shape.first() != Some(&N_CHANNELS) {
            return Err(Error::ChannelCount {
                expected: N_CHANNELS,
                found: header.sample_shape.first().copied().unwrap_or(0),
            });
        }
        return Err(Error::MalformedHeader(format!(
            "epoch shape {:?}",
            header.sample_shape
        )));
    }
    if header.labels.len() != header.count {
        return Err(Error::MalformedHeader("label count differs from epoch count".into()));
    }
    let per = N_CHANNELS * EPOCH_SAMPLES;
    values
        .chunks_exact(per)
        .zip(header.labels)
        .map(|(chunk, labels)| {
            let full = Matrix::from_vec(N_CHANNELS, EPOCH_SAMPLES, chunk.to_vec())?;
            Epoch::from_concatenated(&full, labels)
        })
        .collect()
}
