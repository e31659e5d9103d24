//! Model checkpoints in the shared binary container (content `"model"`),
//! and a CSV export of embeddings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Model, ModelSpec};
use super::params::{Param, ParamStore};
use crate::data::{decode_container, encode_container, ContainerHeader, EpochLabels};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
}

pub fn encode_checkpoint(model: &Model) -> Result<Vec<u8>> {
    let flat = model.params.flat();
    let mut header = ContainerHeader::new("model", 1, vec![flat.len()]);
    let entries: Vec<ParamEntry> = model
        .params
        .params
        .iter()
        .map(|p| ParamEntry {
            name: p.name.clone(),
            shape: p.shape.clone(),
            trainable: p.trainable,
        })
        .collect();
    header.meta.insert("spec".into(), serde_json::to_value(&model.spec)?);
    header.meta.insert("params".into(), serde_json::to_value(entries)?);
    encode_container(&header, &flat)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model> {
    let (header, values) = decode_container(bytes)?;
    if header.content != "model" {
        return Err(Error::MalformedHeader(format!("expected model container, found {:?}", header.content)));
    }
    let field = |k: &str| {
        header
            .meta
            .get(k)
            .cloned()
            .ok_or_else(|| Error::MalformedHeader(format!("checkpoint lacks {k:?}")))
    };
    let spec: ModelSpec = serde_json::from_value(field("spec")?)?;
    let entries: Vec<ParamEntry> = serde_json::from_value(field("params")?)?;
    let mut model = Model::new(spec)?;
    if entries.len() != model.params.len() {
        return Err(Error::MalformedHeader(format!(
            "checkpoint has {} tensors, architecture needs {}",
            entries.len(),
            model.params.len()
        )));
    }
    let mut offset = 0;
    let mut store = ParamStore::default();
    for (e, fresh) in entries.into_iter().zip(&model.params.params) {
        let n: usize = e.shape.iter().product();
        if e.shape != fresh.shape || offset + n > values.len() {
            return Err(Error::MalformedHeader(format!("tensor {} has shape {:?}", e.name, e.shape)));
        }
        store.params.push(Param {
            name: e.name,
            shape: e.shape,
            data: values[offset..offset + n].to_vec(),
            trainable: e.trainable,
            frozen: false,
        });
        offset += n;
    }
    model.params = store;
    Ok(model)
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// One row per sample: id, embedding values, then the sample's labels.
pub fn embeddings_to_csv(ids: &[String], embeddings: &[Vec<f64>], labels: &[EpochLabels]) -> Result<String> {
    if ids.len() != embeddings.len() || ids.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "embedding export",
            lhs: vec![ids.len(), embeddings.len()],
            rhs: vec![labels.len()],
        });
    }
    let dim = embeddings.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["sample_id".to_string()];
    head.extend((0..dim).map(|i| format!("e{i}")));
    head.extend(["cl_label", "parameter", "focus_level", "participant"].map(String::from));
    w.write_record(&head)?;
    for ((id, e), l) in ids.iter().zip(embeddings).zip(labels) {
        if e.len() != dim {
            return Err(Error::ShapeMismatch {
                op: "embedding export",
                lhs: vec![dim],
                rhs: vec![e.len()],
            });
        }
        let mut rec = vec![id.clone()];
        rec.extend(e.iter().map(|v| format!("{v:e}")));
        rec.push(l.cl_label.map_or(String::new(), |c| c.to_string()));
        rec.push(l.parameter.to_string());
        rec.push(l.focus_level.get().to_string());
        rec.push(l.participant.clone());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numeric(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numeric(e.to_string()))
}
