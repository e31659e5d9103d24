use serde::{Deserialize, Serialize};

use crate::data::{ClLabel, Epoch, Parameter, SessionKind, TlxRating};
use crate::error::{Error, Result};
use crate::session::ExportBundle;

/// Mean TLX rating above which a sub-session counts as High load.
pub const TLX_THRESHOLD: f64 = 2.0;

/// Levels treated as easy to detect.
pub const EXTREMUM_LEVELS: [u8; 4] = [1, 2, 9, 10];

/// High iff the mean of the three ratings exceeds 2; exactly 2 is Low.
pub fn tlx_to_label(rating: &TlxRating) -> ClLabel {
    tlx_to_label_with(rating, TLX_THRESHOLD)
}

pub fn tlx_to_label_with(rating: &TlxRating, threshold: f64) -> ClLabel {
    if rating.mean() > threshold {
        ClLabel::High
    } else {
        ClLabel::Low
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubSessionKey {
    pub participant: String,
    pub session: SessionKind,
    pub parameter: Parameter,
}

/// Label of each non-practice sub-session in an exported session.
pub fn sub_session_labels(bundle: &ExportBundle, threshold: f64) -> Result<Vec<(SubSessionKey, ClLabel)>> {
    bundle
        .tlx
        .iter()
        .filter(|r| !r.practice)
        .map(|r| {
            let parameter = *bundle
                .parameter_order
                .get(r.sub_session)
                .ok_or_else(|| Error::invalid("sub_session", r.sub_session))?;
            Ok((
                SubSessionKey {
                    participant: r.participant.clone(),
                    session: r.session,
                    parameter,
                },
                tlx_to_label_with(r, threshold),
            ))
        })
        .collect()
}

/// Copies each sub-session label onto its epochs; returns how many epochs
/// received a label.
pub fn apply_labels(epochs: &mut [Epoch], labels: &[(SubSessionKey, ClLabel)]) -> usize {
    let mut n = 0;
    for e in epochs.iter_mut() {
        let l = &e.labels;
        let hit = labels.iter().find(|(k, _)| {
            k.participant == l.participant && k.session == l.session && k.parameter == l.parameter
        });
        if let Some((_, label)) = hit {
            e.labels.cl_label = Some(*label);
            n += 1;
        }
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelClass {
    Intermediate,
    Extremum,
}

impl LevelClass {
    pub fn index(&self) -> usize {
        *self as usize
    }
}

/// `(epoch index, class)` for every non-Rough epoch.
pub fn extremum_labels(epochs: &[Epoch], extremum: &[u8]) -> Vec<(usize, LevelClass)> {
    epochs
        .iter()
        .enumerate()
        .filter(|(_, e)| e.labels.parameter != Parameter::Rough)
        .map(|(i, e)| {
            let class = if extremum.contains(&e.labels.focus_level.get()) {
                LevelClass::Extremum
            } else {
                LevelClass::Intermediate
            };
            (i, class)
        })
        .collect()
}
