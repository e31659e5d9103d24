use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::harness::SCHEMA_VERSION;
use super::metrics::MeanStd;
use crate::data::{Parameter, Response, SessionKind};
use crate::error::{Error, Result};
use crate::session::{ExportBundle, TrialLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterAccuracy {
    pub parameter: Parameter,
    pub accuracy: MeanStd,
    /// Accuracy for true levels 1..=10.
    pub per_level: Vec<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingReport {
    pub schema_version: u32,
    pub kind: SessionKind,
    pub participants: usize,
    pub rows: Vec<ParameterAccuracy>,
}

/// IR: the rating equals the true level. CR: "yes" exactly on target trials,
/// so a timeout counts as a rejection.
pub fn trial_correct(kind: SessionKind, t: &TrialLog) -> bool {
    match kind {
        SessionKind::IR => t.response == Some(Response::Rating(t.focus_level.get())),
        SessionKind::CR => {
            let target = t.cr_target_level == Some(t.focus_level.get());
            (t.response == Some(Response::Yes)) == target
        }
    }
}

/// Per-participant accuracy averaged across participants, by parameter and
/// by true level. Practice trials are ignored.
pub fn mapping_accuracy(sessions: &[ExportBundle]) -> Result<MappingReport> {
    let kind = sessions
        .first()
        .ok_or_else(|| Error::InvalidArgument("no sessions".into()))?
        .kind;
    if sessions.iter().any(|s| s.kind != kind) {
        return Err(Error::InvalidArgument("IR and CR sessions mixed".into()));
    }
    // participant -> parameter -> level -> (correct, total)
    let mut tally: BTreeMap<&str, BTreeMap<Parameter, [(usize, usize); 10]>> = BTreeMap::new();
    for s in sessions {
        let by_param = tally.entry(s.participant.as_str()).or_default();
        for t in s.trials.iter().filter(|t| !t.practice) {
            let cell = &mut by_param.entry(t.parameter).or_insert([(0, 0); 10])[t.focus_level.get() as usize - 1];
            cell.0 += trial_correct(kind, t) as usize;
            cell.1 += 1;
        }
    }
    let rows = Parameter::ALL
        .iter()
        .map(|&p| {
            let mut overall = Vec::new();
            let mut levels: Vec<Vec<f64>> = vec![Vec::new(); 10];
            for by_param in tally.values() {
                let Some(cells) = by_param.get(&p) else { continue };
                let (c, n) = cells.iter().fold((0, 0), |(a, b), (c, n)| (a + c, b + n));
                if n > 0 {
                    overall.push(c as f64 / n as f64);
                }
                for (l, (c, n)) in cells.iter().enumerate() {
                    if *n > 0 {
                        levels[l].push(*c as f64 / *n as f64);
                    }
                }
            }
            ParameterAccuracy {
                parameter: p,
                accuracy: MeanStd::of(&overall),
                per_level: levels.iter().map(|v| MeanStd::of(v)).collect(),
            }
        })
        .collect();
    Ok(MappingReport {
        schema_version: SCHEMA_VERSION,
        kind,
        participants: tally.len(),
        rows,
    })
}
