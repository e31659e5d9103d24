//! IR/CR protocol state machine.
//!
//! A session holds six sub-sessions, one per stimulus parameter in a seeded
//! order. Each sub-session presents ten focus levels three times in a seeded
//! shuffle. A trial runs fixation (500 ms), stimulus (2000 ms) and a response
//! window whose length depends on the session kind. A TLX questionnaire closes
//! every sub-session. Time is passed in by the caller as milliseconds on any
//! monotone clock, which keeps the machine deterministic under test.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    markers_to_csv, FocusLevel, Parameter, Response, SessionKind, TlxRating, TrialMarker, SAMPLE_RATE,
};
use crate::util::{derive_seed, rng};

pub const FIXATION_MS: u64 = 500;
pub const STIMULUS_MS: u64 = 2000;
pub const REPEATS_PER_LEVEL: usize = 3;
pub const TRIALS_PER_SUB_SESSION: usize = 10 * REPEATS_PER_LEVEL;
pub const SUB_SESSIONS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("unprocessable: {0}")]
    Invalid(String),
}

pub type SessionResult<T> = std::result::Result<T, SessionError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub participant: String,
    pub kind: SessionKind,
    pub seed: u64,
    #[serde(default)]
    pub practice: bool,
}

/// What the client needs to run one trial. Parameters appear only by code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDescriptor {
    pub trial_id: usize,
    pub sub_session: usize,
    pub index_in_sub_session: usize,
    pub stimulus_type: String,
    pub audio_url: Option<String>,
    pub image_url: Option<String>,
    pub fixation_ms: u64,
    pub stimulus_ms: u64,
    pub response_window_ms: u64,
    /// "rating" (1-10 buttons) or "yes" (single detection button).
    pub response_kind: String,
    pub cr_target_level: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextTrial {
    Trial(TrialDescriptor),
    TlxRequired { sub_session: usize },
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub trial_id: usize,
    pub sub_session: usize,
    pub parameter: Parameter,
    pub focus_level: FocusLevel,
    pub cr_target_level: Option<u8>,
    /// Fixation onset, milliseconds since session creation.
    pub onset_ms: u64,
    pub response: Option<Response>,
    pub latency_ms: Option<u32>,
    pub timed_out: bool,
    pub practice: bool,
}

/// Body of a response post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseInput {
    pub trial_id: usize,
    #[serde(default)]
    pub response: Option<Response>,
    #[serde(default)]
    pub latency_ms: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlxInput {
    pub effort: u8,
    pub mental_demand: u8,
    pub frustration: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportBundle {
    pub participant: String,
    pub kind: SessionKind,
    pub seed: u64,
    pub parameter_order: Vec<Parameter>,
    pub cr_targets: Vec<u8>,
    pub trials: Vec<TrialLog>,
    pub tlx: Vec<TlxRating>,
    /// Same trials in the recording marker format, onsets in samples.
    pub markers_csv: String,
}

#[derive(Debug, Clone)]
struct OpenTrial {
    trial_id: usize,
    issued_ms: u64,
    parameter: Parameter,
    level: FocusLevel,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub config: SessionConfig,
    created_ms: u64,
    order: Vec<Parameter>,
    queues: Vec<Vec<FocusLevel>>,
    cr_targets: Vec<FocusLevel>,
    sub: usize,
    pos: usize,
    current: Option<OpenTrial>,
    awaiting_tlx: bool,
    logs: Vec<TrialLog>,
    tlx: Vec<TlxRating>,
}

/// URL-safe stimulus code, e.g. `type3`.
pub fn stimulus_code(p: Parameter) -> String {
    format!("type{}", p.index() + 1)
}

pub fn parameter_from_code(code: &str) -> Option<Parameter> {
    let n: usize = code.strip_prefix("type")?.parse().ok()?;
    Parameter::ALL.get(n.checked_sub(1)?).copied()
}

impl Session {
    pub fn new(config: SessionConfig, now_ms: u64) -> SessionResult<Self> {
        if config.participant.trim().is_empty() {
            return Err(SessionError::Invalid("participant id is empty".into()));
        }
        let mut order = Parameter::ALL.to_vec();
        order.shuffle(&mut rng(derive_seed(config.seed, &[0])));
        let queues = (0..SUB_SESSIONS)
            .map(|s| {
                let mut q: Vec<FocusLevel> = FocusLevel::all()
                    .flat_map(|l| std::iter::repeat_n(l, REPEATS_PER_LEVEL))
                    .collect();
                q.shuffle(&mut rng(derive_seed(config.seed, &[1, s as u64])));
                q
            })
            .collect();
        let mut r = rng(derive_seed(config.seed, &[2]));
        let cr_targets = (0..SUB_SESSIONS)
            .map(|_| FocusLevel::new(r.random_range(1..=10)).expect("in range"))
            .collect();
        Ok(Self {
            config,
            created_ms: now_ms,
            order,
            queues,
            cr_targets,
            sub: 0,
            pos: 0,
            current: None,
            awaiting_tlx: false,
            logs: Vec::new(),
            tlx: Vec::new(),
        })
    }

    pub fn parameter_order(&self) -> &[Parameter] {
        &self.order
    }

    pub fn queue(&self, sub_session: usize) -> &[FocusLevel] {
        &self.queues[sub_session]
    }

    pub fn logs(&self) -> &[TrialLog] {
        &self.logs
    }

    pub fn tlx_ratings(&self) -> &[TlxRating] {
        &self.tlx
    }

    pub fn is_complete(&self) -> bool {
        self.sub >= SUB_SESSIONS
    }

    fn window_ms(&self) -> u64 {
        self.config.kind.response_window_ms() as u64
    }

    fn deadline(&self, t: &OpenTrial) -> u64 {
        t.issued_ms + FIXATION_MS + STIMULUS_MS + self.window_ms()
    }

    fn cr_target(&self) -> Option<u8> {
        (self.config.kind == SessionKind::CR).then(|| self.cr_targets[self.sub].get())
    }

    fn close(&mut self, response: Option<Response>, latency_ms: Option<u32>, timed_out: bool) {
        let t = self.current.take().expect("a trial is open");
        self.logs.push(TrialLog {
            trial_id: t.trial_id,
            sub_session: self.sub,
            parameter: t.parameter,
            focus_level: t.level,
            cr_target_level: self.cr_target(),
            onset_ms: t.issued_ms.saturating_sub(self.created_ms),
            response,
            latency_ms,
            timed_out,
            practice: self.config.practice,
        });
        self.pos += 1;
        if self.pos == TRIALS_PER_SUB_SESSION {
            self.awaiting_tlx = true;
        }
    }

    // Closes the open trial as a timeout once its window has passed.
    fn expire(&mut self, now_ms: u64) {
        if let Some(t) = &self.current {
            if now_ms > self.deadline(t) {
                self.close(None, None, true);
            }
        }
    }

    /// Serves the next trial. An open trial whose response window has passed
    /// is logged without a response first; one still running is a conflict.
    pub fn next(&mut self, now_ms: u64) -> SessionResult<NextTrial> {
        self.expire(now_ms);
        if let Some(t) = &self.current {
            return Err(SessionError::Conflict(format!("trial {} is still running", t.trial_id)));
        }
        if self.is_complete() {
            return Ok(NextTrial::Complete);
        }
        if self.awaiting_tlx {
            return Ok(NextTrial::TlxRequired { sub_session: self.sub });
        }
        let parameter = self.order[self.sub];
        let level = self.queues[self.sub][self.pos];
        let trial_id = self.sub * TRIALS_PER_SUB_SESSION + self.pos;
        self.current = Some(OpenTrial {
            trial_id,
            issued_ms: now_ms,
            parameter,
            level,
        });
        let code = stimulus_code(parameter);
        let lv = level.get();
        Ok(NextTrial::Trial(TrialDescriptor {
            trial_id,
            sub_session: self.sub,
            index_in_sub_session: self.pos,
            audio_url: parameter
                .is_acoustic()
                .then(|| format!("/stimuli/{code}/{lv}.wav")),
            image_url: parameter.has_image().then(|| format!("/stimuli/{code}/{lv}.pgm")),
            stimulus_type: parameter.code(),
            fixation_ms: FIXATION_MS,
            stimulus_ms: STIMULUS_MS,
            response_window_ms: self.window_ms(),
            response_kind: match self.config.kind {
                SessionKind::IR => "rating".into(),
                SessionKind::CR => "yes".into(),
            },
            cr_target_level: self.cr_target(),
        }))
    }

    /// Records the participant's answer to the current trial.
    pub fn respond(&mut self, input: &ResponseInput, now_ms: u64) -> SessionResult<TrialLog> {
        let Some(open) = self.current.clone() else {
            return Err(SessionError::Conflict(format!("trial {} is not open", input.trial_id)));
        };
        if open.trial_id != input.trial_id {
            return Err(SessionError::Conflict(format!(
                "trial {} is not the current trial {}",
                input.trial_id, open.trial_id
            )));
        }
        if now_ms > self.deadline(&open) {
            self.close(None, None, true);
            return Err(SessionError::Conflict(format!(
                "response window of trial {} has closed",
                input.trial_id
            )));
        }
        if now_ms < open.issued_ms + FIXATION_MS + STIMULUS_MS {
            return Err(SessionError::Conflict("response phase has not started".into()));
        }
        match (self.config.kind, input.response) {
            (SessionKind::IR, Some(Response::Yes | Response::No))
            | (SessionKind::CR, Some(Response::Rating(_))) => {
                return Err(SessionError::Invalid(format!(
                    "response kind does not fit a {} session",
                    self.config.kind
                )))
            }
            _ => {}
        }
        if let Some(l) = input.latency_ms {
            if l as u64 > self.window_ms() {
                return Err(SessionError::Invalid(format!("latency {l} ms exceeds the window")));
            }
        }
        let timed_out = input.response.is_none();
        self.close(input.response, input.latency_ms, timed_out);
        Ok(self.logs.last().cloned().expect("just logged"))
    }

    /// Accepts the questionnaire that closes the current sub-session.
    pub fn submit_tlx(&mut self, input: &TlxInput) -> SessionResult<TlxRating> {
        if !self.awaiting_tlx {
            return Err(SessionError::Conflict("no sub-session is awaiting a questionnaire".into()));
        }
        let rating = TlxRating {
            effort: input.effort,
            mental_demand: input.mental_demand,
            frustration: input.frustration,
            participant: self.config.participant.clone(),
            session: self.config.kind,
            sub_session: self.sub,
            practice: self.config.practice,
        };
        rating.validate().map_err(|e| SessionError::Invalid(e.to_string()))?;
        self.tlx.push(rating.clone());
        self.awaiting_tlx = false;
        self.sub += 1;
        self.pos = 0;
        Ok(rating)
    }

    /// Non-practice trials as recording markers; onsets are converted from
    /// session time to samples at the headset rate.
    pub fn markers(&self) -> Vec<TrialMarker> {
        self.logs
            .iter()
            .filter(|l| !l.practice)
            .map(|l| TrialMarker {
                onset: (l.onset_ms as f64 * SAMPLE_RATE / 1000.0).round() as usize,
                parameter: l.parameter,
                focus_level: l.focus_level,
                session: self.config.kind,
                participant: self.config.participant.clone(),
                response: l.response,
                latency_ms: l.latency_ms,
            })
            .collect()
    }

    /// Logs bundle. Only available once the protocol has finished, so the
    /// real parameter names never reach a running client.
    pub fn export(&self) -> SessionResult<ExportBundle> {
        if !self.is_complete() {
            return Err(SessionError::Conflict("session is still running".into()));
        }
        Ok(ExportBundle {
            participant: self.config.participant.clone(),
            kind: self.config.kind,
            seed: self.config.seed,
            parameter_order: self.order.clone(),
            cr_targets: self.cr_targets.iter().map(|l| l.get()).collect(),
            trials: self.logs.iter().filter(|l| !l.practice).cloned().collect(),
            tlx: self.tlx.iter().filter(|t| !t.practice).cloned().collect(),
            markers_csv: markers_to_csv(&self.markers()).map_err(|e| SessionError::Invalid(e.to_string()))?,
        })
    }
}
