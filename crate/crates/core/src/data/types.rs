use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EPOCH_SAMPLES, FIXATION_SAMPLES, N_CHANNELS, SAMPLE_RATE, STIMULUS_SAMPLES};
use crate::error::{Error, Result};

/// Dense row-major matrix; rows are channels, columns are samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "matrix",
                lhs: vec![rows, cols],
                rhs: vec![data.len()],
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Copy of columns `[start, end)`.
    pub fn columns(&self, start: usize, end: usize) -> Matrix {
        Matrix::from_fn(self.rows, end - start, |r, c| self.get(r, start + c))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

macro_rules! string_enum {
    ($name:ident, $field:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub fn as_str(&self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                $(if s.eq_ignore_ascii_case($text) { return Ok($name::$variant); })+
                Err(Error::invalid($field, s))
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

/// The six stimulus conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parameter {
    Noise,
    Pitch,
    Rough,
    AudioComb,
    Visual,
    VisualComb,
}

string_enum!(Parameter, "parameter", {
    Noise => "Noise",
    Pitch => "Pitch",
    Rough => "Rough",
    AudioComb => "AudioComb",
    Visual => "Visual",
    VisualComb => "VisualComb",
});

impl Parameter {
    pub const ALL: [Parameter; 6] = [
        Parameter::Noise,
        Parameter::Pitch,
        Parameter::Rough,
        Parameter::AudioComb,
        Parameter::Visual,
        Parameter::VisualComb,
    ];

    /// Lowercase name used in file names and URLs.
    pub fn slug(&self) -> &'static str {
        match self {
            Parameter::Noise => "noise",
            Parameter::Pitch => "pitch",
            Parameter::Rough => "rough",
            Parameter::AudioComb => "audiocomb",
            Parameter::Visual => "visual",
            Parameter::VisualComb => "visualcomb",
        }
    }

    pub fn index(&self) -> usize {
        Parameter::ALL.iter().position(|p| p == self).unwrap()
    }

    /// Participant-facing code, "Type 1" through "Type 6".
    pub fn code(&self) -> String {
        format!("Type {}", self.index() + 1)
    }

    pub fn is_acoustic(&self) -> bool {
        !matches!(self, Parameter::Visual)
    }

    pub fn has_image(&self) -> bool {
        matches!(self, Parameter::Visual | Parameter::VisualComb)
    }

    /// Cognitive-load class attributed to the condition in the similarity study.
    pub fn nominal_cl(&self) -> ClLabel {
        match self {
            Parameter::Visual | Parameter::VisualComb => ClLabel::Low,
            _ => ClLabel::High,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SessionKind {
    /// Immediate recall: rate each stimulus 1-10 within 10 s.
    IR,
    /// Compared recall: press Yes on the target level within 3 s.
    CR,
}

string_enum!(SessionKind, "session", { IR => "IR", CR => "CR" });

impl SessionKind {
    pub fn response_window_ms(&self) -> u32 {
        match self {
            SessionKind::IR => 10_000,
            SessionKind::CR => 3_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClLabel {
    Low,
    High,
}

string_enum!(ClLabel, "cl_label", { Low => "Low", High => "High" });

impl ClLabel {
    /// Class index used by the learners; High is the positive class.
    pub fn index(&self) -> usize {
        match self {
            ClLabel::Low => 0,
            ClLabel::High => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            ClLabel::Low
        } else {
            ClLabel::High
        }
    }
}

/// Image focus level, 1 (fully defocused) to 10 (sharp).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct FocusLevel(u8);

impl FocusLevel {
    pub fn new(level: u8) -> Result<Self> {
        if (1..=10).contains(&level) {
            Ok(Self(level))
        } else {
            Err(Error::invalid("focus_level", level))
        }
    }

    pub fn get(&self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = FocusLevel> {
        (1..=10).map(FocusLevel)
    }
}

impl<'de> Deserialize<'de> for FocusLevel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        FocusLevel::new(v).map_err(serde::de::Error::custom)
    }
}

/// Participant answer to a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Response {
    Rating(u8),
    Yes,
    No,
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Response::Rating(r) => write!(f, "{r}"),
            Response::Yes => f.write_str("yes"),
            Response::No => f.write_str("no"),
        }
    }
}

impl FromStr for Response {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("yes") {
            return Ok(Response::Yes);
        }
        if s.eq_ignore_ascii_case("no") {
            return Ok(Response::No);
        }
        match s.parse::<u8>() {
            Ok(r) if (1..=10).contains(&r) => Ok(Response::Rating(r)),
            _ => Err(Error::invalid("response", s)),
        }
    }
}

impl Serialize for Response {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Response::Rating(r) => s.serialize_u8(*r),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Response {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => Response::from_str(&n.to_string()).map_err(serde::de::Error::custom),
            Raw::Text(t) => Response::from_str(&t).map_err(serde::de::Error::custom),
        }
    }
}

/// One protocol trial as aligned to the recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMarker {
    /// Sample index where the fixation cross starts.
    pub onset: usize,
    pub parameter: Parameter,
    pub focus_level: FocusLevel,
    pub session: SessionKind,
    pub participant: String,
    pub response: Option<Response>,
    pub latency_ms: Option<u32>,
}

impl TrialMarker {
    pub fn validate(&self) -> Result<()> {
        match (self.session, self.response) {
            (SessionKind::IR, Some(Response::Yes | Response::No)) => {
                return Err(Error::invalid("response", self.response.unwrap()))
            }
            (SessionKind::CR, Some(Response::Rating(r))) => return Err(Error::invalid("response", r)),
            _ => {}
        }
        if let Some(l) = self.latency_ms {
            if l > self.session.response_window_ms() {
                return Err(Error::invalid("latency_ms", l));
            }
        }
        Ok(())
    }
}

/// A continuous recording with its trial markers.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub sample_rate: f64,
    pub data: Matrix,
    pub markers: Vec<TrialMarker>,
}

impl RawRecording {
    pub fn new(data: Matrix, markers: Vec<TrialMarker>) -> Result<Self> {
        if data.rows() != N_CHANNELS {
            return Err(Error::ChannelCount {
                expected: N_CHANNELS,
                found: data.rows(),
            });
        }
        for (i, pair) in markers.windows(2).enumerate() {
            if pair[1].onset <= pair[0].onset {
                return Err(Error::NonMonotoneMarkers { index: i + 1 });
            }
        }
        for m in &markers {
            m.validate()?;
            if m.onset + EPOCH_SAMPLES > data.cols() {
                return Err(Error::MarkerOutOfBounds {
                    onset: m.onset,
                    needed: m.onset + EPOCH_SAMPLES,
                    len: data.cols(),
                });
            }
        }
        Ok(Self {
            sample_rate: SAMPLE_RATE,
            data,
            markers,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLabels {
    /// Filled in by the labeling step; absent straight after segmentation.
    pub cl_label: Option<ClLabel>,
    pub parameter: Parameter,
    pub focus_level: FocusLevel,
    pub session: SessionKind,
    pub participant: String,
}

/// One trial's fixation and stimulus segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub fixation: Matrix,
    pub stimulus: Matrix,
    pub labels: EpochLabels,
}

impl Epoch {
    pub fn new(fixation: Matrix, stimulus: Matrix, labels: EpochLabels) -> Result<Self> {
        for (m, width) in [(&fixation, FIXATION_SAMPLES), (&stimulus, STIMULUS_SAMPLES)] {
            if m.rows() != N_CHANNELS {
                return Err(Error::ChannelCount {
                    expected: N_CHANNELS,
                    found: m.rows(),
                });
            }
            if m.cols() != width {
                return Err(Error::ShapeMismatch {
                    op: "epoch",
                    lhs: vec![N_CHANNELS, width],
                    rhs: vec![m.rows(), m.cols()],
                });
            }
            if !m.is_finite() {
                return Err(Error::Degenerate("epoch contains non-finite samples".into()));
            }
        }
        Ok(Self {
            fixation,
            stimulus,
            labels,
        })
    }

    /// Fixation and stimulus joined along time, 14 x 320.
    pub fn concatenated(&self) -> Matrix {
        let f = FIXATION_SAMPLES;
        Matrix::from_fn(N_CHANNELS, EPOCH_SAMPLES, |r, c| {
            if c < f {
                self.fixation.get(r, c)
            } else {
                self.stimulus.get(r, c - f)
            }
        })
    }

    pub fn from_concatenated(full: &Matrix, labels: EpochLabels) -> Result<Self> {
        Epoch::new(
            full.columns(0, FIXATION_SAMPLES),
            full.columns(FIXATION_SAMPLES, EPOCH_SAMPLES),
            labels,
        )
    }
}

/// Lowest and highest admissible questionnaire answer.
pub const TLX_SCALE: (u8, u8) = (1, 4);

/// Post-sub-session workload questionnaire (subset of NASA-TLX).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlxRating {
    pub effort: u8,
    pub mental_demand: u8,
    pub frustration: u8,
    pub participant: String,
    pub session: SessionKind,
    pub sub_session: usize,
    #[serde(default)]
    pub practice: bool,
}

impl TlxRating {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = TLX_SCALE;
        for (name, v) in [
            ("effort", self.effort),
            ("mental_demand", self.mental_demand),
            ("frustration", self.frustration),
        ] {
            if !(lo..=hi).contains(&v) {
                return Err(Error::InvalidValue {
                    field: "tlx",
                    value: format!("{name}={v}"),
                });
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        (self.effort as f64 + self.mental_demand as f64 + self.frustration as f64) / 3.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn marker(onset: usize) -> TrialMarker {
        TrialMarker {
            onset,
            parameter: Parameter::Pitch,
            focus_level: FocusLevel::new(3).unwrap(),
            session: SessionKind::IR,
            participant: "p01".into(),
            response: None,
            latency_ms: None,
        }
    }

    #[test]
    fn enums_reject_unknown_strings() {
        assert!("Loudness".parse::<Parameter>().is_err());
        assert!("XR".parse::<SessionKind>().is_err());
        assert!("medium".parse::<ClLabel>().is_err());
        assert_eq!("audiocomb".parse::<Parameter>().unwrap(), Parameter::AudioComb);
        assert!(serde_json::from_str::<Parameter>("\"Sharpness\"").is_err());
    }

    #[test]
    fn focus_level_bounds() {
        assert!(FocusLevel::new(0).is_err());
        assert!(FocusLevel::new(11).is_err());
        assert!(serde_json::from_str::<FocusLevel>("11").is_err());
        assert_eq!(FocusLevel::all().count(), 10);
    }

    #[test]
    fn recording_with_13_rows_is_rejected() {
        let err = RawRecording::new(Matrix::zeros(13, 400), vec![]).unwrap_err();
        assert!(matches!(err, Error::ChannelCount { expected: 14, found: 13 }));
    }

    #[test]
    fn marker_window_must_fit() {
        let err = RawRecording::new(Matrix::zeros(14, 300), vec![marker(100)]).unwrap_err();
        assert!(matches!(
            err,
            Error::MarkerOutOfBounds {
                onset: 100,
                needed: 420,
                len: 300
            }
        ));
        assert!(RawRecording::new(Matrix::zeros(14, 420), vec![marker(100)]).is_ok());
    }

    #[test]
    fn markers_must_increase() {
        let err = RawRecording::new(Matrix::zeros(14, 2000), vec![marker(500), marker(500)]).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneMarkers { index: 1 }));
    }

    #[test]
    fn latency_and_response_rules() {
        let mut m = marker(0);
        m.latency_ms = Some(10_001);
        assert!(m.validate().is_err());
        m.latency_ms = Some(9_000);
        m.response = Some(Response::Rating(7));
        assert!(m.validate().is_ok());
        m.session = SessionKind::CR;
        assert!(m.validate().is_err());
        m.response = Some(Response::Yes);
        m.latency_ms = Some(3_200);
        assert!(m.validate().is_err());
    }

    #[test]
    fn tlx_scale_is_one_to_four() {
        let mut t = TlxRating {
            effort: 4,
            mental_demand: 1,
            frustration: 2,
            participant: "p".into(),
            session: SessionKind::IR,
            sub_session: 0,
            practice: false,
        };
        assert!(t.validate().is_ok());
        t.frustration = 0;
        assert!(t.validate().is_err());
        t.frustration = 5;
        assert!(t.validate().is_err());
    }

    #[test]
    fn coded_names() {
        assert_eq!(Parameter::Noise.code(), "Type 1");
        assert_eq!(Parameter::VisualComb.code(), "Type 6");
    }
}
