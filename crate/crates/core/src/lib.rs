//! Toolkit for EEG-based cognitive-load studies of sonification stimuli.
//!
//! The crate covers the whole offline chain:
//!
//! * [`stimulus`] synthesizes the ten-level psychoacoustic scales (noise mix,
//!   pitch ladder, roughness, combined) and the blurred image levels.
//! * [`preprocess`] epochs raw 14-channel recordings, removes the fixation
//!   baseline, applies a zero-phase Butterworth bandpass and rejects noisy
//!   epochs.
//! * [`features`] derives band-power vectors, topographic images and STFT
//!   spectrograms.
//! * [`classical`] and [`neural`] hold the classifiers; [`neural`] carries its
//!   own reverse-mode autodiff engine.
//! * [`eval`] labels epochs, runs repeated stratified cross-validation and
//!   produces the report tables, including the pairwise similarity study.
//! * [`session`] is the IR/CR protocol state machine used by the HTTP service.

pub mod classical;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod neural;
pub mod preprocess;
pub mod session;
pub mod stimulus;
pub(crate) mod util;

pub use data::{
    default_layout, ChannelLayout, ClLabel, Epoch, EpochLabels, FocusLevel, Matrix, Parameter,
    RawRecording, Response, SessionKind, TlxRating, TrialMarker,
};
pub use error::{Error, ErrorKind, Result};
