//! Shared domain types, electrode geometry and on-disk formats.

mod container;
mod csvio;
mod layout;
mod types;

pub use container::{
    decode_container, encode_container, read_container, read_epochs, write_container, write_epochs,
    ContainerHeader, MAGIC,
};
pub use csvio::{
    markers_from_csv, markers_path_for, markers_to_csv, read_markers, read_recording, read_recording_with_markers, write_markers,
    write_recording,
};
pub use layout::{default_layout, ChannelLayout, CHANNEL_NAMES};
pub use types::*;

/// Fixed acquisition rate of the headset.
pub const SAMPLE_RATE: f64 = 128.0;
pub const N_CHANNELS: usize = 14;
/// 0.5 s fixation cross.
pub const FIXATION_SAMPLES: usize = 64;
/// 2 s stimulus presentation.
pub const STIMULUS_SAMPLES: usize = 256;
pub const EPOCH_SAMPLES: usize = FIXATION_SAMPLES + STIMULUS_SAMPLES;
