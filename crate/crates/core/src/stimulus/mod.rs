//! Ten-level stimulus scales for each sonification parameter.

mod audio;
mod image;
mod wav;

pub use audio::{
    am_rate_hz, pitch_hz, synth_audiocomb, synth_noise, synth_pitch, synth_rough, synthesize,
    tone_weight, AudioBuffer, StimulusSpec, AM_RATES_HZ, CARRIER_HZ, C_MAJOR_C4_E6,
    DEFAULT_SAMPLE_RATE, STIMULUS_DURATION_S, TARGET_RMS,
};
pub use image::{blur_image, blur_sigma, decode_pgm, encode_pgm, starfield, write_pgm, GrayImage};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav};
