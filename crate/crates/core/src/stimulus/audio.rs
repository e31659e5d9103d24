use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{FocusLevel, Parameter};
use crate::error::{Error, Result};
use crate::util::{rms, rng};

pub const CARRIER_HZ: f64 = 1000.0;
pub const DEFAULT_SAMPLE_RATE: u32 = 44_100;
pub const STIMULUS_DURATION_S: f64 = 2.0;
pub const TARGET_RMS: f64 = 0.1;

/// Modulation rates ordered from sharpest (level 10) to most defocused (level 1).
pub const AM_RATES_HZ: [f64; 10] = [0.0, 2.0, 4.0, 7.0, 11.0, 16.0, 23.0, 34.0, 49.0, 70.0];

/// C-major scale from C4 to E6, 17 notes.
pub const C_MAJOR_C4_E6: [f64; 17] = [
    261.63, 293.66, 329.63, 349.23, 392.00, 440.00, 493.88, 523.25, 587.33, 659.25, 698.46, 783.99,
    880.00, 987.77, 1046.50, 1174.66, 1318.51,
];

/// Frequency for pitch level `1..=10`: every ~16/9-th note of the scale, which
/// keeps both endpoints and spaces the ladder roughly evenly in log frequency.
pub fn pitch_hz(level: FocusLevel) -> f64 {
    let i = (level.get() - 1) as f64;
    let idx = (i * 16.0 / 9.0).round() as usize;
    C_MAJOR_C4_E6[idx]
}

pub fn am_rate_hz(level: FocusLevel) -> f64 {
    AM_RATES_HZ[10 - level.get() as usize]
}

/// Weight of the pure tone in the noise mix; 0 at level 1, 1 at level 10.
pub fn tone_weight(level: FocusLevel) -> f64 {
    (level.get() - 1) as f64 / 9.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusSpec {
    pub parameter: Parameter,
    pub focus_level: FocusLevel,
    pub carrier_hz: f64,
    pub am_rate_hz: f64,
    pub tone_weight: f64,
}

impl StimulusSpec {
    pub fn new(parameter: Parameter, focus_level: FocusLevel) -> Self {
        let (carrier_hz, am, w) = match parameter {
            Parameter::Pitch => (pitch_hz(focus_level), 0.0, 1.0),
            Parameter::Noise => (CARRIER_HZ, 0.0, tone_weight(focus_level)),
            Parameter::Rough => (CARRIER_HZ, am_rate_hz(focus_level), 1.0),
            Parameter::AudioComb | Parameter::VisualComb => {
                (CARRIER_HZ, am_rate_hz(focus_level), tone_weight(focus_level))
            }
            Parameter::Visual => (0.0, 0.0, 0.0),
        };
        Self {
            parameter,
            focus_level,
            carrier_hz,
            am_rate_hz: am,
            tone_weight: w,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl AudioBuffer {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }
}

fn level(level: u8) -> Result<FocusLevel> {
    FocusLevel::new(level)
}

fn n_samples(sample_rate: u32, duration: f64) -> Result<usize> {
    if sample_rate == 0 || !(duration > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sample rate {sample_rate} / duration {duration}"
        )));
    }
    Ok((sample_rate as f64 * duration).round() as usize)
}

fn tone(freq: f64, sample_rate: u32, n: usize) -> Vec<f64> {
    let sr = sample_rate as f64;
    (0..n).map(|i| (2.0 * PI * freq * i as f64 / sr).sin()).collect()
}

fn white_noise(n: usize, target_rms: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    let scale = target_rms / rms(&v).max(f64::MIN_POSITIVE);
    v.iter_mut().for_each(|x| *x *= scale);
    v
}

/// Full-depth envelope `(1 + sin(2 pi f t)) / 2`.
fn am_envelope(rate: f64, sample_rate: u32, n: usize) -> Vec<f64> {
    let sr = sample_rate as f64;
    (0..n)
        .map(|i| 0.5 * (1.0 + (2.0 * PI * rate * i as f64 / sr).sin()))
        .collect()
}

/// Amplitude-linear blend of a 1 kHz tone and equal-RMS white noise.
fn tone_noise_mix(lv: FocusLevel, sample_rate: u32, n: usize, seed: u64) -> Vec<f64> {
    let w = tone_weight(lv);
    let t = tone(CARRIER_HZ, sample_rate, n);
    let noise = white_noise(n, rms(&t), seed);
    t.iter().zip(&noise).map(|(a, b)| w * a + (1.0 - w) * b).collect()
}

fn finish(mut samples: Vec<f64>, sample_rate: u32) -> AudioBuffer {
    let r = rms(&samples);
    if r > 0.0 {
        let scale = TARGET_RMS / r;
        samples.iter_mut().for_each(|s| *s = (*s * scale).clamp(-1.0, 1.0));
    }
    AudioBuffer {
        sample_rate,
        samples,
    }
}

pub fn synth_noise(level_: u8, sample_rate: u32, duration: f64, seed: u64) -> Result<AudioBuffer> {
    let lv = level(level_)?;
    let n = n_samples(sample_rate, duration)?;
    Ok(finish(tone_noise_mix(lv, sample_rate, n, seed), sample_rate))
}

pub fn synth_pitch(level_: u8, sample_rate: u32, duration: f64) -> Result<AudioBuffer> {
    let lv = level(level_)?;
    let n = n_samples(sample_rate, duration)?;
    Ok(finish(tone(pitch_hz(lv), sample_rate, n), sample_rate))
}

pub fn synth_rough(level_: u8, sample_rate: u32, duration: f64) -> Result<AudioBuffer> {
    let lv = level(level_)?;
    let n = n_samples(sample_rate, duration)?;
    let env = am_envelope(am_rate_hz(lv), sample_rate, n);
    let carrier = tone(CARRIER_HZ, sample_rate, n);
    let out = carrier.iter().zip(&env).map(|(c, e)| e * c).collect();
    Ok(finish(out, sample_rate))
}

pub fn synth_audiocomb(level_: u8, sample_rate: u32, duration: f64, seed: u64) -> Result<AudioBuffer> {
    let lv = level(level_)?;
    let n = n_samples(sample_rate, duration)?;
    let env = am_envelope(am_rate_hz(lv), sample_rate, n);
    let mix = tone_noise_mix(lv, sample_rate, n, seed);
    let out = mix.iter().zip(&env).map(|(m, e)| e * m).collect();
    Ok(finish(out, sample_rate))
}

/// Audio for one condition. Visual has no sound track.
pub fn synthesize(
    parameter: Parameter,
    level_: u8,
    sample_rate: u32,
    duration: f64,
    seed: u64,
) -> Result<Option<AudioBuffer>> {
    Ok(Some(match parameter {
        Parameter::Noise => synth_noise(level_, sample_rate, duration, seed)?,
        Parameter::Pitch => synth_pitch(level_, sample_rate, duration)?,
        Parameter::Rough => synth_rough(level_, sample_rate, duration)?,
        Parameter::AudioComb | Parameter::VisualComb => {
            synth_audiocomb(level_, sample_rate, duration, seed)?
        }
        Parameter::Visual => return Ok(None),
    }))
}
