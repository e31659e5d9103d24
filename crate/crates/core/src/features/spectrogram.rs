use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::hann;
use crate::data::{Epoch, N_CHANNELS, SAMPLE_RATE};
use crate::error::{Error, Result};

pub const SPECT_WIN: usize = 64;
pub const SPECT_HOP: usize = 8;
pub const SPECT_FRAMES: usize = 25;
pub const SPECT_BINS: usize = SPECT_WIN / 2 + 1;

const FLOOR: f64 = 1e-12;

/// Log-magnitude STFT of every channel, stored channel x frame x bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub n_channels: usize,
    pub n_frames: usize,
    pub n_bins: usize,
    /// Frame centres in seconds from stimulus onset.
    pub frame_times: Vec<f64>,
    pub bin_freqs: Vec<f64>,
    pub values: Vec<f64>,
}

impl Spectrogram {
    pub fn get(&self, channel: usize, frame: usize, bin: usize) -> f64 {
        self.values[(channel * self.n_frames + frame) * self.n_bins + bin]
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let n = self.n_frames * self.n_bins;
        &self.values[channel * n..(channel + 1) * n]
    }

    /// Per-channel min-max scaling to [0, 1]; a flat channel maps to 0.
    /// Layout stays channel x frame x bin, i.e. CHW for a 2D model.
    pub fn to_cnn_input(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        for ch in 0..self.n_channels {
            let data = self.channel(ch);
            let (lo, hi) = data
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let span = hi - lo;
            out.extend(data.iter().map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 }));
        }
        out
    }
}

/// Hann-windowed STFT of the stimulus segment, `20 log10(|X| + 1e-12)` dB.
pub fn stft_spectrogram(epoch: &Epoch, win: usize, hop: usize) -> Result<Spectrogram> {
    let len = epoch.stimulus.cols();
    if win == 0 || hop == 0 || win > len {
        return Err(Error::InvalidArgument(format!(
            "stft window {win} / hop {hop} on {len} samples"
        )));
    }
    let n_frames = (len - win) / hop + 1;
    let n_bins = win / 2 + 1;
    let window = hann(win);
    let fft = FftPlanner::new().plan_fft_forward(win);
    let mut buf = vec![Complex64::default(); win];
    let mut values = Vec::with_capacity(N_CHANNELS * n_frames * n_bins);
    for ch in 0..N_CHANNELS {
        let x = epoch.stimulus.row(ch);
        for f in 0..n_frames {
            for ((b, v), w) in buf.iter_mut().zip(&x[f * hop..f * hop + win]).zip(&window) {
                *b = Complex64::new(v * w, 0.0);
            }
            fft.process(&mut buf);
            values.extend(buf[..n_bins].iter().map(|c| 20.0 * (c.norm() + FLOOR).log10()));
        }
    }
    Ok(Spectrogram {
        n_channels: N_CHANNELS,
        n_frames,
        n_bins,
        frame_times: (0..n_frames)
            .map(|f| (f * hop) as f64 / SAMPLE_RATE + win as f64 / (2.0 * SAMPLE_RATE))
            .collect(),
        bin_freqs: (0..n_bins).map(|k| k as f64 * SAMPLE_RATE / win as f64).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{EpochLabels, FocusLevel, Matrix, Parameter, SessionKind};
    use std::f64::consts::PI;

    fn epoch(f: impl Fn(usize, usize) -> f64) -> Epoch {
        let labels = EpochLabels {
            cl_label: None,
            parameter: Parameter::Noise,
            focus_level: FocusLevel::new(3).unwrap(),
            session: SessionKind::CR,
            participant: "x".into(),
        };
        Epoch::new(Matrix::zeros(14, 64), Matrix::from_fn(14, 256, f), labels).unwrap()
    }

    #[test]
    fn shape_follows_window_and_hop() {
        let s = stft_spectrogram(&epoch(|_, _| 0.0), SPECT_WIN, SPECT_HOP).unwrap();
        assert_eq!((s.n_frames, s.n_bins), (SPECT_FRAMES, SPECT_BINS));
        assert_eq!(s.values.len(), 14 * 25 * 33);
        assert_eq!(s.bin_freqs[32], 64.0);
    }

    #[test]
    fn zero_epoch_sits_on_the_floor() {
        let s = stft_spectrogram(&epoch(|_, _| 0.0), 64, 8).unwrap();
        assert!(s.values.iter().all(|v| *v == 20.0 * 1e-12f64.log10()));
        assert!(s.to_cnn_input().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn tone_peaks_at_its_bin() {
        let s = stft_spectrogram(&epoch(|_, t| (2.0 * PI * 20.0 * t as f64 / 128.0).sin()), 64, 8).unwrap();
        for f in 0..s.n_frames {
            let row: Vec<f64> = (0..s.n_bins).map(|b| s.get(2, f, b)).collect();
            let peak = (0..s.n_bins).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(peak, 10);
        }
    }

    #[test]
    fn oversized_window_rejected() {
        assert!(stft_spectrogram(&epoch(|_, _| 0.0), 300, 8).is_err());
    }

    #[test]
    fn cnn_input_is_unit_range() {
        let s = stft_spectrogram(&epoch(|c, t| ((c + 1) as f64 * 0.11 * t as f64).sin()), 64, 8).unwrap();
        let img = s.to_cnn_input();
        assert!(img.iter().all(|v| (0.0..=1.0).contains(v)));
        for ch in 0..14 {
            let sl = &img[ch * 825..(ch + 1) * 825];
            assert_eq!(sl.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            assert_eq!(sl.iter().cloned().fold(0.0, f64::max), 1.0);
        }
    }
}
