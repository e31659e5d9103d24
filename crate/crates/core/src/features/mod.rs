//! EEG representations: band-power vectors, topographic images and STFT
//! spectrograms, plus the per-dimension z-score normalizer.

mod clough_tocher;
mod normalize;
mod projection;
mod psd;
mod spectrogram;
mod topo;

pub use clough_tocher::CloughTocher;
pub use normalize::Normalizer;
pub use projection::project_electrodes;
pub use psd::{welch_band_psd, welch_psd, PsdVector, BANDS, BAND_NAMES, PSD_LEN};
pub use spectrogram::{stft_spectrogram, Spectrogram, SPECT_BINS, SPECT_FRAMES, SPECT_HOP, SPECT_WIN};
pub use topo::{topo_image, TopoImage, TopoInterpolator, TOPO_RESOLUTION};

use std::f64::consts::PI;

/// Periodic Hann window.
pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}
