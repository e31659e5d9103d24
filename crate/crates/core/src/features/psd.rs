use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::hann;
use crate::data::{Epoch, N_CHANNELS, SAMPLE_RATE};
use crate::error::{Error, Result};

/// Band edges in Hz: delta, theta, alpha, beta, gamma (capped at the filter edge).
pub const BANDS: [(f64, f64); 5] = [(1.0, 4.0), (4.0, 8.0), (8.0, 12.0), (12.0, 30.0), (30.0, 45.0)];
pub const BAND_NAMES: [&str; 5] = ["delta", "theta", "alpha", "beta", "gamma"];
pub const PSD_LEN: usize = N_CHANNELS * BANDS.len();

const SEGMENT: usize = 128;
const OVERLAP: usize = 64;

/// Band-integrated power, channel-major: `values[ch * 5 + band]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdVector {
    pub values: Vec<f64>,
}

impl PsdVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != PSD_LEN {
            return Err(Error::ShapeMismatch {
                op: "psd vector",
                lhs: vec![PSD_LEN],
                rhs: vec![values.len()],
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Numeric("band power negative or non-finite".into()));
        }
        Ok(Self { values })
    }

    pub fn get(&self, channel: usize, band: usize) -> f64 {
        self.values[channel * BANDS.len() + band]
    }

    /// The 14 channel values for one band.
    pub fn band(&self, band: usize) -> Vec<f64> {
        (0..N_CHANNELS).map(|ch| self.get(ch, band)).collect()
    }
}

/// One-sided Welch density estimate with Hann windows of `segment` samples
/// and `overlap` samples shared between neighbours. Returns `(freqs, psd)`.
pub fn welch_psd(x: &[f64], fs: f64, segment: usize, overlap: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if segment == 0 || overlap >= segment || x.len() < segment {
        return Err(Error::InvalidArgument(format!(
            "welch segment {segment} / overlap {overlap} on {} samples",
            x.len()
        )));
    }
    let window = hann(segment);
    let scale = 1.0 / (fs * window.iter().map(|w| w * w).sum::<f64>());
    let fft = FftPlanner::new().plan_fft_forward(segment);
    let n_bins = segment / 2 + 1;
    let step = segment - overlap;
    let n_seg = (x.len() - segment) / step + 1;
    let mut psd = vec![0.0; n_bins];
    let mut buf = vec![Complex64::default(); segment];
    for s in 0..n_seg {
        let chunk = &x[s * step..s * step + segment];
        for ((b, v), w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex64::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, p) in psd.iter_mut().enumerate() {
            *p += buf[k].norm_sqr();
        }
    }
    for (k, p) in psd.iter_mut().enumerate() {
        let one_sided = if k == 0 || (segment % 2 == 0 && k == n_bins - 1) { 1.0 } else { 2.0 };
        *p *= scale * one_sided / n_seg as f64;
    }
    let freqs = (0..n_bins).map(|k| k as f64 * fs / segment as f64).collect();
    Ok((freqs, psd))
}

/// Trapezoidal integral of `psd` over the bins whose frequency lies in `[lo, hi]`.
pub(crate) fn integrate(freqs: &[f64], psd: &[f64], lo: f64, hi: f64) -> f64 {
    let idx: Vec<usize> = (0..freqs.len())
        .filter(|&k| freqs[k] >= lo - 1e-9 && freqs[k] <= hi + 1e-9)
        .collect();
    idx.windows(2)
        .map(|w| 0.5 * (psd[w[0]] + psd[w[1]]) * (freqs[w[1]] - freqs[w[0]]))
        .sum()
}

/// Band powers of the stimulus segment of every channel.
pub fn welch_band_psd(epoch: &Epoch) -> PsdVector {
    let mut values = Vec::with_capacity(PSD_LEN);
    for ch in 0..N_CHANNELS {
        let (freqs, psd) = welch_psd(epoch.stimulus.row(ch), SAMPLE_RATE, SEGMENT, OVERLAP)
            .expect("stimulus segment is 256 samples");
        for (lo, hi) in BANDS {
            values.push(integrate(&freqs, &psd, lo, hi).max(0.0));
        }
    }
    PsdVector { values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{EpochLabels, FocusLevel, Matrix, Parameter, SessionKind};
    use std::f64::consts::PI;

    fn epoch(f: impl Fn(usize, usize) -> f64) -> Epoch {
        let labels = EpochLabels {
            cl_label: None,
            parameter: Parameter::Visual,
            focus_level: FocusLevel::new(1).unwrap(),
            session: SessionKind::IR,
            participant: "x".into(),
        };
        Epoch::new(Matrix::zeros(14, 64), Matrix::from_fn(14, 256, f), labels).unwrap()
    }

    #[test]
    fn ten_hz_tone_lands_in_alpha() {
        let e = epoch(|ch, t| if ch == 0 { (2.0 * PI * 10.0 * t as f64 / 128.0).sin() } else { 0.0 });
        let psd = welch_band_psd(&e);
        let total: f64 = (0..5).map(|b| psd.get(0, b)).sum();
        assert!(psd.get(0, 2) / total >= 0.9);
        assert!(psd.band(2)[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sine_power_matches_parseval() {
        // A unit sine carries 0.5 power; the alpha band should hold nearly all of it.
        let e = epoch(|_, t| (2.0 * PI * 10.0 * t as f64 / 128.0).sin());
        let psd = welch_band_psd(&e);
        assert!((psd.get(3, 2) - 0.5).abs() < 0.01, "{}", psd.get(3, 2));
    }

    #[test]
    fn zero_epoch_zero_vector() {
        let psd = welch_band_psd(&epoch(|_, _| 0.0));
        assert_eq!(psd.values, vec![0.0; 70]);
    }

    #[test]
    fn amplitude_scaling_is_quadratic() {
        let base = |t: usize| (0.3 * t as f64).sin() + 0.2 * (1.7 * t as f64).cos();
        let a = welch_band_psd(&epoch(|_, t| base(t)));
        let b = welch_band_psd(&epoch(|ch, t| if ch == 4 { 2.0 * base(t) } else { base(t) }));
        for band in 0..5 {
            let (x, y) = (a.get(4, band), b.get(4, band));
            assert!((y - 4.0 * x).abs() <= 1e-9 * y.abs().max(1e-300));
            assert_eq!(a.get(5, band), b.get(5, band));
        }
    }

    #[test]
    fn bands_tile_the_integrated_range() {
        let x: Vec<f64> = (0..256).map(|t| ((t * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let (f, p) = welch_psd(&x, 128.0, 128, 64).unwrap();
        let bands: f64 = BANDS.iter().map(|&(lo, hi)| integrate(&f, &p, lo, hi)).sum();
        let total = integrate(&f, &p, 1.0, 45.0);
        assert!((bands - total).abs() <= 1e-9 * total);
    }

    #[test]
    fn short_input_rejected() {
        assert!(welch_psd(&[0.0; 100], 128.0, 128, 64).is_err());
    }
}
