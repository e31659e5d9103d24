//! Recording to clean epochs: zero-phase bandpass of the continuous signal,
//! segmentation, fixation-baseline removal, then rejection of epochs whose
//! stimulus segment exceeds a peak-to-peak limit.
//!
//! Epochs that arrive already cut can be cleaned with [`clean_epochs`], which
//! filters each 320-sample window on its own. Short windows leak more
//! out-of-band energy at the edges, so the recording path is preferred.

mod filter;

use serde::{Deserialize, Serialize};

pub use filter::{Biquad, FilterSpec, SosFilter};

use crate::data::{
    Epoch, EpochLabels, Matrix, RawRecording, EPOCH_SAMPLES, FIXATION_SAMPLES, N_CHANNELS,
};
use crate::error::{Error, Result};

/// Reflection padding used by the zero-phase filter.
pub const FILTER_PAD: usize = 64;
pub const DEFAULT_P2P_THRESHOLD_UV: f64 = 200.0;

/// One epoch per marker: fixation `[onset, onset+64)`, stimulus
/// `[onset+64, onset+320)`.
pub fn segment_epochs(rec: &RawRecording) -> Result<Vec<Epoch>> {
    rec.markers
        .iter()
        .map(|m| {
            if m.onset + EPOCH_SAMPLES > rec.data.cols() {
                return Err(Error::MarkerOutOfBounds {
                    onset: m.onset,
                    needed: m.onset + EPOCH_SAMPLES,
                    len: rec.data.cols(),
                });
            }
            let labels = EpochLabels {
                cl_label: None,
                parameter: m.parameter,
                focus_level: m.focus_level,
                session: m.session,
                participant: m.participant.clone(),
            };
            let full = rec.data.columns(m.onset, m.onset + EPOCH_SAMPLES);
            Epoch::from_concatenated(&full, labels)
        })
        .collect()
}

/// Subtracts each channel's fixation mean from both segments.
pub fn baseline_correct(epoch: &Epoch) -> Epoch {
    let mut out = epoch.clone();
    for ch in 0..N_CHANNELS {
        let mean = epoch.fixation.row(ch).iter().sum::<f64>() / FIXATION_SAMPLES as f64;
        out.fixation.row_mut(ch).iter_mut().for_each(|v| *v -= mean);
        out.stimulus.row_mut(ch).iter_mut().for_each(|v| *v -= mean);
    }
    out
}

/// Zero-phase bandpass over the joined 320-sample epoch, split back afterwards.
pub fn bandpass(epoch: &Epoch, filter: &SosFilter) -> Result<Epoch> {
    let full = epoch.concatenated();
    let mut out = Matrix::zeros(N_CHANNELS, EPOCH_SAMPLES);
    for ch in 0..N_CHANNELS {
        let y = filter.filtfilt(full.row(ch), FILTER_PAD)?;
        out.row_mut(ch).copy_from_slice(&y);
    }
    Epoch::from_concatenated(&out, epoch.labels.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: usize,
    pub channel: String,
    pub peak_to_peak_uv: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub threshold_uv: f64,
    pub kept: usize,
    pub rejected: Vec<Rejection>,
}

impl RejectionReport {
    pub fn rejected_indices(&self) -> Vec<usize> {
        self.rejected.iter().map(|r| r.index).collect()
    }
}

/// Drops an epoch when any channel's stimulus peak-to-peak exceeds the
/// threshold. Kept epochs preserve their order.
pub fn reject_artifacts(epochs: Vec<Epoch>, p2p_threshold_uv: f64) -> Result<(Vec<Epoch>, RejectionReport)> {
    if !(p2p_threshold_uv > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rejection threshold must be positive, got {p2p_threshold_uv}"
        )));
    }
    let names = crate::data::CHANNEL_NAMES;
    let mut kept = Vec::with_capacity(epochs.len());
    let mut report = RejectionReport {
        threshold_uv: p2p_threshold_uv,
        ..Default::default()
    };
    for (index, epoch) in epochs.into_iter().enumerate() {
        let worst = (0..N_CHANNELS)
            .map(|ch| {
                let row = epoch.stimulus.row(ch);
                let (lo, hi) = row
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                (ch, hi - lo)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("epochs have channels");
        if worst.1 > p2p_threshold_uv {
            report.rejected.push(Rejection {
                index,
                channel: names[worst.0].to_string(),
                peak_to_peak_uv: worst.1,
            });
        } else {
            kept.push(epoch);
        }
    }
    report.kept = kept.len();
    Ok((kept, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub filter: FilterSpec,
    pub p2p_threshold_uv: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            filter: FilterSpec::default(),
            p2p_threshold_uv: DEFAULT_P2P_THRESHOLD_UV,
        }
    }
}

/// Baseline, filter and reject already segmented epochs.
pub fn clean_epochs(epochs: Vec<Epoch>, config: &PreprocessConfig) -> Result<(Vec<Epoch>, RejectionReport)> {
    let filter = SosFilter::butterworth_bandpass(config.filter)?;
    let filtered = epochs
        .iter()
        .map(|e| bandpass(&baseline_correct(e), &filter))
        .collect::<Result<Vec<_>>>()?;
    reject_artifacts(filtered, config.p2p_threshold_uv)
}

/// Bandpass every channel of the continuous recording.
pub fn bandpass_recording(rec: &RawRecording, filter: &SosFilter) -> Result<RawRecording> {
    let mut data = rec.data.clone();
    for ch in 0..data.rows() {
        let y = filter.filtfilt(rec.data.row(ch), FILTER_PAD.min(rec.data.cols().saturating_sub(1)))?;
        data.row_mut(ch).copy_from_slice(&y);
    }
    Ok(RawRecording {
        sample_rate: rec.sample_rate,
        data,
        markers: rec.markers.clone(),
    })
}

/// The whole chain for one recording.
pub fn preprocess_recording(rec: &RawRecording, config: &PreprocessConfig) -> Result<(Vec<Epoch>, RejectionReport)> {
    let filter = SosFilter::butterworth_bandpass(config.filter)?;
    let filtered = bandpass_recording(rec, &filter)?;
    let epochs = segment_epochs(&filtered)?.iter().map(baseline_correct).collect();
    reject_artifacts(epochs, config.p2p_threshold_uv)
}
