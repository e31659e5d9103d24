use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::data::{
    ClLabel, Epoch, EpochLabels, FocusLevel, Matrix, Parameter, SessionKind, EPOCH_SAMPLES, FIXATION_SAMPLES, N_CHANNELS, SAMPLE_RATE,
};
use crate::error::{Error, Result};
use crate::util::{derive_seed, rng, Rng as ChaRng};

/// Channels that carry the planted effect.
pub const FRONTAL: [&str; 4] = ["AF3", "AF4", "F3", "F4"];
pub const ALPHA_HZ: f64 = 10.0;
pub const THETA_HZ: f64 = 6.0;
pub const PARIETAL: [&str; 4] = ["P7", "P8", "O1", "O2"];
/// Peak of the stimulus-locked deflection after stimulus onset.
pub const EVOKED_LATENCY_S: f64 = 0.3;
pub const EVOKED_WIDTH_S: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_epochs: usize,
    /// Fraction of High-load epochs.
    pub balance: f64,
    /// High-load epochs get alpha scaled by `1 - effect` and theta by
    /// `1 + effect` on the frontal channels.
    pub effect: f64,
    /// Background spectrum falls as `1 / f^noise_exponent`.
    pub noise_exponent: f64,
    pub seed: u64,
    /// Rhythm amplitudes relative to the unit-variance background.
    pub alpha_amplitude: f64,
    pub theta_amplitude: f64,
    /// Log-normal spread of each rhythm's amplitude per epoch and channel.
    pub amplitude_jitter: f64,
    /// Peak of the parietal evoked deflection at full effect. Its sign
    /// follows the class, so it leaves band power untouched.
    pub evoked_amplitude: f64,
    /// Standard deviation of the evoked latency, seconds.
    pub evoked_jitter_s: f64,
    pub participants: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_epochs: 400,
            balance: 0.5,
            effect: 0.8,
            noise_exponent: 1.0,
            seed: 0,
            alpha_amplitude: 0.6,
            theta_amplitude: 0.4,
            amplitude_jitter: 0.55,
            evoked_amplitude: 1.5,
            evoked_jitter_s: 0.05,
            participants: 8,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_epochs > 0
            && self.balance > 0.0
            && self.balance < 1.0
            && self.effect >= 0.0
            && self.noise_exponent >= 0.0
            && self.alpha_amplitude >= 0.0
            && self.theta_amplitude >= 0.0
            && self.amplitude_jitter >= 0.0
            && self.evoked_amplitude >= 0.0
            && self.evoked_jitter_s >= 0.0
            && self.participants > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("synthetic spec {self:?}")))
        }
    }
}

/// Unit-variance noise with a `1 / f^exponent` power spectrum.
pub fn pink_noise(n: usize, exponent: f64, rng: &mut ChaRng) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = vec![Complex::default(); n];
    for k in 1..=n / 2 {
        let scale = (k as f64).powf(-exponent / 2.0);
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = if 2 * k == n { 0.0 } else { StandardNormal.sample(rng) };
        buf[k] = Complex::new(re * scale, im * scale);
        buf[n - k] = buf[k].conj();
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let (mean, std) = crate::util::mean_std(&x);
    x.iter().map(|v| (v - mean) / std.max(f64::MIN_POSITIVE)).collect()
}

fn channel_mask(set: &[&str]) -> [bool; N_CHANNELS] {
    let names = crate::data::CHANNEL_NAMES;
    let mut m = [false; N_CHANNELS];
    for (i, n) in names.iter().enumerate() {
        m[i] = set.contains(n);
    }
    m
}

/// One 14 x 320 epoch of background noise plus alpha and theta rhythms.
fn synth_matrix(spec: &SyntheticSpec, high: bool, r: &mut ChaRng) -> Matrix {
    let frontal = channel_mask(&FRONTAL);
    let parietal = channel_mask(&PARIETAL);
    let jitter: f64 = StandardNormal.sample(r);
    let peak = (FIXATION_SAMPLES as f64 / SAMPLE_RATE + EVOKED_LATENCY_S + spec.evoked_jitter_s * jitter) * SAMPLE_RATE;
    let width = EVOKED_WIDTH_S * SAMPLE_RATE;
    let sign = if high { 1.0 } else { -1.0 };
    let evoked = sign * spec.effect * spec.evoked_amplitude;
    let mut data = Vec::with_capacity(N_CHANNELS * EPOCH_SAMPLES);
    for (&is_frontal, &is_parietal) in frontal.iter().zip(&parietal) {
        let mut x = pink_noise(EPOCH_SAMPLES, spec.noise_exponent, r);
        for (hz, amp, gain) in [
            (ALPHA_HZ, spec.alpha_amplitude, 1.0 - spec.effect),
            (THETA_HZ, spec.theta_amplitude, 1.0 + spec.effect),
        ] {
            let z: f64 = StandardNormal.sample(r);
            let mut a = amp * (spec.amplitude_jitter * z).exp();
            if high && is_frontal {
                a *= gain;
            }
            let phase = r.random_range(0.0..2.0 * PI);
            for (t, v) in x.iter_mut().enumerate() {
                *v += a * (2.0 * PI * hz * t as f64 / SAMPLE_RATE + phase).sin();
            }
        }
        if is_parietal {
            for (t, v) in x.iter_mut().enumerate() {
                let z = (t as f64 - peak) / width;
                *v += evoked * (-0.5 * z * z).exp();
            }
        }
        data.extend(x);
    }
    Matrix::from_vec(N_CHANNELS, EPOCH_SAMPLES, data).expect("shape is fixed")
}

fn make_epoch(spec: &SyntheticSpec, label: ClLabel, parameter: Parameter, i: usize, r: &mut ChaRng) -> Result<Epoch> {
    let m = synth_matrix(spec, label == ClLabel::High, r);
    let labels = EpochLabels {
        cl_label: Some(label),
        parameter,
        focus_level: FocusLevel::new((i % 10) as u8 + 1)?,
        session: SessionKind::IR,
        participant: format!("s{:02}", i % spec.participants),
    };
    Epoch::from_concatenated(&m, labels)
}

/// Labeled epochs with the planted load effect. High/Low counts follow
/// `balance` exactly (rounded) and are interleaved by a seeded shuffle.
pub fn synth_dataset(spec: &SyntheticSpec) -> Result<Vec<Epoch>> {
    spec.validate()?;
    let n_high = (spec.n_epochs as f64 * spec.balance).round() as usize;
    let mut order: Vec<bool> = (0..spec.n_epochs).map(|i| i < n_high).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng(derive_seed(spec.seed, &[0])));
    order
        .iter()
        .enumerate()
        .map(|(i, &high)| {
            let mut r = rng(derive_seed(spec.seed, &[1, i as u64]));
            let label = if high { ClLabel::High } else { ClLabel::Low };
            let parameter = Parameter::ALL[i % Parameter::ALL.len()];
            make_epoch(spec, label, parameter, i, &mut r)
        })
        .collect()
}

/// `per_parameter` epochs for each of the six conditions, each carrying
/// the load effect of its nominal label (four High, two Low).
pub fn synth_parameter_dataset(spec: &SyntheticSpec, per_parameter: usize) -> Result<Vec<Epoch>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(per_parameter * 6);
    for p in Parameter::ALL {
        for i in 0..per_parameter {
            let mut r = rng(derive_seed(spec.seed, &[2, p.index() as u64, i as u64]));
            out.push(make_epoch(spec, p.nominal_cl(), p, i, &mut r)?);
        }
    }
    Ok(out)
}
