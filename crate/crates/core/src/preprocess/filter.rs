//! Butterworth bandpass realized as a cascade of second-order sections.
//!
//! Poles of the analog lowpass prototype are mapped through the
//! lowpass-to-bandpass transform, then through the bilinear transform with
//! pre-warped edges. Each section carries one conjugate pole pair and the zero
//! pair `{+1, -1}`. Sections run in transposed direct form II.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    /// Order of the lowpass prototype; the bandpass has twice as many poles.
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub sample_rate: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            order: 6,
            low_hz: 0.1,
            high_hz: 45.0,
            sample_rate: crate::data::SAMPLE_RATE,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate / 2.0;
        if self.order == 0 {
            return Err(Error::FilterDesign("order must be positive".into()));
        }
        if !(self.low_hz > 0.0 && self.low_hz < self.high_hz) {
            return Err(Error::FilterDesign(format!(
                "band edges {} / {} Hz are not increasing and positive",
                self.low_hz, self.high_hz
            )));
        }
        if self.high_hz >= nyquist {
            return Err(Error::FilterDesign(format!(
                "upper cutoff {} Hz at or above Nyquist {} Hz",
                self.high_hz, nyquist
            )));
        }
        Ok(())
    }

    fn prewarp(&self, f: f64) -> f64 {
        2.0 * self.sample_rate * (PI * f / self.sample_rate).tan()
    }

    /// Magnitude of the ideal digital Butterworth bandpass (bilinear-mapped
    /// analog response) at `f` Hz.
    pub fn ideal_magnitude(&self, f: f64) -> f64 {
        let wl = self.prewarp(self.low_hz);
        let wh = self.prewarp(self.high_hz);
        let w = self.prewarp(f);
        let w0sq = wl * wh;
        let x = (w * w - w0sq) / ((wh - wl) * w);
        1.0 / (1.0 + x.powi(2 * self.order as i32)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// Denominator with `a[0] == 1`.
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2]) / (self.a[0] + z_inv * self.a[1] + z2 * self.a[2])
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    fn poles(&self) -> [Complex64; 2] {
        let (a1, a2) = (self.a[1], self.a[2]);
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        [(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }

    /// Runs the section over `x` in place, starting from state `z`.
    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z[0];
            z[0] = b1 * input - a1 * y + z[1];
            z[1] = b2 * input - a2 * y;
            *v = y;
        }
    }

    // State after an infinitely long constant input `u`.
    fn steady_state(&self, u: f64) -> [f64; 2] {
        let y = self.dc_gain() * u;
        [y - self.b[0] * u, self.b[2] * u - self.a[2] * y]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub spec: FilterSpec,
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    pub fn butterworth_bandpass(spec: FilterSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.order;
        let fs2 = 2.0 * spec.sample_rate;
        let wl = spec.prewarp(spec.low_hz);
        let wh = spec.prewarp(spec.high_hz);
        let bw = wh - wl;
        let w0sq = wl * wh;

        let mut zpoles = Vec::with_capacity(2 * n);
        for k in 0..n {
            let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            let p = Complex64::from_polar(1.0, theta);
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0sq).sqrt();
            for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
                zpoles.push((fs2 + s) / (fs2 - s));
            }
        }

        let imag_eps = 1e-12;
        let mut sections = Vec::with_capacity(n);
        let mut reals = Vec::new();
        for p in &zpoles {
            if p.im > imag_eps {
                sections.push(Biquad {
                    b: [1.0, 0.0, -1.0],
                    a: [1.0, -2.0 * p.re, p.norm_sqr()],
                });
            } else if p.im.abs() <= imag_eps {
                reals.push(p.re);
            }
        }
        reals.sort_by(|a, b| a.total_cmp(b));
        for pair in reals.chunks(2) {
            let (r1, r2) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
            sections.push(Biquad {
                b: [1.0, 0.0, -1.0],
                a: [1.0, -(r1 + r2), r1 * r2],
            });
        }
        if sections.len() != n {
            return Err(Error::FilterDesign(format!(
                "pole pairing produced {} sections for order {n}",
                sections.len()
            )));
        }

        let mut filter = SosFilter { spec, sections };
        if !filter.is_stable() {
            return Err(Error::FilterDesign("pole on or outside the unit circle".into()));
        }
        let f0 = (w0sq.sqrt() / fs2).atan() * spec.sample_rate / PI;
        let gain = filter.response(f0).norm();
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::FilterDesign("zero gain at band centre".into()));
        }
        let per_section = gain.powf(-1.0 / n as f64);
        for s in &mut filter.sections {
            s.b.iter_mut().for_each(|b| *b *= per_section);
        }
        Ok(filter)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }

    /// Complex frequency response of one pass at `f` Hz.
    pub fn response(&self, f: f64) -> Complex64 {
        let w = 2.0 * PI * f / self.spec.sample_rate;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    /// Magnitude of the forward-backward (zero-phase) response at `f` Hz.
    pub fn zero_phase_magnitude(&self, f: f64) -> f64 {
        self.response(f).norm_sqr()
    }

    /// Single causal pass from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            s.run(&mut y, [0.0; 2]);
        }
        y
    }

    // Causal pass with every section started in steady state for a constant
    // input equal to the mean of the first `lead` samples. Using a local mean
    // rather than the first sample keeps an oscillating edge from looking like
    // a DC step to the slow high-pass poles.
    fn filter_steady(&self, y: &mut [f64], lead: usize) {
        let lead = lead.clamp(1, y.len().max(1));
        let mut u = y[..lead.min(y.len())].iter().sum::<f64>() / lead as f64;
        for s in &self.sections {
            let z = s.steady_state(u);
            u *= s.dc_gain();
            s.run(y, z);
        }
    }

    /// Zero-phase forward-backward filtering. Both ends are extended by
    /// `pad` samples of mirror (even) reflection.
    pub fn filtfilt(&self, x: &[f64], pad: usize) -> Result<Vec<f64>> {
        let n = x.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        if pad >= n {
            return Err(Error::InvalidArgument(format!(
                "padding {pad} needs more than {n} samples"
            )));
        }
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| x[n - 1 - i]));

        let lead = pad.max(1);
        self.filter_steady(&mut ext, lead);
        ext.reverse();
        self.filter_steady(&mut ext, lead);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}
