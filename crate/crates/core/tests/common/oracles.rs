//! Reference computations written without the crate's own DSP code.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Amplitude of the `f` Hz component by least squares on `a sin + b cos + c`.
pub fn tone_amplitude(x: &[f64], f: f64, fs: f64) -> f64 {
    let basis = |i: usize| {
        let t = 2.0 * PI * f * i as f64 / fs;
        [t.sin(), t.cos(), 1.0]
    };
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for (i, &v) in x.iter().enumerate() {
        let b = basis(i);
        for r in 0..3 {
            atb[r] += b[r] * v;
            for c in 0..3 {
                ata[r][c] += b[r] * b[c];
            }
        }
    }
    let sol = solve3(ata, atb);
    sol[0].hypot(sol[1])
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let m = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// |H| of a digital Butterworth bandpass from the pole product of the analog
/// prototype, with bilinear pre-warping of both edges and of `f`.
pub fn butterworth_bandpass_gain(f: f64, fs: f64, lo: f64, hi: f64, order: usize) -> f64 {
    let warp = |hz: f64| 2.0 * fs * (PI * hz / fs).tan();
    let (wl, wh) = (warp(lo), warp(hi));
    let s = Complex64::new(0.0, warp(f));
    let lp = (s * s + wl * wh) / (s * (wh - wl));
    let mut h = Complex64::new(1.0, 0.0);
    for k in 1..=order {
        let theta = PI * (2 * k + order - 1) as f64 / (2 * order) as f64;
        let pole = Complex64::from_polar(1.0, theta);
        h /= lp - pole;
    }
    h.norm()
}

pub fn db(ratio: f64) -> f64 {
    20.0 * ratio.log10()
}

/// One-sided power spectrum, no window.
pub fn power_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..n / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
}

pub fn argmax(xs: &[f64]) -> usize {
    xs.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap()
}

/// Geometric over arithmetic mean of the power spectrum, DC excluded.
pub fn spectral_flatness(x: &[f64]) -> f64 {
    let p: Vec<f64> = power_spectrum(x)[1..].iter().map(|v| v + 1e-300).collect();
    let n = p.len() as f64;
    let geo = (p.iter().map(|v| v.ln()).sum::<f64>() / n).exp();
    geo / (p.iter().sum::<f64>() / n)
}

/// Power in the bins within `half_width` Hz of `f`.
pub fn band_power(spectrum: &[f64], n: usize, fs: f64, f: f64, half_width: f64) -> f64 {
    spectrum
        .iter()
        .enumerate()
        .filter(|(k, _)| ((*k as f64) * fs / n as f64 - f).abs() <= half_width)
        .map(|(_, p)| p)
        .sum()
}

/// SVM dual by projected gradient ascent:
/// max sum(a) - a'Qa/2, 0 <= a <= c, y'a = 0, Q = yy' * K.
pub fn svm_dual_projected_gradient(k: &[Vec<f64>], y: &[f64], c: f64, iters: usize) -> Vec<f64> {
    let n = y.len();
    let q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    let lipschitz = q
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let mut a = vec![0.0; n];
    for _ in 0..iters {
        let grad: Vec<f64> = (0..n).map(|i| 1.0 - (0..n).map(|j| q[i][j] * a[j]).sum::<f64>()).collect();
        let v: Vec<f64> = a.iter().zip(&grad).map(|(ai, g)| ai + step * g).collect();
        a = project(&v, y, c);
    }
    a
}

/// Euclidean projection onto the box intersected with y'a = 0, found by
/// bisection on the multiplier.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c)).collect() };
    let g = |lam: f64| -> f64 { at(lam).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let bound = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

pub fn dual_value(k: &[Vec<f64>], y: &[f64], a: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += a[i] * a[j] * y[i] * y[j] * k[i][j];
        }
    }
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Two-sided Mann-Whitney U test p-value, normal approximation without ties.
pub fn rank_sum_p(a: &[f64], b: &[f64]) -> f64 {
    let mut all: Vec<(f64, usize)> = a.iter().map(|&v| (v, 0)).chain(b.iter().map(|&v| (v, 1))).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let ra: f64 = all
        .iter()
        .enumerate()
        .filter(|(_, (_, g))| *g == 0)
        .map(|(i, _)| (i + 1) as f64)
        .sum();
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let u = ra - n1 * (n1 + 1.0) / 2.0;
    let mu = n1 * n2 / 2.0;
    let sigma = (n1 * n2 * (n1 + n2 + 1.0) / 12.0).sqrt();
    let z = (u - mu).abs() / sigma;
    2.0 * normal_sf(z)
}

/// Upper tail of the standard normal (Abramowitz-Stegun 7.1.26 on erfc).
fn normal_sf(z: f64) -> f64 {
    let x = z / 2f64.sqrt();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t * (0.254_829_592 + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    0.5 * poly * (-x * x).exp()
}
