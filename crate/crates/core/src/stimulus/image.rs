use std::fs;
use std::path::Path;

use rand::Rng;

use crate::data::FocusLevel;
use crate::error::{Error, Result};
use crate::util::rng;

/// Grayscale image, row-major, intensities nominally in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::ShapeMismatch {
                op: "image",
                lhs: vec![height, width],
                rhs: vec![pixels.len()],
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn variance(&self) -> f64 {
        crate::util::mean_std(&self.pixels).1.powi(2)
    }
}

/// Blur strength for a focus level: 0 at level 10, 13.5 px at level 1.
pub fn blur_sigma(level: FocusLevel) -> f64 {
    1.5 * (10 - level.get()) as f64
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.into_iter().map(|v| v / sum).collect()
}

// Half-sample symmetric reflection, valid for any offset.
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

fn convolve_rows(src: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; src.len()];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                acc += w * row[reflect(x as isize + k as isize - r, width)];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

fn transpose(src: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            out[x * height + y] = src[y * width + x];
        }
    }
    out
}

/// Separable Gaussian blur with kernel size `2 * ceil(3 sigma) + 1`.
pub fn blur_image(image: &GrayImage, level: u8) -> Result<GrayImage> {
    let level = FocusLevel::new(level)?;
    if image.pixels.is_empty() {
        return Err(Error::InvalidArgument("empty image".into()));
    }
    let sigma = blur_sigma(level);
    if sigma == 0.0 {
        return Ok(image.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let (w, h) = (image.width, image.height);
    let horiz = convolve_rows(&image.pixels, w, h, &kernel);
    let vert = convolve_rows(&transpose(&horiz, w, h), h, w, &kernel);
    GrayImage::new(w, h, transpose(&vert, h, w))
}

/// Stand-in astronomical frame: a soft galaxy core plus point-like stars.
pub fn starfield(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut r = rng(seed);
    let mut px = vec![0.02; width * height];
    let (cx, cy) = (width as f64 * 0.55, height as f64 * 0.45);
    let core = width.min(height) as f64 * 0.12;
    for y in 0..height {
        for x in 0..width {
            let d2 = (x as f64 - cx).powi(2) + 0.6 * (y as f64 - cy).powi(2);
            px[y * width + x] += 0.6 * (-d2 / (2.0 * core * core)).exp();
        }
    }
    let n_stars = (width * height) / 150;
    for _ in 0..n_stars {
        let sx = r.random_range(0.0..width as f64);
        let sy = r.random_range(0.0..height as f64);
        let amp = r.random_range(0.2..1.0);
        let s: f64 = r.random_range(0.5..1.4);
        let (x0, x1) = ((sx - 4.0).max(0.0) as usize, ((sx + 5.0) as usize).min(width));
        let (y0, y1) = ((sy - 4.0).max(0.0) as usize, ((sy + 5.0) as usize).min(height));
        for y in y0..y1 {
            for x in x0..x1 {
                let d2 = (x as f64 - sx).powi(2) + (y as f64 - sy).powi(2);
                px[y * width + x] += amp * (-d2 / (2.0 * s * s)).exp();
            }
        }
    }
    px.iter_mut().for_each(|v| *v = v.min(1.0));
    GrayImage {
        width,
        height,
        pixels: px,
    }
}

/// Binary 8-bit PGM (P5).
pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(
        image
            .pixels
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let bad = || Error::MalformedHeader("pgm header".into());
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad())?);
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad());
    }
    let w: usize = fields[1].parse().map_err(|_| bad())?;
    let h: usize = fields[2].parse().map_err(|_| bad())?;
    let data = bytes.get(pos + 1..pos + 1 + w * h).ok_or_else(bad)?;
    GrayImage::new(w, h, data.iter().map(|&b| b as f64 / 255.0).collect())
}

pub fn write_pgm(image: &GrayImage, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(image)).map_err(|e| Error::io(path, e))
}
