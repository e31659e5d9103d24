use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::clough_tocher::CloughTocher;
use super::psd::{PsdVector, BANDS};
use crate::data::ChannelLayout;
use crate::error::{Error, Result};

pub const TOPO_RESOLUTION: usize = 32;
/// Projected radius of the head's equator.
const HEAD_RADIUS: f64 = FRAC_PI_2;

/// Band-power maps stacked as image channels, stored height x width x band.
/// Row 0 is the frontal edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoImage {
    pub resolution: usize,
    pub grid: Vec<f64>,
    pub mask: Vec<bool>,
}

impl TopoImage {
    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.grid[(row * self.resolution + col) * BANDS.len() + band]
    }

    pub fn in_mask(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.resolution + col]
    }

    /// Band-major copy (5 x H x W) for convolutional models.
    pub fn to_chw(&self) -> Vec<f64> {
        let n = self.resolution * self.resolution;
        let mut out = vec![0.0; n * BANDS.len()];
        for px in 0..n {
            for b in 0..BANDS.len() {
                out[b * n + px] = self.grid[px * BANDS.len() + b];
            }
        }
        out
    }
}

/// Pixel centre `(u, v)` for a grid spanning `[-R, R]` on both axes.
pub(crate) fn pixel_position(row: usize, col: usize, resolution: usize) -> [f64; 2] {
    let step = 2.0 * HEAD_RADIUS / (resolution - 1) as f64;
    [-HEAD_RADIUS + col as f64 * step, HEAD_RADIUS - row as f64 * step]
}

/// Triangulation and pixel locations for a fixed electrode layout, shared
/// across every epoch that uses it.
#[derive(Debug, Clone)]
pub struct TopoInterpolator {
    resolution: usize,
    ct: CloughTocher,
    located: Vec<Option<(usize, [f64; 3])>>,
    mask: Vec<bool>,
}

impl TopoInterpolator {
    pub fn new(coords2d: &[[f64; 2]], resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidArgument(format!("topo resolution {resolution}")));
        }
        let ct = CloughTocher::new(coords2d)?;
        let mut located = Vec::with_capacity(resolution * resolution);
        let mut mask = Vec::with_capacity(resolution * resolution);
        for row in 0..resolution {
            for col in 0..resolution {
                let p = pixel_position(row, col, resolution);
                let inside = p[0].hypot(p[1]) <= HEAD_RADIUS * (1.0 + 1e-12);
                mask.push(inside);
                located.push(if inside { ct.locate(p) } else { None });
            }
        }
        Ok(Self {
            resolution,
            ct,
            located,
            mask,
        })
    }

    pub fn for_layout(layout: &ChannelLayout, resolution: usize) -> Result<Self> {
        Self::new(&layout.coords2d, resolution)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Interpolates one scalar per electrode onto the grid; 0 outside the
    /// hull or the head disk.
    pub fn render_band(&self, values: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .ct
            .interpolate_located(values, &self.located)?
            .into_iter()
            .map(|v| v.unwrap_or(0.0))
            .collect())
    }

    pub fn render(&self, psd: &PsdVector) -> Result<TopoImage> {
        let n = self.resolution * self.resolution;
        let mut grid = vec![0.0; n * BANDS.len()];
        for b in 0..BANDS.len() {
            let plane = self.render_band(&psd.band(b))?;
            for (px, v) in plane.into_iter().enumerate() {
                grid[px * BANDS.len() + b] = v;
            }
        }
        Ok(TopoImage {
            resolution: self.resolution,
            grid,
            mask: self.mask.clone(),
        })
    }

    /// Whether the pixel is covered by the triangulation.
    pub fn in_hull(&self, row: usize, col: usize) -> bool {
        self.located[row * self.resolution + col].is_some()
    }
}

pub fn topo_image(psd: &PsdVector, layout: &ChannelLayout, resolution: usize) -> Result<TopoImage> {
    TopoInterpolator::for_layout(layout, resolution)?.render(psd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::default_layout;

    #[test]
    fn constant_field_is_flat_inside_hull() {
        let layout = default_layout();
        let interp = TopoInterpolator::for_layout(&layout, 32).unwrap();
        let img = interp.render(&PsdVector::new(vec![2.5; 70]).unwrap()).unwrap();
        let mut inside = 0;
        for r in 0..32 {
            for c in 0..32 {
                for b in 0..5 {
                    let v = img.get(r, c, b);
                    if interp.in_hull(r, c) {
                        assert!((v - 2.5).abs() < 1e-12);
                    } else {
                        assert_eq!(v, 0.0);
                    }
                }
                inside += interp.in_hull(r, c) as usize;
            }
        }
        assert!(inside > 300, "hull covers {inside} pixels");
    }

    #[test]
    fn mask_is_the_head_disk() {
        let img = topo_image(&PsdVector::new(vec![1.0; 70]).unwrap(), &default_layout(), 32).unwrap();
        assert!(!img.in_mask(0, 0));
        assert!(img.in_mask(16, 16));
        assert_eq!(img.mask.len(), 1024);
        assert_eq!(img.to_chw().len(), 5 * 1024);
    }

    #[test]
    fn collinear_layout_rejected() {
        let pts: Vec<[f64; 2]> = (0..14).map(|i| [i as f64 * 0.1, 0.0]).collect();
        assert!(TopoInterpolator::new(&pts, 32).is_err());
    }
}
