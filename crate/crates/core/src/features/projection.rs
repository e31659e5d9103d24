use crate::error::{Error, Result};

/// Azimuthal equidistant projection centred on the vertex `(0, 0, 1)`.
///
/// Each point lands at radius equal to its great-circle distance from the
/// vertex, along its azimuth. Inputs are normalized first; a zero vector has
/// no direction and is rejected.
pub fn project_electrodes(coords3d: &[[f64; 3]]) -> Result<Vec<[f64; 2]>> {
    coords3d
        .iter()
        .map(|&[x, y, z]| {
            let norm = (x * x + y * y + z * z).sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::Degenerate(format!("electrode position ({x}, {y}, {z})")));
            }
            let rho = (z / norm).clamp(-1.0, 1.0).acos();
            let phi = y.atan2(x);
            Ok([rho * phi.cos(), rho * phi.sin()])
        })
        .collect()
}
