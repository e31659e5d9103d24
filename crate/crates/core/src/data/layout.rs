use serde::{Deserialize, Serialize};

use crate::features::project_electrodes;

pub const CHANNEL_NAMES: [&str; 14] = [
    "AF3", "F7", "F3", "FC5", "T7", "P7", "O1", "O2", "P8", "T8", "FC6", "F4", "F8", "AF4",
];

// Idealized 10-20 positions on the unit sphere. x points right, y toward the
// nose, z to the vertex. Equatorial sites sit at 90 degrees from Cz; AF3, F3
// and FC5 are great-circle interpolations along the AF, F and FC lines.
const COORDS: [[f64; 3]; 14] = [
    [-3.144_150_068_826_948_6e-1, 9.269_519_289_620_160_6e-1, 2.047_030_161_979_853_4e-1],
    [-8.090_169_943_749_474_5e-1, 5.877_852_522_924_731_4e-1, 0.0],
    [-4.808_041_833_205_067_3e-1, 7.695_629_522_914_139_2e-1, 4.202_382_654_661_800_9e-1],
    [-8.488_351_576_615_426e-1, 4.126_705_416_804_152_3e-1, 3.304_268_438_654_72e-1],
    [-1.0, 0.0, 0.0],
    [-8.090_169_943_749_474_5e-1, -5.877_852_522_924_731_4e-1, 0.0],
    [-3.090_169_943_749_475e-1, -9.510_565_162_951_535_3e-1, 0.0],
    [3.090_169_943_749_475e-1, -9.510_565_162_951_535_3e-1, 0.0],
    [8.090_169_943_749_474_5e-1, -5.877_852_522_924_731_4e-1, 0.0],
    [1.0, 0.0, 0.0],
    [8.488_351_576_615_426e-1, 4.126_705_416_804_152_3e-1, 3.304_268_438_654_72e-1],
    [4.808_041_833_205_067_3e-1, 7.695_629_522_914_139_2e-1, 4.202_382_654_661_800_9e-1],
    [8.090_169_943_749_474_5e-1, 5.877_852_522_924_731_4e-1, 0.0],
    [3.144_150_068_826_948_6e-1, 9.269_519_289_620_160_6e-1, 2.047_030_161_979_853_4e-1],
];

/// Electrode names and positions for the 14-channel headset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub names: Vec<String>,
    pub coords3d: Vec<[f64; 3]>,
    pub coords2d: Vec<[f64; 2]>,
}

impl ChannelLayout {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

pub fn default_layout() -> ChannelLayout {
    let coords3d: Vec<[f64; 3]> = COORDS
        .iter()
        .map(|p| {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            [p[0] / n, p[1] / n, p[2] / n]
        })
        .collect();
    let coords2d = project_electrodes(&coords3d).expect("embedded coordinates are unit norm");
    ChannelLayout {
        names: CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
        coords3d,
        coords2d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourteen_channels_in_fixed_order() {
        let layout = default_layout();
        assert_eq!(layout.len(), 14);
        assert_eq!(layout.names, CHANNEL_NAMES.to_vec());
        assert_eq!(layout.index_of("O2"), Some(7));
    }

    #[test]
    fn unit_norm_positions() {
        for p in default_layout().coords3d {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn vertex_nearest_channel_projects_closest_to_origin() {
        let layout = default_layout();
        let angular: Vec<f64> = layout.coords3d.iter().map(|p| p[2].clamp(-1.0, 1.0).acos()).collect();
        let radial: Vec<f64> = layout.coords2d.iter().map(|q| q[0].hypot(q[1])).collect();
        let argmin = |v: &[f64]| {
            v.iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap()
        };
        assert_eq!(argmin(&angular), argmin(&radial));
    }

    #[test]
    fn left_right_mirror_symmetry() {
        let layout = default_layout();
        for i in 0..7 {
            let l = layout.coords3d[i];
            let r = layout.coords3d[13 - i];
            assert!((l[0] + r[0]).abs() < 1e-12 && (l[1] - r[1]).abs() < 1e-12);
        }
    }
}
