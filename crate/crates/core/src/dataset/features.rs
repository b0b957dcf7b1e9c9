use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{cross_section_area, mesh_volume, mirror_iou, TriMesh};
use crate::scalar::Scalar;

/// Anatomical descriptors used for conditioning and evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub volume: f64,
    pub isthmus_area: f64,
    pub symmetry: f64,
}

/// Feature order inside latent codes and reports.
pub const FEATURE_NAMES: [&str; 3] = ["volume", "isthmus", "symmetry"];

impl FeatureVector {
    pub fn to_array(self) -> [f64; 3] {
        [self.volume, self.isthmus_area, self.symmetry]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self {
            volume: a[0],
            isthmus_area: a[1],
            symmetry: a[2],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.volume > 0.0 && self.isthmus_area >= 0.0 && (0.0..=1.0).contains(&self.symmetry)
    }
}

/// Parses `volume`, `isthmus` (or `isthmus_area`) and `symmetry`.
pub fn feature_index(name: &str) -> Result<usize> {
    match name.trim() {
        "volume" => Ok(0),
        "isthmus" | "isthmus_area" | "isthmus-area" => Ok(1),
        "symmetry" => Ok(2),
        other => Err(Error::Parameter(format!("unknown feature {other:?}"))),
    }
}

/// Where the features are measured: the mid-sagittal plane and the voxel
/// resolution of the symmetry score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    pub plane_axis: usize,
    pub plane_offset: f64,
    pub iou_resolution: usize,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            plane_axis: 0,
            plane_offset: 0.5,
            iou_resolution: 128,
        }
    }
}

/// Volume, mid-plane section area and mirror IoU of a closed mesh.
pub fn measure_features<T: Scalar>(mesh: &TriMesh<T>, cfg: &MeasureConfig) -> Result<FeatureVector> {
    Ok(FeatureVector {
        volume: mesh_volume(mesh)?,
        isthmus_area: cross_section_area(mesh, cfg.plane_axis, cfg.plane_offset)?,
        symmetry: mirror_iou(mesh, cfg.plane_axis, cfg.plane_offset, cfg.iou_resolution)?.iou,
    })
}

/// Per-feature z-score transform fitted on a training population.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl FeatureScaler {
    /// Population mean and (n−1) standard deviation; a constant feature
    /// gets unit scale so it maps to 0.
    pub fn fit(features: &[FeatureVector]) -> Result<Self> {
        if features.len() < 2 {
            return Err(Error::Parameter("need at least two shapes to fit feature scaling".into()));
        }
        let n = features.len() as f64;
        let mut mean = [0.0; 3];
        let mut std = [0.0; 3];
        for f in features {
            for (m, v) in mean.iter_mut().zip(f.to_array()) {
                *m += v / n;
            }
        }
        for f in features {
            for (a, v) in f.to_array().into_iter().enumerate() {
                std[a] += (v - mean[a]).powi(2) / (n - 1.0);
            }
        }
        let std = std.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
        Ok(Self { mean, std })
    }

    pub fn identity() -> Self {
        Self {
            mean: [0.0; 3],
            std: [1.0; 3],
        }
    }

    pub fn scale(&self, f: &FeatureVector) -> [f64; 3] {
        let a = f.to_array();
        std::array::from_fn(|i| (a[i] - self.mean[i]) / self.std[i])
    }

    pub fn unscale(&self, z: [f64; 3]) -> FeatureVector {
        FeatureVector::from_array(std::array::from_fn(|i| z[i] * self.std[i] + self.mean[i]))
    }

    pub fn scale_one(&self, feature: usize, value: f64) -> f64 {
        (value - self.mean[feature]) / self.std[feature]
    }

    pub fn unscale_one(&self, feature: usize, z: f64) -> f64 {
        z * self.std[feature] + self.mean[feature]
    }
}
