use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::trimesh::TriMesh;
use crate::mesh::vec3::Point3;
use crate::scalar::Scalar;

/// Per-axis affine map `v' = (v - reference) * scale + 0.5` shared by a
/// whole population.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub reference: [f64; 3],
    pub scale: [f64; 3],
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        Self {
            reference: [0.5; 3],
            scale: [1.0; 3],
        }
    }

    pub fn apply<T: Scalar>(&self, v: Point3<T>) -> Point3<T> {
        std::array::from_fn(|a| T::c((v[a].as_f64() - self.reference[a]) * self.scale[a] + 0.5))
    }

    pub fn invert<T: Scalar>(&self, v: Point3<T>) -> Point3<T> {
        std::array::from_fn(|a| T::c((v[a].as_f64() - 0.5) / self.scale[a] + self.reference[a]))
    }

    pub fn apply_mesh<T: Scalar>(&self, mesh: &TriMesh<T>) -> TriMesh<T> {
        mesh.map_vertices(|v| self.apply(v))
    }

    pub fn invert_mesh<T: Scalar>(&self, mesh: &TriMesh<T>) -> TriMesh<T> {
        mesh.map_vertices(|v| self.invert(v))
    }

    /// Physical volume of a normalized volume.
    pub fn physical_volume(&self, normalized: f64) -> f64 {
        normalized / (self.scale[0] * self.scale[1] * self.scale[2])
    }
}

/// Maps a population of meshes centered on a common `reference` point into
/// the unit cube with one scale per axis: the largest extent over the whole
/// population along each axis becomes 1, so relative sizes are kept.
pub fn normalize_population<T: Scalar>(
    meshes: &[TriMesh<T>],
    reference: Point3<T>,
) -> Result<(Vec<TriMesh<T>>, NormalizationTransform)> {
    if meshes.is_empty() {
        return Err(Error::Parameter("cannot normalize an empty population".into()));
    }
    let reference = reference.map(|r| r.as_f64());
    let mut half = [0.0f64; 3];
    for m in meshes {
        for v in &m.vertices {
            for a in 0..3 {
                half[a] = half[a].max((v[a].as_f64() - reference[a]).abs());
            }
        }
    }
    if let Some(axis) = (0..3).find(|&a| !(half[a] > 0.0)) {
        return Err(Error::Degenerate(format!("population has zero extent along axis {axis}")));
    }
    let transform = NormalizationTransform {
        reference,
        scale: half.map(|h| 0.5 / h),
    };
    let out = meshes.iter().map(|m| transform.apply_mesh(m)).collect();
    Ok((out, transform))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::trimesh::box_mesh;

    #[test]
    fn unit_cube_maps_onto_itself() {
        let cube = box_mesh([0.0f64; 3], [1.0; 3]);
        let (out, t) = normalize_population(&[cube.clone()], [0.5; 3]).unwrap();
        assert_eq!(out[0], cube);
        assert_eq!(t.scale, [1.0; 3]);
    }

    #[test]
    fn relative_size_is_preserved() {
        let small = box_mesh([-0.5f64; 3], [0.5; 3]);
        let big = box_mesh([-1.0f64; 3], [1.0; 3]);
        let (out, _) = normalize_population(&[small, big], [0.0; 3]).unwrap();
        let edge = |m: &TriMesh<f64>| m.bounds().extent()[0];
        assert!((edge(&out[0]) - 0.5).abs() < 1e-15);
        assert!((edge(&out[1]) - 1.0).abs() < 1e-15);
        assert!(out[1].vertices.iter().flatten().all(|&c| (0.0..=1.0).contains(&c)));
    }

    #[test]
    fn inverse_recovers_original_vertices() {
        let m = box_mesh([0.1f64, -3.0, 2.0], [0.7, 1.0, 2.5]);
        let (out, t) = normalize_population(&[m.clone()], [0.4, -1.0, 2.2]).unwrap();
        let back = t.invert_mesh(&out[0]);
        for (a, b) in back.vertices.iter().zip(&m.vertices) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn flat_population_is_degenerate() {
        let flat = TriMesh::new(vec![[0.0f64, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(
            normalize_population(&[flat], [0.0; 3]),
            Err(Error::Degenerate(_))
        ));
    }
}
