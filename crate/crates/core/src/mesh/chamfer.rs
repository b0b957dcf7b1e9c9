use crate::error::Result;
use crate::mesh::distance::DistanceIndex;
use crate::mesh::sampling::sample_surface;
use crate::mesh::trimesh::TriMesh;
use crate::scalar::Scalar;

/// Default number of surface samples per mesh.
pub const DEFAULT_CHAMFER_SAMPLES: usize = 30_000;

/// Symmetric Chamfer distance: the average of the two mean distances from
/// area-uniform samples on one mesh to the exact surface of the other.
pub fn chamfer_distance<T: Scalar>(a: &TriMesh<T>, b: &TriMesh<T>, n_samples: usize, seed: u64) -> Result<f64> {
    chamfer_distance_seeded(a, b, n_samples, seed, seed ^ 0x9e37_79b9_7f4a_7c15)
}

/// Same as [`chamfer_distance`] with an explicit sampling seed per side;
/// swapping the meshes together with their seeds gives the identical value.
pub fn chamfer_distance_seeded<T: Scalar>(
    a: &TriMesh<T>,
    b: &TriMesh<T>,
    n_samples: usize,
    seed_a: u64,
    seed_b: u64,
) -> Result<f64> {
    let index_a = DistanceIndex::new(a)?;
    let index_b = DistanceIndex::new(b)?;
    let a_to_b = one_sided(a, &index_b, n_samples, seed_a)?;
    let b_to_a = one_sided(b, &index_a, n_samples, seed_b)?;
    Ok(0.5 * (a_to_b + b_to_a))
}

/// Mean distance from samples of `from` to the surface behind `to`.
pub fn one_sided<T: Scalar>(from: &TriMesh<T>, to: &DistanceIndex<T>, n_samples: usize, seed: u64) -> Result<f64> {
    let samples = sample_surface(from, n_samples, seed)?;
    let total: f64 = samples.iter().map(|&p| to.unsigned_distance(p).as_f64()).sum();
    Ok(total / samples.len() as f64)
}
