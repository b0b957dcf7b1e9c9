use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::trimesh::TriMesh;
use crate::mesh::vec3::Point3;
use crate::scalar::Scalar;

/// Area-uniform surface samples: a face is drawn with probability
/// proportional to its area, then a uniform barycentric point inside it.
pub fn sample_surface<T: Scalar>(mesh: &TriMesh<T>, n: usize, seed: u64) -> Result<Vec<Point3<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_surface_with(mesh, n, &mut rng)
}

pub fn sample_surface_with<T: Scalar, R: Rng>(mesh: &TriMesh<T>, n: usize, rng: &mut R) -> Result<Vec<Point3<T>>> {
    if n == 0 {
        return Err(Error::Parameter("sample count must be at least 1".into()));
    }
    let areas: Vec<f64> = (0..mesh.faces.len()).map(|f| mesh.face_area(f).as_f64()).collect();
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("mesh has zero surface area".into()));
    }
    let faces = WeightedIndex::new(&areas)
        .map_err(|e| Error::Degenerate(format!("cannot weight faces by area: {e}")))?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let [a, b, c] = mesh.triangle(faces.sample(rng));
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let s = r1.sqrt();
        let (wa, wb, wc) = (T::c(1.0 - s), T::c(s * (1.0 - r2)), T::c(s * r2));
        out.push([
            wa * a[0] + wb * b[0] + wc * c[0],
            wa * a[1] + wb * b[1] + wc * c[1],
            wa * a[2] + wb * b[2] + wc * c[2],
        ]);
    }
    Ok(out)
}
