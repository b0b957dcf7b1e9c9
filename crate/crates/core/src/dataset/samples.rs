use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mesh::sampling::sample_surface_with;
use crate::mesh::{DistanceIndex, Point3, TriMesh};

pub const DEFAULT_SURFACE_SAMPLES: usize = 40_000;
pub const DEFAULT_PERTURBED_SAMPLES: usize = 10_000;
pub const DEFAULT_PERTURBATION_SIGMA: f64 = 0.1;

/// Coordinate / signed-distance pairs of one shape. The first
/// `surface_count` entries lie on the surface and carry exactly 0.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub shape_id: usize,
    pub points: Vec<Point3<f64>>,
    pub sdf: Vec<f64>,
    pub surface_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleConfig {
    pub n_surface: usize,
    pub n_perturbed: usize,
    pub sigma: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            n_surface: DEFAULT_SURFACE_SAMPLES,
            n_perturbed: DEFAULT_PERTURBED_SAMPLES,
            sigma: DEFAULT_PERTURBATION_SIGMA,
        }
    }
}

impl SampleSet {
    pub fn new(shape_id: usize, points: Vec<Point3<f64>>, sdf: Vec<f64>, surface_count: usize) -> Result<Self> {
        if points.len() != sdf.len() {
            return Err(Error::Shape(format!("{} points but {} sdf values", points.len(), sdf.len())));
        }
        if surface_count > points.len() {
            return Err(Error::Shape("surface count exceeds sample count".into()));
        }
        Ok(Self {
            shape_id,
            points,
            sdf,
            surface_count,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn perturbed(&self) -> impl Iterator<Item = (Point3<f64>, f64)> + '_ {
        self.points[self.surface_count..].iter().copied().zip(self.sdf[self.surface_count..].iter().copied())
    }

    /// Little-endian f64 rows `x y z s`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() * 32);
        for (p, s) in self.points.iter().zip(&self.sdf) {
            for v in [p[0], p[1], p[2], *s] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(shape_id: usize, surface_count: usize, bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() % 32 != 0 {
            return Err(Error::format(origin, format!("{} bytes is not a whole number of rows", bytes.len())));
        }
        let mut points = Vec::with_capacity(bytes.len() / 32);
        let mut sdf = Vec::with_capacity(bytes.len() / 32);
        for row in bytes.chunks_exact(32) {
            let v: [f64; 4] = std::array::from_fn(|i| f64::from_le_bytes(row[i * 8..i * 8 + 8].try_into().unwrap()));
            points.push([v[0], v[1], v[2]]);
            sdf.push(v[3]);
        }
        Self::new(shape_id, points, sdf, surface_count).map_err(|e| Error::format(origin, e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(shape_id: usize, surface_count: usize, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(shape_id, surface_count, &bytes, path)
    }
}

/// Area-uniform surface points labelled 0, followed by surface points drawn
/// with replacement and displaced by per-axis Gaussian noise, labelled with
/// their exact signed distance. Perturbed points are not clipped to the cube.
pub fn build_sample_set(shape_id: usize, mesh: &TriMesh<f64>, cfg: &SampleConfig, seed: u64) -> Result<SampleSet> {
    if !(cfg.sigma >= 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::Parameter(format!("perturbation sigma {} is invalid", cfg.sigma)));
    }
    let index = DistanceIndex::new(mesh)?;
    if !index.is_watertight() {
        return Err(Error::NotWatertight("sample sets need a closed surface".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let surface = sample_surface_with(mesh, cfg.n_surface, &mut rng)?;
    let perturbed = perturb_surface_points(&surface, cfg.n_perturbed, cfg.sigma, &mut rng)?;
    let mut points = surface;
    let mut sdf = vec![0.0; points.len()];
    points.reserve(perturbed.len());
    sdf.reserve(perturbed.len());
    for (_, p) in perturbed {
        sdf.push(index.signed_distance(p)?);
        points.push(p);
    }
    SampleSet::new(shape_id, points, sdf, cfg.n_surface)
}

/// Draws `n` surface points with replacement and displaces each by
/// independent `N(0, sigma²)` noise per axis. Returns the index of the
/// source point alongside each displaced point.
pub fn perturb_surface_points<R: Rng>(
    surface: &[Point3<f64>],
    n: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<(usize, Point3<f64>)>> {
    if surface.is_empty() && n > 0 {
        return Err(Error::Parameter("no surface points to perturb".into()));
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::Parameter(e.to_string()))?;
    Ok((0..n)
        .map(|_| {
            let i = rng.random_range(0..surface.len());
            let b = surface[i];
            (i, [b[0] + noise.sample(rng), b[1] + noise.sample(rng), b[2] + noise.sample(rng)])
        })
        .collect())
}
