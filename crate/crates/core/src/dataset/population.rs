use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::features::{measure_features, FeatureVector, MeasureConfig};
use crate::dataset::lobes::{mesh_lobes, LobeParams, ParamRanges};
use crate::dataset::samples::{build_sample_set, SampleConfig, SampleSet};
use crate::error::{Error, Result};
use crate::mesh::{normalize_population, NormalizationTransform, Point3, TriMesh};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub n: usize,
    pub seed: u64,
    pub ranges: ParamRanges,
    pub mesh_resolution: usize,
    pub measure: MeasureConfig,
    /// `None` skips building sample sets.
    pub samples: Option<SampleSpec>,
}

/// Serializable mirror of [`SampleConfig`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub n_surface: usize,
    pub n_perturbed: usize,
    pub sigma: f64,
}

impl From<SampleSpec> for SampleConfig {
    fn from(s: SampleSpec) -> Self {
        SampleConfig {
            n_surface: s.n_surface,
            n_perturbed: s.n_perturbed,
            sigma: s.sigma,
        }
    }
}

impl From<SampleConfig> for SampleSpec {
    fn from(s: SampleConfig) -> Self {
        SampleSpec {
            n_surface: s.n_surface,
            n_perturbed: s.n_perturbed,
            sigma: s.sigma,
        }
    }
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            n: 20,
            seed: 0,
            ranges: ParamRanges::default(),
            mesh_resolution: 64,
            measure: MeasureConfig::default(),
            samples: Some(SampleConfig::default().into()),
        }
    }
}

/// One normalized shape of a dataset.
#[derive(Clone, Debug)]
pub struct ShapeRecord {
    pub id: usize,
    /// Generator parameters in pre-normalization units; `None` for imports.
    pub params: Option<LobeParams>,
    pub mesh: TriMesh<f64>,
    pub features: FeatureVector,
    pub samples: Option<SampleSet>,
    pub sample_seed: u64,
}

/// A jointly normalized shape population.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub shapes: Vec<ShapeRecord>,
    pub transform: NormalizationTransform,
    pub seed: u64,
    pub generator: Option<ParamRanges>,
    pub mesh_resolution: Option<usize>,
    pub measure: MeasureConfig,
    pub samples: Option<SampleSpec>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn features(&self) -> Vec<FeatureVector> {
        self.shapes.iter().map(|s| s.features).collect()
    }

    pub fn shape(&self, id: usize) -> Result<&ShapeRecord> {
        self.shapes.get(id).ok_or(Error::UnknownShape(id))
    }

    /// Sample sets of every shape; errors if any were not built.
    pub fn sample_sets(&self) -> Result<Vec<&SampleSet>> {
        self.shapes
            .iter()
            .map(|s| {
                s.samples
                    .as_ref()
                    .ok_or_else(|| Error::State(format!("shape {} has no sample set", s.id)))
            })
            .collect()
    }
}

/// Draws `n` parametric shapes, meshes them, normalizes them jointly about
/// the cube centre, measures their features and optionally samples them.
pub fn generate_population(cfg: &PopulationConfig) -> Result<Dataset> {
    if cfg.n < 2 {
        return Err(Error::Parameter(format!("a population needs at least 2 shapes, got {}", cfg.n)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = Vec::with_capacity(cfg.n);
    let mut seeds = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        params.push(cfg.ranges.sample(&mut rng)?);
        seeds.push(rng.random::<u64>());
    }
    let meshes = params
        .iter()
        .map(|p| mesh_lobes(p, cfg.mesh_resolution))
        .collect::<Result<Vec<_>>>()?;
    let mut ds = assemble(meshes, [0.5; 3], seeds, cfg.measure, cfg.samples)?;
    for (shape, p) in ds.shapes.iter_mut().zip(params) {
        shape.params = Some(p);
    }
    ds.seed = cfg.seed;
    ds.generator = Some(cfg.ranges);
    ds.mesh_resolution = Some(cfg.mesh_resolution);
    log::info!("generated {} shapes (seed {})", ds.len(), cfg.seed);
    Ok(ds)
}

/// Builds a dataset from externally supplied closed meshes that share a
/// common anatomical reference point.
pub fn import_population(
    meshes: Vec<TriMesh<f64>>,
    reference: Point3<f64>,
    seed: u64,
    measure: MeasureConfig,
    samples: Option<SampleSpec>,
) -> Result<Dataset> {
    if meshes.len() < 2 {
        return Err(Error::Parameter(format!("a population needs at least 2 shapes, got {}", meshes.len())));
    }
    for (i, m) in meshes.iter().enumerate() {
        if let Err(Error::NotWatertight(detail)) = m.ensure_watertight() {
            return Err(Error::NotWatertight(format!("shape {i}: {detail}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = (0..meshes.len()).map(|_| rng.random::<u64>()).collect();
    let mut ds = assemble(meshes, reference, seeds, measure, samples)?;
    ds.seed = seed;
    Ok(ds)
}

fn assemble(
    meshes: Vec<TriMesh<f64>>,
    reference: Point3<f64>,
    seeds: Vec<u64>,
    measure: MeasureConfig,
    samples: Option<SampleSpec>,
) -> Result<Dataset> {
    let (normalized, transform) = normalize_population(&meshes, reference)?;
    let mut shapes = Vec::with_capacity(normalized.len());
    for (id, (mesh, sample_seed)) in normalized.into_iter().zip(seeds).enumerate() {
        let features = measure_features(&mesh, &measure)?;
        let samples = match samples {
            Some(spec) => Some(build_sample_set(id, &mesh, &spec.into(), sample_seed)?),
            None => None,
        };
        shapes.push(ShapeRecord {
            id,
            params: None,
            mesh,
            features,
            samples,
            sample_seed,
        });
    }
    Ok(Dataset {
        shapes,
        transform,
        seed: 0,
        generator: None,
        mesh_resolution: None,
        measure,
        samples,
    })
}
