use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::features::{FeatureVector, MeasureConfig};
use crate::dataset::lobes::{LobeParams, ParamRanges};
use crate::dataset::population::{Dataset, SampleSpec, ShapeRecord};
use crate::dataset::samples::SampleSet;
use crate::error::{Error, Result};
use crate::mesh::io::{read_obj, write_obj};
use crate::mesh::NormalizationTransform;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub transform: NormalizationTransform,
    pub generator: Option<ParamRanges>,
    pub mesh_resolution: Option<usize>,
    pub measure: MeasureConfig,
    pub samples: Option<SampleSpec>,
    pub shapes: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    pub mesh: String,
    pub samples: Option<String>,
    pub surface_count: usize,
    pub sample_seed: u64,
    pub features: FeatureVector,
    pub params: Option<LobeParams>,
}

fn mesh_name(id: usize) -> String {
    format!("shape_{id:04}.obj")
}

fn samples_name(id: usize) -> String {
    format!("shape_{id:04}.samples")
}

impl Dataset {
    pub fn manifest(&self) -> Manifest {
        Manifest {
            version: MANIFEST_VERSION,
            seed: self.seed,
            transform: self.transform,
            generator: self.generator,
            mesh_resolution: self.mesh_resolution,
            measure: self.measure,
            samples: self.samples,
            shapes: self
                .shapes
                .iter()
                .map(|s| ManifestEntry {
                    id: s.id,
                    mesh: mesh_name(s.id),
                    samples: s.samples.as_ref().map(|_| samples_name(s.id)),
                    surface_count: s.samples.as_ref().map_or(0, |x| x.surface_count),
                    sample_seed: s.sample_seed,
                    features: s.features,
                    params: s.params,
                })
                .collect(),
        }
    }

    /// Writes the manifest, one OBJ and one sample file per shape.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for s in &self.shapes {
            write_obj(&s.mesh, dir.join(mesh_name(s.id)))?;
            if let Some(samples) = &s.samples {
                samples.write(dir.join(samples_name(s.id)))?;
            }
        }
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.manifest())?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = read_manifest(dir)?;
        let mut shapes = Vec::with_capacity(manifest.shapes.len());
        for (i, e) in manifest.shapes.iter().enumerate() {
            if e.id != i {
                return Err(Error::format(dir.join(MANIFEST_FILE), format!("entry {i} has id {}", e.id)));
            }
            let mesh = read_obj(resolve(dir, &e.mesh))?;
            let samples = match &e.samples {
                Some(name) => Some(SampleSet::read(e.id, e.surface_count, resolve(dir, name))?),
                None => None,
            };
            shapes.push(ShapeRecord {
                id: e.id,
                params: e.params,
                mesh,
                features: e.features,
                samples,
                sample_seed: e.sample_seed,
            });
        }
        Ok(Dataset {
            shapes,
            transform: manifest.transform,
            seed: manifest.seed,
            generator: manifest.generator,
            mesh_resolution: manifest.mesh_resolution,
            measure: manifest.measure,
            samples: manifest.samples,
        })
    }
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::format(&path, format!("unsupported manifest version {}", manifest.version)));
    }
    Ok(manifest)
}

fn resolve(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
