//! Turning latent codes into meshes: reconstruction, random cohorts and
//! feature edits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{measure_features, FeatureVector, MeasureConfig, FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::mesh::{marching_cubes, ScalarGrid, TriMesh};
use crate::model::{LatentCode, ModelParams};
use crate::scalar::Scalar;

pub const DEFAULT_RESOLUTION: usize = 64;
pub const PREVIEW_RESOLUTION: usize = 48;
/// Edited and overridden features are clamped to this many population
/// standard deviations around the population mean.
pub const DEFAULT_CLAMP_SIGMA: f64 = 3.0;

/// A synthesized surface; `empty` flags a code whose field never crosses 0.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub mesh: TriMesh<f64>,
    pub empty: bool,
}

/// Evaluates the network at the `n³` cell centres of the unit cube.
pub fn sdf_grid<T: Scalar>(model: &ModelParams<T>, code: &[T], resolution: usize) -> Result<ScalarGrid<f64>> {
    if resolution < 8 {
        return Err(Error::Config(format!("grid resolution {resolution} is below 8")));
    }
    let points = ScalarGrid::<T>::unit_cube_cell_center_positions(resolution);
    let values = model.predict_sdf(code, &points)?;
    let h = 1.0 / resolution as f64;
    ScalarGrid::new([resolution; 3], [0.5 * h; 3], h, values.into_iter().map(|v| v.as_f64()).collect())
}

/// Zero level set of the network for one code.
pub fn synthesize<T: Scalar>(model: &ModelParams<T>, code: &[T], resolution: usize) -> Result<Synthesis> {
    let grid = sdf_grid(model, code, resolution)?;
    if !grid.all_finite() {
        return Err(Error::State("network produced non-finite values".into()));
    }
    let mesh = marching_cubes(&grid, 0.0)?;
    let empty = mesh.is_empty();
    if empty {
        log::warn!("code produced an empty level set");
    }
    Ok(Synthesis { mesh, empty })
}

/// Mesh of training shape `shape` from its own latent code.
pub fn reconstruct<T: Scalar>(model: &ModelParams<T>, shape: usize, resolution: usize) -> Result<Synthesis> {
    let code = model.code(shape)?;
    synthesize(model, &code.full(), resolution)
}

/// Per-dimension normal fit of the trainable latents plus the pool of
/// z-scored fixed rows seen in training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentSampler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub fixed_features: Vec<usize>,
    pub fixed_pool: Vec<Vec<f64>>,
    /// Training population mean and standard deviation of every feature
    /// (unscaled), used for clamping and extrapolation warnings.
    pub feature_mean: [f64; 3],
    pub feature_std: [f64; 3],
    pub feature_min: [f64; 3],
    pub feature_max: [f64; 3],
}

pub fn fit_sampler<T: Scalar>(model: &ModelParams<T>) -> Result<LatentSampler> {
    let n = model.shape_count();
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 trained codes, have {n}")));
    }
    let k = model.arch.fixed_count();
    let dims = model.arch.latent_dim;
    let mut mean = vec![0.0; dims];
    let mut std = vec![0.0; dims];
    for j in 0..dims {
        let col: Vec<f64> = (0..n).map(|r| model.latents.get(r, k + j).as_f64()).collect();
        let m = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        mean[j] = m;
        std[j] = var.sqrt();
    }
    let fixed_pool = (0..n)
        .map(|r| model.latents.row(r)[..k].iter().map(|v| v.as_f64()).collect())
        .collect();
    let mut feature_min = [f64::INFINITY; 3];
    let mut feature_max = [f64::NEG_INFINITY; 3];
    for f in &model.features {
        for (a, v) in f.to_array().into_iter().enumerate() {
            feature_min[a] = feature_min[a].min(v);
            feature_max[a] = feature_max[a].max(v);
        }
    }
    Ok(LatentSampler {
        mean,
        std,
        fixed_features: model.arch.fixed_features.clone(),
        fixed_pool,
        feature_mean: model.scaler.mean,
        feature_std: model.scaler.std,
        feature_min,
        feature_max,
    })
}

impl LatentSampler {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Requested feature values in training units; `None` keeps the sampled or
/// base value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureOverrides {
    pub volume: Option<f64>,
    pub isthmus: Option<f64>,
    pub symmetry: Option<f64>,
}

impl FeatureOverrides {
    pub fn to_array(self) -> [Option<f64>; 3] {
        [self.volume, self.isthmus, self.symmetry]
    }

    pub fn from_array(a: [Option<f64>; 3]) -> Self {
        Self {
            volume: a[0],
            isthmus: a[1],
            symmetry: a[2],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.to_array().iter().all(Option::is_none)
    }
}

/// Writes requested features into the fixed slots of `code`. Only the
/// requested slots are touched; their z-scores are clamped to
/// `±clamp_sigma` when given. Returns human-readable warnings.
pub fn apply_overrides<T: Scalar>(
    model: &ModelParams<T>,
    sampler_range: Option<(&[f64; 3], &[f64; 3])>,
    code: &mut LatentCode<T>,
    overrides: &FeatureOverrides,
    clamp_sigma: Option<f64>,
) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    for (f, value) in overrides.to_array().into_iter().enumerate() {
        let Some(value) = value else { continue };
        if !value.is_finite() {
            return Err(Error::Parameter(format!("{} override is not finite", FEATURE_NAMES[f])));
        }
        let Some(slot) = model.arch.fixed_features.iter().position(|&x| x == f) else {
            return Err(Error::UnsupportedModel(format!("model is not conditioned on {}", FEATURE_NAMES[f])));
        };
        if let Some((lo, hi)) = sampler_range {
            if value < lo[f] || value > hi[f] {
                warnings.push(format!(
                    "{} {value} lies outside the training range [{}, {}]",
                    FEATURE_NAMES[f], lo[f], hi[f]
                ));
            }
        }
        let mut z = model.scaler.scale_one(f, value);
        if let Some(c) = clamp_sigma {
            if z.abs() > c {
                warnings.push(format!("{} clamped to {c} standard deviations", FEATURE_NAMES[f]));
                z = z.clamp(-c, c);
            }
        }
        code.fixed[slot] = T::c(z);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(warnings)
}

/// Random code: trainable dims from the fitted normals, fixed slots from one
/// training row drawn from the pool (all features jointly), then overrides.
pub fn sample_code<T: Scalar, R: Rng>(
    model: &ModelParams<T>,
    sampler: &LatentSampler,
    rng: &mut R,
    overrides: &FeatureOverrides,
    clamp_sigma: Option<f64>,
) -> Result<(LatentCode<T>, Vec<String>)> {
    if sampler.mean.len() != model.arch.latent_dim || sampler.fixed_features != model.arch.fixed_features {
        return Err(Error::Shape("sampler was fitted on a different architecture".into()));
    }
    let fixed = if model.arch.fixed_count() > 0 {
        if sampler.fixed_pool.is_empty() {
            return Err(Error::State("sampler has an empty feature pool".into()));
        }
        let row = &sampler.fixed_pool[rng.random_range(0..sampler.fixed_pool.len())];
        row.iter().map(|&v| T::c(v)).collect()
    } else {
        Vec::new()
    };
    let mut trainable = Vec::with_capacity(sampler.mean.len());
    for (&m, &s) in sampler.mean.iter().zip(&sampler.std) {
        let v = if s > 0.0 {
            Normal::new(m, s).map_err(|e| Error::Parameter(e.to_string()))?.sample(rng)
        } else {
            m
        };
        trainable.push(T::c(v));
    }
    let mut code = LatentCode { fixed, trainable };
    let warnings = apply_overrides(
        model,
        Some((&sampler.feature_min, &sampler.feature_max)),
        &mut code,
        overrides,
        clamp_sigma,
    )?;
    Ok((code, warnings))
}

/// One generated cohort member; the mesh itself is handed to the caller's
/// sink and not kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub index: usize,
    pub code: Vec<f64>,
    /// Unscaled conditioned value per feature (`None` if not conditioned).
    pub conditioned: [Option<f64>; 3],
    pub measured: Option<FeatureVector>,
    pub empty: bool,
    pub vertices: usize,
    pub faces: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortOptions {
    pub resolution: usize,
    pub overrides: FeatureOverrides,
    pub clamp_sigma: Option<f64>,
    /// Measure features of every non-empty mesh.
    pub measure: Option<MeasureConfig>,
}

impl Default for CohortOptions {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            overrides: FeatureOverrides::default(),
            clamp_sigma: Some(DEFAULT_CLAMP_SIGMA),
            measure: Some(MeasureConfig::default()),
        }
    }
}

/// Draws `n` random codes and synthesizes each, passing every mesh to
/// `sink` as it is produced.
pub fn generate_cohort<T: Scalar>(
    model: &ModelParams<T>,
    sampler: &LatentSampler,
    n: usize,
    seed: u64,
    opts: &CohortOptions,
    mut sink: impl FnMut(&CohortRecord, &Synthesis) -> Result<()>,
) -> Result<Vec<CohortRecord>> {
    if n == 0 {
        return Err(Error::Parameter("cohort size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let codes = (0..n)
        .map(|_| sample_code(model, sampler, &mut rng, &opts.overrides, opts.clamp_sigma))
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::with_capacity(n);
    for (index, (code, warnings)) in codes.into_iter().enumerate() {
        let full = code.full();
        let syn = synthesize(model, &full, opts.resolution)?;
        let measured = match (&opts.measure, syn.empty) {
            (Some(cfg), false) => measured_or_none(&syn.mesh, cfg),
            _ => None,
        };
        let record = CohortRecord {
            index,
            code: full.iter().map(|v| v.as_f64()).collect(),
            conditioned: model.conditioned_features(&code),
            measured,
            empty: syn.empty,
            vertices: syn.mesh.vertices.len(),
            faces: syn.mesh.faces.len(),
            warnings,
        };
        sink(&record, &syn)?;
        records.push(record);
    }
    Ok(records)
}

/// Features of a generated mesh. Non-closed or degenerate meshes (which
/// marching cubes should not produce) are reported as unmeasurable.
fn measured_or_none(mesh: &TriMesh<f64>, cfg: &MeasureConfig) -> Option<FeatureVector> {
    match measure_features(mesh, cfg) {
        Ok(f) => Some(f),
        Err(e) => {
            log::warn!("could not measure generated mesh: {e}");
            None
        }
    }
}

/// Per-feature changes in training units, applied in z-space so a zero
/// delta leaves the code bit-identical.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureDeltas {
    pub volume: f64,
    pub isthmus: f64,
    pub symmetry: f64,
}

impl FeatureDeltas {
    pub fn to_array(self) -> [f64; 3] {
        [self.volume, self.isthmus, self.symmetry]
    }
}

/// Base code with the fixed slots shifted by `deltas`; changed slots are
/// clamped like overrides.
pub fn edit_code<T: Scalar>(
    model: &ModelParams<T>,
    base: &LatentCode<T>,
    deltas: &FeatureDeltas,
    clamp_sigma: Option<f64>,
) -> Result<LatentCode<T>> {
    if !model.is_conditioned() {
        return Err(Error::UnsupportedModel("editing needs a model with fixed feature slots".into()));
    }
    check_base(model, base)?;
    let mut code = base.clone();
    for (f, d) in deltas.to_array().into_iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        if !d.is_finite() {
            return Err(Error::Parameter(format!("{} delta is not finite", FEATURE_NAMES[f])));
        }
        let Some(slot) = model.arch.fixed_features.iter().position(|&x| x == f) else {
            return Err(Error::UnsupportedModel(format!("model is not conditioned on {}", FEATURE_NAMES[f])));
        };
        let mut z = code.fixed[slot].as_f64() + d / model.scaler.std[f];
        if let Some(c) = clamp_sigma {
            z = z.clamp(-c, c);
        }
        code.fixed[slot] = T::c(z);
    }
    Ok(code)
}

fn check_base<T: Scalar>(model: &ModelParams<T>, base: &LatentCode<T>) -> Result<()> {
    if base.fixed.len() != model.arch.fixed_count() || base.trainable.len() != model.arch.latent_dim {
        return Err(Error::Shape(format!(
            "base code has {}+{} entries, model expects {}+{}",
            base.fixed.len(),
            base.trainable.len(),
            model.arch.fixed_count(),
            model.arch.latent_dim
        )));
    }
    Ok(())
}

/// Base code with chosen features set to absolute values (training units).
pub fn edit_code_to<T: Scalar>(
    model: &ModelParams<T>,
    base: &LatentCode<T>,
    targets: &FeatureOverrides,
    clamp_sigma: Option<f64>,
) -> Result<(LatentCode<T>, Vec<String>)> {
    if !model.is_conditioned() {
        return Err(Error::UnsupportedModel("editing needs a model with fixed feature slots".into()));
    }
    check_base(model, base)?;
    let mut code = base.clone();
    let (lo, hi) = feature_range(&model.features);
    let warnings = apply_overrides(model, Some((&lo, &hi)), &mut code, targets, clamp_sigma)?;
    Ok((code, warnings))
}

fn feature_range(features: &[FeatureVector]) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for f in features {
        for (a, v) in f.to_array().into_iter().enumerate() {
            lo[a] = lo[a].min(v);
            hi[a] = hi[a].max(v);
        }
    }
    (lo, hi)
}

/// Linear sweep of one feature between two values (training units).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub feature: usize,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl Sweep {
    /// Parses `name=lo:hi:steps`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("sweep {text:?} is not of the form feature=lo:hi:steps"));
        let (name, range) = text.split_once('=').ok_or_else(bad)?;
        let feature = crate::dataset::feature_index(name)?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let from: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let to: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if steps < 2 || !from.is_finite() || !to.is_finite() {
            return Err(bad());
        }
        Ok(Self { feature, from, to, steps })
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.steps)
            .map(|i| self.from + (self.to - self.from) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct EditStep {
    pub value: f64,
    pub code: Vec<f64>,
    pub synthesis: Synthesis,
    pub measured: Option<FeatureVector>,
    pub components: usize,
    pub warnings: Vec<String>,
}

/// Holds the trainable part of `base` and sweeps one fixed slot,
/// synthesizing and measuring every step.
pub fn edit_sweep<T: Scalar>(
    model: &ModelParams<T>,
    base: &LatentCode<T>,
    sweep: &Sweep,
    resolution: usize,
    measure: &MeasureConfig,
    clamp_sigma: Option<f64>,
) -> Result<Vec<EditStep>> {
    let mut out = Vec::with_capacity(sweep.steps);
    for value in sweep.values() {
        let mut targets = [None; 3];
        targets[sweep.feature] = Some(value);
        let (code, warnings) = edit_code_to(model, base, &FeatureOverrides::from_array(targets), clamp_sigma)?;
        let full = code.full();
        let synthesis = synthesize(model, &full, resolution)?;
        let measured = if synthesis.empty {
            None
        } else {
            measured_or_none(&synthesis.mesh, measure)
        };
        out.push(EditStep {
            value,
            code: full.iter().map(|v| v.as_f64()).collect(),
            components: synthesis.mesh.connected_components(),
            measured,
            synthesis,
            warnings,
        });
    }
    Ok(out)
}
