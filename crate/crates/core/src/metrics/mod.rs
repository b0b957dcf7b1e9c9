//! Reconstruction, steerability and distribution statistics.

mod stats;

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureVector, FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::generation::{generate_cohort, reconstruct, CohortOptions, CohortRecord, LatentSampler, Synthesis};
use crate::mesh::{chamfer_distance, TriMesh, DEFAULT_CHAMFER_SAMPLES};
use crate::model::ModelParams;
use crate::scalar::Scalar;

pub use stats::{aligned_histograms, ks_statistic, mean_std, pearson, HistogramPair};

pub const REPORT_VERSION: u32 = 1;
/// Cohorts with a larger share of empty meshes are not evaluated.
pub const MAX_EMPTY_RATE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    /// Chamfer distance per shape in unit-cube units; `None` for an empty
    /// reconstruction.
    pub chamfer: Vec<Option<f64>>,
    pub mean: f64,
    pub std: f64,
    pub empty: usize,
    /// Same statistics in physical units when a unit scale is known.
    pub physical_mean: Option<f64>,
    pub physical_std: Option<f64>,
    pub resolution: usize,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub resolution: usize,
    pub chamfer_samples: usize,
    pub seed: u64,
    /// Physical length of one unit-cube unit, if known.
    pub unit_length: Option<f64>,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            resolution: crate::generation::DEFAULT_RESOLUTION,
            chamfer_samples: DEFAULT_CHAMFER_SAMPLES,
            seed: 0,
            unit_length: None,
        }
    }
}

/// Chamfer distance between each reference mesh and whatever `rebuild`
/// returns for its index.
pub fn evaluate_reconstruction_with(
    references: &[TriMesh<f64>],
    cfg: &ReconstructionConfig,
    mut rebuild: impl FnMut(usize) -> Result<Synthesis>,
) -> Result<ReconstructionReport> {
    let mut chamfer = Vec::with_capacity(references.len());
    for (i, reference) in references.iter().enumerate() {
        let syn = rebuild(i)?;
        if syn.empty {
            chamfer.push(None);
            continue;
        }
        let seed = cfg.seed.wrapping_add(i as u64);
        chamfer.push(Some(chamfer_distance(reference, &syn.mesh, cfg.chamfer_samples, seed)?));
    }
    let values: Vec<f64> = chamfer.iter().flatten().copied().collect();
    let (mean, std) = mean_std(&values);
    let empty = chamfer.len() - values.len();
    Ok(ReconstructionReport {
        mean,
        std,
        empty,
        physical_mean: cfg.unit_length.map(|u| mean * u),
        physical_std: cfg.unit_length.map(|u| std * u),
        chamfer,
        resolution: cfg.resolution,
        samples: cfg.chamfer_samples,
        seed: cfg.seed,
    })
}

/// Reconstructs every training shape from its own code.
pub fn evaluate_reconstruction<T: Scalar>(
    model: &ModelParams<T>,
    references: &[TriMesh<f64>],
    cfg: &ReconstructionConfig,
) -> Result<ReconstructionReport> {
    if references.len() != model.shape_count() {
        return Err(Error::Shape(format!(
            "{} reference meshes for {} trained shapes",
            references.len(),
            model.shape_count()
        )));
    }
    evaluate_reconstruction_with(references, cfg, |i| reconstruct(model, i, cfg.resolution))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSteerability {
    pub feature: String,
    pub conditioned: Vec<f64>,
    pub measured: Vec<f64>,
    /// `None` when either side has zero variance.
    pub pcc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteerabilityReport {
    pub n: usize,
    pub empty: usize,
    pub empty_rate: f64,
    pub features: Vec<FeatureSteerability>,
}

impl SteerabilityReport {
    pub fn pcc(&self, feature: &str) -> Option<f64> {
        self.features.iter().find(|f| f.feature == feature).and_then(|f| f.pcc)
    }
}

/// Pairs conditioned with measured features over a cohort. Members that are
/// empty or unmeasurable are left out of the pairs and counted as empty.
pub fn steerability_from_records(records: &[CohortRecord]) -> Result<SteerabilityReport> {
    let n = records.len();
    if n == 0 {
        return Err(Error::Parameter("empty cohort".into()));
    }
    let usable: Vec<(&CohortRecord, FeatureVector)> =
        records.iter().filter_map(|r| r.measured.map(|m| (r, m))).collect();
    let empty = n - usable.len();
    let empty_rate = empty as f64 / n as f64;
    if empty_rate > MAX_EMPTY_RATE {
        return Err(Error::EvaluationAborted(format!(
            "{empty} of {n} generated meshes are empty or unmeasurable ({:.1}%)",
            100.0 * empty_rate
        )));
    }
    let mut features = Vec::new();
    for (f, name) in FEATURE_NAMES.iter().enumerate() {
        if usable.iter().any(|(r, _)| r.conditioned[f].is_none()) {
            continue;
        }
        let conditioned: Vec<f64> = usable.iter().map(|(r, _)| r.conditioned[f].expect("checked")).collect();
        let measured: Vec<f64> = usable.iter().map(|(_, m)| m.to_array()[f]).collect();
        let pcc = match pearson(&conditioned, &measured) {
            Ok(v) => Some(v),
            Err(Error::UndefinedCorrelation(_)) => None,
            Err(e) => return Err(e),
        };
        features.push(FeatureSteerability {
            feature: name.to_string(),
            conditioned,
            measured,
            pcc,
        });
    }
    if features.is_empty() {
        return Err(Error::UnsupportedModel("cohort has no conditioned features".into()));
    }
    Ok(SteerabilityReport {
        n,
        empty,
        empty_rate,
        features,
    })
}

/// Generates a cohort of `n` and correlates conditioned with measured features.
pub fn evaluate_steerability<T: Scalar>(
    model: &ModelParams<T>,
    sampler: &LatentSampler,
    n: usize,
    seed: u64,
    opts: &CohortOptions,
) -> Result<(SteerabilityReport, Vec<CohortRecord>)> {
    if !model.is_conditioned() {
        return Err(Error::UnsupportedModel("steerability needs a model with fixed feature slots".into()));
    }
    if opts.measure.is_none() {
        return Err(Error::Config("steerability needs feature measurement enabled".into()));
    }
    let records = generate_cohort(model, sampler, n, seed, opts, |_, _| Ok(()))?;
    Ok((steerability_from_records(&records)?, records))
}

/// PCC per feature for two conditioned checkpoints evaluated the same way.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteerabilityComparison {
    pub features: Vec<(String, Option<f64>, Option<f64>)>,
}

pub fn compare_steerability(a: &SteerabilityReport, b: &SteerabilityReport) -> SteerabilityComparison {
    SteerabilityComparison {
        features: FEATURE_NAMES
            .iter()
            .map(|name| (name.to_string(), a.pcc(name), b.pcc(name)))
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDistribution {
    pub feature: String,
    pub ks: f64,
    pub histogram: HistogramPair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionComparison {
    pub training_count: usize,
    pub generated_count: usize,
    /// Set when either side has fewer than 30 samples.
    pub small_sample: bool,
    pub features: Vec<FeatureDistribution>,
}

impl DistributionComparison {
    pub fn ks(&self, feature: &str) -> Option<f64> {
        self.features.iter().find(|f| f.feature == feature).map(|f| f.ks)
    }
}

/// Histograms and KS statistics of training versus generated features.
pub fn compare_distributions(training: &[FeatureVector], generated: &[FeatureVector]) -> Result<DistributionComparison> {
    let small_sample = training.len() < 30 || generated.len() < 30;
    if small_sample {
        log::warn!(
            "distribution comparison on small samples ({} training, {} generated)",
            training.len(),
            generated.len()
        );
    }
    let mut features = Vec::with_capacity(3);
    for (f, name) in FEATURE_NAMES.iter().enumerate() {
        let a: Vec<f64> = training.iter().map(|v| v.to_array()[f]).collect();
        let b: Vec<f64> = generated.iter().map(|v| v.to_array()[f]).collect();
        features.push(FeatureDistribution {
            feature: name.to_string(),
            ks: ks_statistic(&a, &b)?,
            histogram: aligned_histograms(&a, &b)?,
        });
    }
    Ok(DistributionComparison {
        training_count: training.len(),
        generated_count: generated.len(),
        small_sample,
        features,
    })
}

/// Everything `evaluate` writes, as one versioned JSON document.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub reconstruction: Option<ReconstructionReport>,
    pub steerability: Option<SteerabilityReport>,
    pub steerability_b: Option<SteerabilityReport>,
    pub comparison: Option<SteerabilityComparison>,
    pub distributions: Option<DistributionComparison>,
    pub generated_empty_rate: Option<f64>,
}

impl EvalReport {
    pub fn new() -> Self {
        Self {
            version: REPORT_VERSION,
            ..Self::default()
        }
    }
}
