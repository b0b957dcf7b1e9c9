//! Training data: synthetic two-lobe shapes, sample sets and dataset files.

pub mod features;
pub mod lobes;
pub mod population;
pub mod samples;
pub mod store;

pub use features::{feature_index, measure_features, FeatureScaler, FeatureVector, MeasureConfig, FEATURE_NAMES};
pub use lobes::{generate_lobe_shape, mesh_lobes, LobeParams, LobeShape, ParamRanges};
pub use population::{generate_population, import_population, Dataset, PopulationConfig, SampleSpec, ShapeRecord};
pub use samples::{build_sample_set, perturb_surface_points, SampleConfig, SampleSet};
pub use store::{read_manifest, Manifest, ManifestEntry};
