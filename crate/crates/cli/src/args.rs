use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

/// Environment variable that overrides the server port.
pub const PORT_ENV: &str = "INR_SHAPE_PORT";

pub const DEFAULT_PORT: u16 = 8787;

#[derive(Debug, Parser)]
#[command(name = "inr-shape", version, about = "Steerable implicit shape models: data, training, generation, evaluation")]
pub struct Cli {
    /// TOML or JSON file with one table per command; flags win over it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate (or import) a normalized training population with SDF samples.
    DatasetGen(DatasetGenArgs),
    /// Train an auto-decoder on a dataset directory.
    Train(TrainArgs),
    /// Extract the mesh of one training shape from its learned code.
    Reconstruct(ReconstructArgs),
    /// Sample new shapes, optionally with fixed feature values.
    Generate(GenerateArgs),
    /// Sweep a conditioned feature of a training shape.
    Edit(EditArgs),
    /// Reconstruction, distribution and steerability metrics.
    Evaluate(EvaluateArgs),
    /// Serve reconstruct/generate/edit over HTTP.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct DatasetGenArgs {
    /// Number of synthetic shapes [default: 20].
    #[arg(long)]
    pub n: Option<usize>,
    /// Master seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Marching-cubes resolution of the ground-truth meshes [default: 64].
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Fraction of shapes generated without an isthmus [default: 0.25].
    #[arg(long)]
    pub split_fraction: Option<f64>,
    /// Surface samples per shape [default: 40000].
    #[arg(long)]
    pub surface_samples: Option<usize>,
    /// Perturbed samples per shape [default: 10000].
    #[arg(long)]
    pub perturbed_samples: Option<usize>,
    /// Perturbation standard deviation [default: 0.1].
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Voxel resolution of the symmetry score [default: 128].
    #[arg(long)]
    pub iou_resolution: Option<usize>,
    /// Skip SDF sampling (meshes and features only).
    #[arg(long)]
    pub no_samples: bool,
    /// Import these closed OBJ/STL meshes instead of generating shapes.
    #[arg(long, num_args = 1.., value_name = "MESH")]
    pub import: Vec<PathBuf>,
    /// Common anatomical reference point of imported meshes, "x,y,z".
    #[arg(long, value_name = "X,Y,Z")]
    pub reference: Option<String>,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainArgs {
    /// Dataset directory written by dataset-gen.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Checkpoint file to write.
    #[arg(long, value_name = "CKPT")]
    pub out: Option<PathBuf>,
    /// Training epochs [default: 2000].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Use the full 10000-epoch schedule unless --epochs is given.
    #[arg(long)]
    pub full: bool,
    /// Trainable latent dimensions [default: 64].
    #[arg(long)]
    pub latent_dim: Option<usize>,
    /// Conditioned features, e.g. "volume,isthmus,symmetry" or "none" [default: none].
    #[arg(long, value_name = "LIST")]
    pub fixed_features: Option<String>,
    /// Latent L2 weight [default: 1e-4].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Correlation loss weight; 0 disables it [default: 1].
    #[arg(long)]
    pub corr_weight: Option<f64>,
    /// Seed for initialization and point sampling [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// SDF points per shape per step [default: 1000].
    #[arg(long)]
    pub points: Option<usize>,
    /// Adam learning rate [default: 3e-4].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Hidden layer width [default: 256].
    #[arg(long)]
    pub hidden_width: Option<usize>,
    /// Number of hidden layers [default: 3].
    #[arg(long)]
    pub hidden_layers: Option<usize>,
    /// Arithmetic precision [default: f64].
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
    /// JSON-lines epoch log [default: <out>.log.jsonl].
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
    /// Write the checkpoint every K epochs as well as at the end.
    #[arg(long, value_name = "K")]
    pub checkpoint_every: Option<usize>,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct ReconstructArgs {
    #[arg(long, value_name = "CKPT")]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub shape_id: Option<usize>,
    /// Grid resolution [default: 64].
    #[arg(long)]
    pub resolution: Option<usize>,
    /// OBJ file to write [default: reconstruct_<id>.obj].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct GenerateArgs {
    #[arg(long, value_name = "CKPT")]
    pub ckpt: Option<PathBuf>,
    /// Cohort size [default: 1000].
    #[arg(long)]
    pub n: Option<usize>,
    /// Sampling seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for meshes and cohort.json.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Fix the volume of every sample (training units).
    #[arg(long)]
    pub volume: Option<f64>,
    /// Fix the isthmus area of every sample.
    #[arg(long)]
    pub isthmus: Option<f64>,
    /// Fix the symmetry score of every sample.
    #[arg(long)]
    pub symmetry: Option<f64>,
    /// Grid resolution [default: 64].
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Clamp fixed features to this many standard deviations [default: 3].
    #[arg(long)]
    pub clamp_sigma: Option<f64>,
    /// Do not clamp feature overrides.
    #[arg(long)]
    pub no_clamp: bool,
    /// Skip measuring the generated meshes.
    #[arg(long)]
    pub no_measure: bool,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct EditArgs {
    #[arg(long, value_name = "CKPT")]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub shape_id: Option<usize>,
    /// Feature sweep "name=from:to:steps"; may be repeated.
    #[arg(long, value_name = "SPEC")]
    pub sweep: Vec<String>,
    /// Output directory [default: edit_<id>].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Grid resolution [default: 64].
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Clamp edited features to this many standard deviations [default: 3].
    #[arg(long)]
    pub clamp_sigma: Option<f64>,
    #[arg(long)]
    pub no_clamp: bool,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "CKPT")]
    pub ckpt: Option<PathBuf>,
    /// Second conditioned checkpoint for a steerability comparison.
    #[arg(long, value_name = "CKPT")]
    pub ckpt_b: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Report file [default: report.json].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Directory for SVG histograms and scatter plots.
    #[arg(long, value_name = "DIR")]
    pub plots: Option<PathBuf>,
    /// Generated cohort size [default: 1000].
    #[arg(long)]
    pub n: Option<usize>,
    /// Cohort and Chamfer sampling seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid resolution [default: 64].
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Chamfer surface samples per mesh [default: 30000].
    #[arg(long)]
    pub chamfer_samples: Option<usize>,
    /// Physical length of one unit-cube unit, for Chamfer in physical units.
    #[arg(long)]
    pub unit_length: Option<f64>,
    #[arg(long)]
    pub skip_reconstruction: bool,
    #[arg(long)]
    pub skip_generation: bool,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct ServeArgs {
    #[arg(long, value_name = "CKPT")]
    pub ckpt: Option<PathBuf>,
    /// Listening port [default: 8787].
    #[arg(long, env = PORT_ENV)]
    pub port: Option<u16>,
    /// Bind address [default: 127.0.0.1].
    #[arg(long)]
    pub host: Option<String>,
    /// Largest mesh payload in bytes before truncation [default: 16 MiB].
    #[arg(long)]
    pub max_payload_bytes: Option<usize>,
    /// Clamp requested features to this many standard deviations [default: 3].
    #[arg(long)]
    pub clamp_sigma: Option<f64>,
}
