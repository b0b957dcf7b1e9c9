#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use inr_shape::dataset::{generate_population, Dataset, PopulationConfig, SampleSpec};
use inr_shape::model::{Architecture, ModelParams};
use inr_shape::training::{TrainConfig, Trainer};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_inr-shape"));
    c.env("RUST_LOG", "warn");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON on stderr: {text}"));
    serde_json::from_str(line).unwrap()
}

/// Flags for a dataset small enough to build in well under a second.
pub const SMALL_DATASET: &[&str] = &[
    "--resolution",
    "24",
    "--surface-samples",
    "400",
    "--perturbed-samples",
    "200",
    "--iou-resolution",
    "32",
];

/// Flags for a tiny network.
pub const SMALL_NET: &[&str] = &[
    "--hidden-width",
    "16",
    "--hidden-layers",
    "2",
    "--latent-dim",
    "4",
    "--points",
    "100",
];

pub fn small_dataset(n: usize, seed: u64) -> Dataset {
    generate_population(&PopulationConfig {
        n,
        seed,
        mesh_resolution: 24,
        samples: Some(SampleSpec {
            n_surface: 400,
            n_perturbed: 200,
            sigma: 0.1,
        }),
        ..PopulationConfig::default()
    })
    .unwrap()
}

/// Briefly trained tiny model; shapes come out blobby but non-empty.
pub fn small_model(ds: &Dataset, fixed: Vec<usize>, epochs: usize) -> ModelParams<f64> {
    let arch = Architecture {
        hidden_width: 16,
        hidden_layers: 2,
        latent_dim: 4,
        fixed_features: fixed,
    };
    let cfg = TrainConfig {
        epochs,
        points_per_shape: 100,
        learning_rate: 3e-3,
        seed: 1,
        ..TrainConfig::default()
    };
    let samples = ds.sample_sets().unwrap();
    let mut t = Trainer::<f64>::new(arch, &samples, &ds.features(), cfg).unwrap();
    t.run(|_| {}).unwrap();
    t.model
}

pub fn path_str(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

pub fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}
