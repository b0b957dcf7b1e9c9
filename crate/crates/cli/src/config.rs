use std::path::Path;

use serde::Deserialize;

use crate::args::{DatasetGenArgs, EditArgs, EvaluateArgs, GenerateArgs, ReconstructArgs, ServeArgs, TrainArgs};
use crate::error::{CliError, CliResult};

/// Settings file with one optional table per command, keyed like the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset_gen: Option<DatasetGenArgs>,
    pub train: Option<TrainArgs>,
    pub reconstruct: Option<ReconstructArgs>,
    pub generate: Option<GenerateArgs>,
    pub edit: Option<EditArgs>,
    pub evaluate: Option<EvaluateArgs>,
    pub serve: Option<ServeArgs>,
}

impl ConfigFile {
    /// Reads TOML unless the extension is `.json`.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("--config: cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::usage(format!("--config {}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::usage(format!("--config {}: {e}", path.display())))
        }
    }
}

/// Fills every unset flag from the file section.
pub trait Merge {
    fn merge(&mut self, file: Self);
}

macro_rules! merge_impl {
    ($ty:ty; opts: $($o:ident),*; flags: $($f:ident),*; lists: $($l:ident),*) => {
        impl Merge for $ty {
            fn merge(&mut self, file: Self) {
                $( if self.$o.is_none() { self.$o = file.$o; } )*
                $( self.$f |= file.$f; )*
                $( if self.$l.is_empty() { self.$l = file.$l; } )*
            }
        }
    };
}

merge_impl!(DatasetGenArgs;
    opts: n, seed, out, resolution, split_fraction, surface_samples, perturbed_samples, sigma, iou_resolution, reference;
    flags: no_samples;
    lists: import);
merge_impl!(TrainArgs;
    opts: dataset, out, epochs, latent_dim, fixed_features, lambda, corr_weight, seed, points, lr,
        hidden_width, hidden_layers, precision, log, checkpoint_every;
    flags: full;
    lists: );
merge_impl!(ReconstructArgs; opts: ckpt, shape_id, resolution, out; flags: ; lists: );
merge_impl!(GenerateArgs;
    opts: ckpt, n, seed, out, volume, isthmus, symmetry, resolution, clamp_sigma;
    flags: no_clamp, no_measure;
    lists: );
merge_impl!(EditArgs; opts: ckpt, shape_id, out, resolution, clamp_sigma; flags: no_clamp; lists: sweep);
merge_impl!(EvaluateArgs;
    opts: ckpt, ckpt_b, dataset, out, plots, n, seed, resolution, chamfer_samples, unit_length;
    flags: skip_reconstruction, skip_generation;
    lists: );
merge_impl!(ServeArgs; opts: ckpt, port, host, max_payload_bytes, clamp_sigma; flags: ; lists: );
