use std::path::Path;

use inr_shape::model::{read_checkpoint_header, ModelParams};
use inr_shape::Result;

/// A checkpoint in the precision it was trained in.
#[derive(Clone, Debug)]
pub enum LoadedModel {
    F32(ModelParams<f32>),
    F64(ModelParams<f64>),
}

/// Runs `$body` with `$m` bound to the concrete model.
#[macro_export]
macro_rules! with_model {
    ($loaded:expr, |$m:ident| $body:expr) => {
        match $loaded {
            $crate::loaded::LoadedModel::F32($m) => $body,
            $crate::loaded::LoadedModel::F64($m) => $body,
        }
    };
}

impl LoadedModel {
    pub fn load(path: &Path) -> Result<Self> {
        let header = read_checkpoint_header(path)?;
        Ok(if header.precision == "f32" {
            LoadedModel::F32(ModelParams::load(path)?)
        } else {
            LoadedModel::F64(ModelParams::load(path)?)
        })
    }

    pub fn precision(&self) -> &'static str {
        match self {
            LoadedModel::F32(_) => "f32",
            LoadedModel::F64(_) => "f64",
        }
    }

    pub fn arch(&self) -> &inr_shape::model::Architecture {
        with_model!(self, |m| &m.arch)
    }

    pub fn features(&self) -> &[inr_shape::dataset::FeatureVector] {
        with_model!(self, |m| &m.features)
    }

    pub fn scaler(&self) -> &inr_shape::dataset::FeatureScaler {
        with_model!(self, |m| &m.scaler)
    }

    pub fn shape_count(&self) -> usize {
        with_model!(self, |m| m.shape_count())
    }

    pub fn is_conditioned(&self) -> bool {
        with_model!(self, |m| m.is_conditioned())
    }
}
