//! The conditioned SDF network and its per-shape latent table.

mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{check_layers, Layer, Tensor2};
use crate::dataset::{FeatureScaler, FeatureVector, FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::mesh::Point3;
use crate::scalar::Scalar;

pub use checkpoint::{read_checkpoint_header, CheckpointHeader, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

pub const DEFAULT_LATENT_DIM: usize = 64;
pub const DEFAULT_HIDDEN_WIDTH: usize = 256;
pub const DEFAULT_HIDDEN_LAYERS: usize = 3;
pub const DEFAULT_LATENT_SIGMA: f64 = 0.01;

/// Points per network evaluation chunk during inference.
const EVAL_CHUNK: usize = 8192;

/// Network shape and latent layout. The code is `fixed ∥ trainable`; the
/// fixed slots hold z-scored features in the order of `fixed_features`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub latent_dim: usize,
    /// Indices into [`FEATURE_NAMES`].
    pub fixed_features: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            hidden_layers: DEFAULT_HIDDEN_LAYERS,
            latent_dim: DEFAULT_LATENT_DIM,
            fixed_features: Vec::new(),
        }
    }
}

impl Architecture {
    pub fn conditioned(latent_dim: usize) -> Self {
        Self {
            latent_dim,
            fixed_features: vec![0, 1, 2],
            ..Self::default()
        }
    }

    pub fn fixed_count(&self) -> usize {
        self.fixed_features.len()
    }

    pub fn code_width(&self) -> usize {
        self.fixed_count() + self.latent_dim
    }

    pub fn input_width(&self) -> usize {
        3 + self.code_width()
    }

    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = self.input_width();
        for _ in 0..self.hidden_layers {
            dims.push((fan_in, self.hidden_width));
            fan_in = self.hidden_width;
        }
        dims.push((fan_in, 1));
        dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        if self.latent_dim == 0 && self.fixed_features.is_empty() {
            return Err(Error::Config("the latent code is empty".into()));
        }
        let mut seen = [false; 3];
        for &f in &self.fixed_features {
            if f >= FEATURE_NAMES.len() || std::mem::replace(&mut seen[f], true) {
                return Err(Error::Config(format!("invalid fixed feature list {:?}", self.fixed_features)));
            }
        }
        Ok(())
    }
}

/// How the parameters were initialised; stored with the checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitInfo {
    pub scheme: String,
    pub weight_seed: u64,
    pub latent_seed: u64,
    pub latent_sigma: f64,
}

/// A full latent code split into its fixed and trainable parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentCode<T> {
    pub fixed: Vec<T>,
    pub trainable: Vec<T>,
}

impl<T: Scalar> LatentCode<T> {
    pub fn from_full(full: &[T], fixed_count: usize) -> Result<Self> {
        if fixed_count > full.len() {
            return Err(Error::Shape(format!("code of length {} has no room for {fixed_count} fixed slots", full.len())));
        }
        Ok(Self {
            fixed: full[..fixed_count].to_vec(),
            trainable: full[fixed_count..].to_vec(),
        })
    }

    pub fn full(&self) -> Vec<T> {
        self.fixed.iter().chain(&self.trainable).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.fixed.len() + self.trainable.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cast<U: Scalar>(&self) -> LatentCode<U> {
        LatentCode {
            fixed: self.fixed.iter().map(|v| U::c(v.as_f64())).collect(),
            trainable: self.trainable.iter().map(|v| U::c(v.as_f64())).collect(),
        }
    }
}

/// Network weights plus one latent row per training shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub arch: Architecture,
    pub layers: Vec<Layer<T>>,
    /// `shapes × code_width`
    pub latents: Tensor2<T>,
    pub scaler: FeatureScaler,
    /// Unscaled features of the training shapes, in latent-row order.
    pub features: Vec<FeatureVector>,
    pub init: InitInfo,
    /// Free-form training record written into checkpoints.
    pub training: Option<serde_json::Value>,
}

/// Kaiming-style uniform weights: bound `sqrt(6 / fan_in)` for layers that
/// feed a ReLU and `sqrt(3 / fan_in)` for the linear output; zero biases.
pub fn init_layers<T: Scalar>(arch: &Architecture, seed: u64) -> Result<Vec<Layer<T>>> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = arch.layer_dims();
    let last = dims.len() - 1;
    Ok(dims
        .into_iter()
        .enumerate()
        .map(|(i, (fan_in, fan_out))| {
            let gain = if i == last { 3.0 } else { 6.0 };
            let bound = (gain / fan_in as f64).sqrt();
            let data = (0..fan_in * fan_out).map(|_| T::c(rng.random_range(-bound..bound))).collect();
            Layer {
                weight: Tensor2::from_vec(fan_in, fan_out, data).expect("sized by construction"),
                bias: Tensor2::zeros(1, fan_out),
            }
        })
        .collect())
}

/// Latent table with trainable entries drawn i.i.d. from `N(0, sigma0²)` and
/// fixed slots copied from the given (already scaled) feature rows.
pub fn init_latents<T: Scalar>(
    fixed: &[Vec<f64>],
    latent_dim: usize,
    sigma0: f64,
    seed: u64,
) -> Result<Tensor2<T>> {
    let n = fixed.len();
    if n == 0 {
        return Err(Error::Parameter("latent table needs at least one shape".into()));
    }
    let k = fixed[0].len();
    if fixed.iter().any(|r| r.len() != k) {
        return Err(Error::Shape("fixed rows have different lengths".into()));
    }
    let normal = Normal::new(0.0, sigma0).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * (k + latent_dim));
    for row in fixed {
        data.extend(row.iter().map(|&v| T::c(v)));
        data.extend((0..latent_dim).map(|_| T::c(normal.sample(&mut rng))));
    }
    Tensor2::from_vec(n, k + latent_dim, data)
}

impl<T: Scalar> ModelParams<T> {
    /// Fresh model for a training population. The feature scaler is fitted
    /// on `features` when the architecture has fixed slots.
    pub fn new(arch: Architecture, features: &[FeatureVector], weight_seed: u64, latent_seed: u64) -> Result<Self> {
        arch.validate()?;
        let scaler = if features.len() >= 2 {
            FeatureScaler::fit(features)?
        } else {
            FeatureScaler::identity()
        };
        let fixed: Vec<Vec<f64>> = features
            .iter()
            .map(|f| {
                let z = scaler.scale(f);
                arch.fixed_features.iter().map(|&i| z[i]).collect()
            })
            .collect();
        let latents = init_latents(&fixed, arch.latent_dim, DEFAULT_LATENT_SIGMA, latent_seed)?;
        let layers = init_layers(&arch, weight_seed)?;
        Ok(Self {
            arch,
            layers,
            latents,
            scaler,
            features: features.to_vec(),
            init: InitInfo {
                scheme: "kaiming-uniform".into(),
                weight_seed,
                latent_seed,
                latent_sigma: DEFAULT_LATENT_SIGMA,
            },
            training: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        check_layers(&self.layers)?;
        let dims: Vec<_> = self.layers.iter().map(|l| (l.fan_in(), l.fan_out())).collect();
        if dims != self.arch.layer_dims() {
            return Err(Error::Shape(format!("layer sizes {dims:?} disagree with the architecture")));
        }
        if self.latents.cols() != self.arch.code_width() {
            return Err(Error::Shape(format!(
                "latent table has {} columns, expected {}",
                self.latents.cols(),
                self.arch.code_width()
            )));
        }
        if self.features.len() != self.latents.rows() {
            return Err(Error::Shape("feature pool and latent table differ in length".into()));
        }
        if !self.is_finite() {
            return Err(Error::State("model contains non-finite parameters".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.latents.all_finite() && self.layers.iter().all(|l| l.weight.all_finite() && l.bias.all_finite())
    }

    pub fn shape_count(&self) -> usize {
        self.latents.rows()
    }

    pub fn is_conditioned(&self) -> bool {
        self.arch.fixed_count() > 0
    }

    pub fn code(&self, shape: usize) -> Result<LatentCode<T>> {
        if shape >= self.shape_count() {
            return Err(Error::UnknownShape(shape));
        }
        LatentCode::from_full(self.latents.row(shape), self.arch.fixed_count())
    }

    /// Fixed-slot values for unscaled features.
    pub fn fixed_slots(&self, features: &FeatureVector) -> Vec<T> {
        let z = self.scaler.scale(features);
        self.arch.fixed_features.iter().map(|&i| T::c(z[i])).collect()
    }

    /// Unscaled value of each fixed slot, `None` for features not conditioned on.
    pub fn conditioned_features(&self, code: &LatentCode<T>) -> [Option<f64>; 3] {
        let mut out = [None; 3];
        for (slot, &f) in self.arch.fixed_features.iter().enumerate() {
            if let Some(z) = code.fixed.get(slot) {
                out[f] = Some(self.scaler.unscale_one(f, z.as_f64()));
            }
        }
        out
    }

    fn check_code(&self, code: &[T]) -> Result<()> {
        if code.len() != self.arch.code_width() {
            return Err(Error::Shape(format!(
                "code has {} entries, network expects {}",
                code.len(),
                self.arch.code_width()
            )));
        }
        Ok(())
    }

    /// Network output at each point for one full code. Order-preserving;
    /// the code's contribution to the first layer is folded into its bias.
    pub fn predict_sdf(&self, code: &[T], points: &[Point3<T>]) -> Result<Vec<T>> {
        self.check_code(code)?;
        check_layers(&self.layers)?;
        let first = &self.layers[0];
        let width = first.fan_out();
        let mut folded = first.bias.clone();
        for (i, &c) in code.iter().enumerate() {
            for (b, &w) in folded.data_mut().iter_mut().zip(first.weight.row(3 + i)) {
                *b += c * w;
            }
        }
        let spatial = &first.weight.data()[..3 * width];
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(EVAL_CHUNK) {
            let m = chunk.len();
            let mut h = Tensor2::zeros(m, width);
            for (row, _) in h.data_mut().chunks_exact_mut(width).zip(chunk) {
                row.copy_from_slice(folded.data());
            }
            let flat: Vec<T> = chunk.iter().flatten().copied().collect();
            T::gemm(m, 3, width, T::one(), &flat, (3, 1), spatial, (width as isize, 1), T::one(), h.data_mut(), width as isize);
            let last = self.layers.len() - 1;
            for (li, layer) in self.layers.iter().enumerate() {
                if li > 0 {
                    h = affine(&h, layer)?;
                }
                if li < last {
                    relu_in_place(&mut h);
                }
            }
            out.extend_from_slice(h.data());
        }
        Ok(out)
    }

    /// Converts every parameter to another precision.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            arch: self.arch.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: l.weight.cast(),
                    bias: l.bias.cast(),
                })
                .collect(),
            latents: self.latents.cast(),
            scaler: self.scaler,
            features: self.features.clone(),
            init: self.init.clone(),
            training: self.training.clone(),
        }
    }
}

fn relu_in_place<T: Scalar>(x: &mut Tensor2<T>) {
    for v in x.data_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

fn affine<T: Scalar>(x: &Tensor2<T>, layer: &Layer<T>) -> Result<Tensor2<T>> {
    let mut out = Tensor2::zeros(x.rows(), layer.fan_out());
    let cols = out.cols();
    for row in out.data_mut().chunks_exact_mut(cols) {
        row.copy_from_slice(layer.bias.data());
    }
    if x.cols() != layer.fan_in() {
        return Err(Error::Shape("activation width does not match layer".into()));
    }
    T::gemm(
        x.rows(),
        x.cols(),
        cols,
        T::one(),
        x.data(),
        (x.cols() as isize, 1),
        layer.weight.data(),
        (cols as isize, 1),
        T::one(),
        out.data_mut(),
        cols as isize,
    );
    Ok(out)
}
