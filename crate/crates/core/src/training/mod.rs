//! Auto-decoder optimisation of the network and the latent table.

mod loss;

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, AdamState, Tensor2};
use crate::dataset::{FeatureVector, SampleSet};
use crate::error::{Error, Result};
use crate::model::{Architecture, ModelParams};
use crate::scalar::Scalar;

pub use loss::{correlation_loss, correlation_loss_grad, reconstruction_loss, CorrelationLoss};
use loss::{batch_gradients, trainable_norm2};

pub const DEFAULT_LAMBDA: f64 = 1e-4;
pub const DEFAULT_CORR_WEIGHT: f64 = 1.0;
pub const FULL_EPOCHS: usize = 10_000;
pub const DESK_EPOCHS: usize = 2_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub points_per_shape: usize,
    pub learning_rate: f64,
    /// Weight of the squared norm of the trainable code.
    pub lambda: f64,
    pub corr_weight: f64,
    pub corr_enabled: bool,
    pub seed: u64,
    /// Write a checkpoint every this many epochs (to `checkpoint_path`).
    pub checkpoint_every: Option<usize>,
    /// Output location; not recorded in checkpoints so they stay relocatable.
    #[serde(skip)]
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DESK_EPOCHS,
            points_per_shape: 1000,
            learning_rate: 3e-4,
            lambda: DEFAULT_LAMBDA,
            corr_weight: DEFAULT_CORR_WEIGHT,
            corr_enabled: true,
            seed: 0,
            checkpoint_every: None,
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, smallest_set: usize) -> Result<()> {
        if self.points_per_shape == 0 || self.points_per_shape > smallest_set {
            return Err(Error::Config(format!(
                "points per shape {} must lie in 1..={smallest_set}",
                self.points_per_shape
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda {} must be finite and >= 0", self.lambda)));
        }
        if !(self.corr_weight >= 0.0 && self.corr_weight.is_finite()) {
            return Err(Error::Config(format!("corr weight {} must be finite and >= 0", self.corr_weight)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::Config("checkpoint interval must be positive".into()));
        }
        Ok(())
    }

    /// Whether the epoch-end correlation step runs for a given model.
    pub fn correlation_active(&self, arch: &Architecture) -> bool {
        self.corr_enabled && self.corr_weight > 0.0 && arch.fixed_count() > 0 && arch.latent_dim > 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Mean squared SDF residual over every point drawn this epoch.
    pub mse: f64,
    /// Mean over shapes of `lambda·‖trainable‖²`.
    pub latent_l2: f64,
    /// Correlation loss summed over fixed features after the epoch; 0 when
    /// the model has no fixed slots.
    pub corr_loss: f64,
    pub wall_time_s: f64,
}

impl EpochReport {
    /// Every field except the wall time.
    pub fn same_values(&self, other: &Self) -> bool {
        self.epoch == other.epoch
            && self.mse.to_bits() == other.mse.to_bits()
            && self.latent_l2.to_bits() == other.latent_l2.to_bits()
            && self.corr_loss.to_bits() == other.corr_loss.to_bits()
    }
}

struct ShapeBatchSource<T> {
    points: Vec<[T; 3]>,
    sdf: Vec<T>,
}

/// Owns the model being trained together with its optimiser states and
/// random stream, so training can proceed one epoch at a time.
pub struct Trainer<T: Scalar> {
    pub model: ModelParams<T>,
    pub config: TrainConfig,
    sources: Vec<ShapeBatchSource<T>>,
    theta_adam: AdamState<T>,
    latent_adam: Vec<AdamState<T>>,
    corr_adam: AdamState<T>,
    rng: ChaCha8Rng,
    epoch: usize,
}

/// Seeds for weights, latents and the sampling stream, derived from one seed.
pub fn derive_seeds(seed: u64) -> (u64, u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (rng.random(), rng.random(), rng.random())
}

impl<T: Scalar> Trainer<T> {
    /// Fresh model and optimiser for the given sample sets and features.
    pub fn new(arch: Architecture, samples: &[&SampleSet], features: &[FeatureVector], config: TrainConfig) -> Result<Self> {
        let (weight_seed, latent_seed, _) = derive_seeds(config.seed);
        let mut model = ModelParams::new(arch, features, weight_seed, latent_seed)?;
        model.training = Some(serde_json::to_value(&config)?);
        Self::from_model(model, samples, config)
    }

    pub fn from_model(model: ModelParams<T>, samples: &[&SampleSet], config: TrainConfig) -> Result<Self> {
        model.validate()?;
        if samples.len() != model.shape_count() {
            return Err(Error::Shape(format!(
                "{} sample sets for {} latent rows",
                samples.len(),
                model.shape_count()
            )));
        }
        let smallest = samples.iter().map(|s| s.len()).min().unwrap_or(0);
        config.validate(smallest)?;
        let sources = samples
            .iter()
            .map(|s| ShapeBatchSource {
                points: s.points.iter().map(|p| p.map(T::c)).collect(),
                sdf: s.sdf.iter().map(|&v| T::c(v)).collect(),
            })
            .collect();
        let adam = AdamConfig::with_learning_rate(config.learning_rate);
        let shapes: Vec<_> = model.layers.iter().flat_map(|l| [l.weight.shape(), l.bias.shape()]).collect();
        let n = model.shape_count();
        let dims = model.arch.latent_dim;
        let (_, _, stream_seed) = derive_seeds(config.seed);
        Ok(Self {
            theta_adam: AdamState::new(&shapes, adam),
            latent_adam: (0..n).map(|_| AdamState::new(&[(1, dims)], adam)).collect(),
            corr_adam: AdamState::new(&[(n, dims)], adam),
            rng: ChaCha8Rng::seed_from_u64(stream_seed),
            sources,
            model,
            config,
            epoch: 0,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// One pass over every shape in shuffled order, then the correlation
    /// step when active.
    pub fn run_epoch(&mut self) -> Result<EpochReport> {
        let started = Instant::now();
        let n = self.model.shape_count();
        let k = self.model.arch.fixed_count();
        let m = self.config.points_per_shape;
        let lambda = T::c(self.config.lambda);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);

        let mut sse_total = 0.0;
        let mut l2_total = 0.0;
        for &shape in &order {
            let src = &self.sources[shape];
            let picks = index::sample(&mut self.rng, src.points.len(), m);
            let mut pts = Vec::with_capacity(3 * m);
            let mut tgt = Vec::with_capacity(m);
            for i in picks.iter() {
                pts.extend_from_slice(&src.points[i]);
                tgt.push(src.sdf[i]);
            }
            let points = Tensor2::from_vec(m, 3, pts)?;
            let targets = Tensor2::from_vec(m, 1, tgt)?;
            let code = self.model.latents.row(shape).to_vec();
            let grads = batch_gradients(&self.model, &code, &points, &targets)?;
            let l2 = lambda * trainable_norm2(&code, k);
            let sse = grads.sse.as_f64();
            if !(sse.is_finite() && l2.as_f64().is_finite()) {
                return Err(self.abort(format!("shape {shape}: squared error {sse}")));
            }
            sse_total += sse;
            l2_total += l2.as_f64();

            let theta_grads: Vec<&Tensor2<T>> = grads.layers.iter().flat_map(|(w, b)| [w, b]).collect();
            let params = self.model.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]);
            self.theta_adam.step(params, &theta_grads)?;

            if self.model.arch.latent_dim > 0 {
                let two_lambda = lambda + lambda;
                let g: Vec<T> = grads.code.data()[k..]
                    .iter()
                    .zip(&code[k..])
                    .map(|(&g, &z)| g + two_lambda * z)
                    .collect();
                let g = Tensor2::from_vec(1, g.len(), g)?;
                let mut row = Tensor2::from_vec(1, code.len() - k, code[k..].to_vec())?;
                self.latent_adam[shape].step([&mut row], &[&g])?;
                self.model.latents.row_mut(shape)[k..].copy_from_slice(row.data());
            }
        }

        let corr_loss = if self.config.correlation_active(&self.model.arch) {
            self.correlation_step()?
        } else if k > 0 && n >= 3 {
            self.correlation_value()?
        } else {
            0.0
        };

        self.epoch += 1;
        let report = EpochReport {
            epoch: self.epoch,
            mse: sse_total / (n * m) as f64,
            latent_l2: l2_total / n as f64,
            corr_loss,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        if !self.model.is_finite() {
            return Err(self.abort("parameters became non-finite".into()));
        }
        if let (Some(every), Some(path)) = (self.config.checkpoint_every, &self.config.checkpoint_path) {
            if self.epoch % every == 0 {
                self.model.save(path)?;
            }
        }
        Ok(report)
    }

    /// Summed correlation loss of the current table, ignoring constant
    /// fixed slots.
    fn correlation_value(&self) -> Result<f64> {
        let k = self.model.arch.fixed_count();
        let mut total = 0.0;
        for slot in 0..k {
            match correlation_loss(&self.model.latents, k, slot) {
                Ok(l) => total += l.value,
                Err(Error::UndefinedCorrelation(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(total)
    }

    /// One Adam step on the trainable table against the summed correlation
    /// loss; the network is left untouched. Returns the loss before the step.
    fn correlation_step(&mut self) -> Result<f64> {
        let k = self.model.arch.fixed_count();
        let n = self.model.shape_count();
        let dims = self.model.arch.latent_dim;
        let mut total = 0.0;
        let mut grad = Tensor2::<T>::zeros(n, dims);
        for slot in 0..k {
            match correlation_loss_grad(&self.model.latents, k, slot) {
                Ok((value, g)) => {
                    total += value;
                    for (acc, &v) in grad.data_mut().iter_mut().zip(g.data()) {
                        *acc += T::c(self.config.corr_weight * v);
                    }
                }
                Err(Error::UndefinedCorrelation(_)) => {}
                Err(e) => return Err(e),
            }
        }
        let mut table = Tensor2::zeros(n, dims);
        for r in 0..n {
            table.row_mut(r).copy_from_slice(&self.model.latents.row(r)[k..]);
        }
        self.corr_adam.step([&mut table], &[&grad])?;
        for r in 0..n {
            self.model.latents.row_mut(r)[k..].copy_from_slice(table.row(r));
        }
        Ok(total)
    }

    fn abort(&self, detail: String) -> Error {
        if let Some(path) = &self.config.checkpoint_path {
            let diag = path.with_extension("nan.ckpt");
            match self.model.save(&diag) {
                Ok(()) => log::error!("wrote diagnostic checkpoint {}", diag.display()),
                Err(e) => log::error!("could not write diagnostic checkpoint: {e}"),
            }
        }
        Error::NonFiniteLoss {
            epoch: self.epoch + 1,
            detail,
        }
    }

    /// Runs the remaining epochs, calling `on_epoch` after each.
    pub fn run(&mut self, mut on_epoch: impl FnMut(&EpochReport)) -> Result<Vec<EpochReport>> {
        let mut reports = Vec::with_capacity(self.config.epochs.saturating_sub(self.epoch));
        while self.epoch < self.config.epochs {
            let r = self.run_epoch()?;
            on_epoch(&r);
            reports.push(r);
        }
        Ok(reports)
    }
}

/// Trains a fresh model from scratch.
pub fn train<T: Scalar>(
    arch: Architecture,
    samples: &[&SampleSet],
    features: &[FeatureVector],
    config: TrainConfig,
) -> Result<(ModelParams<T>, Vec<EpochReport>)> {
    let mut trainer = Trainer::new(arch, samples, features, config)?;
    let reports = trainer.run(|r| {
        if r.epoch % 100 == 0 {
            log::info!("epoch {} mse {:.3e} corr {:.4}", r.epoch, r.mse, r.corr_loss);
        }
    })?;
    Ok((trainer.model, reports))
}

/// Mean absolute Pearson correlation between each fixed slot and each
/// trainable dimension (constant dimensions count as 0).
pub fn mean_abs_fixed_correlation<T: Scalar>(model: &ModelParams<T>) -> Result<f64> {
    let k = model.arch.fixed_count();
    if k == 0 {
        return Err(Error::UnsupportedModel("model has no fixed slots".into()));
    }
    let mut total = 0.0;
    for slot in 0..k {
        total += correlation_loss(&model.latents, k, slot)?.value;
    }
    Ok(total / k as f64)
}
