use serde::{Deserialize, Serialize};

use crate::autodiff::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hyperparameters of the Adam optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment buffers for one group of parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    first_moment: Vec<Tensor2<T>>,
    second_moment: Vec<Tensor2<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(shapes: &[(usize, usize)], config: AdamConfig) -> Self {
        let zeros: Vec<_> = shapes.iter().map(|&(r, c)| Tensor2::zeros(r, c)).collect();
        Self {
            config,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[Tensor2<T>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Tensor2<T>] {
        &self.second_moment
    }

    /// Applies one bias-corrected update in place. Nothing is modified when
    /// any shape disagrees with the tracked buffers.
    pub fn step<'a, I>(&mut self, params: I, grads: &[&Tensor2<T>]) -> Result<()>
    where
        I: IntoIterator<Item = &'a mut Tensor2<T>>,
    {
        let mut params: Vec<&mut Tensor2<T>> = params.into_iter().collect();
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first_moment) {
            p.ensure_same_shape(m, "adam parameter")?;
            g.ensure_same_shape(m, "adam gradient")?;
        }

        self.step += 1;
        let cfg = self.config;
        let t = self.step as i32;
        let b1 = T::c(cfg.beta1);
        let b2 = T::c(cfg.beta2);
        let one = T::one();
        let correction1 = one - T::c(cfg.beta1.powi(t));
        let correction2 = one - T::c(cfg.beta2.powi(t));
        let lr = T::c(cfg.learning_rate);
        let eps = T::c(cfg.epsilon);

        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = b1 * *mv + (one - b1) * gv;
                *vv = b2 * *vv + (one - b2) * gv * gv;
                let m_hat = *mv / correction1;
                let v_hat = *vv / correction2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
