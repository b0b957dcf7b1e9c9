use serde::{Deserialize, Serialize};

use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fully connected layer computing `x · weight + bias`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer<T> {
    /// `in × out`
    pub weight: Tensor2<T>,
    /// `1 × out`
    pub bias: Tensor2<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn new(weight: Tensor2<T>, bias: Tensor2<T>) -> Result<Self> {
        if bias.rows() != 1 || bias.cols() != weight.cols() {
            return Err(Error::Shape(format!(
                "bias {}x{} does not match weight {}x{}",
                bias.rows(),
                bias.cols(),
                weight.rows(),
                weight.cols()
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Tensor2::zeros(fan_in, fan_out),
            bias: Tensor2::zeros(1, fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }
}

/// Tape handles of one layer's parameters.
#[derive(Clone, Copy, Debug)]
pub struct LayerVars {
    pub weight: Var,
    pub bias: Var,
}

/// Checks that consecutive layers chain and the net ends in one output.
pub fn check_layers<T: Scalar>(layers: &[Layer<T>]) -> Result<()> {
    let Some(last) = layers.last() else {
        return Err(Error::Shape("network has no layers".into()));
    };
    for (i, pair) in layers.windows(2).enumerate() {
        if pair[0].fan_out() != pair[1].fan_in() {
            return Err(Error::Shape(format!(
                "layer {i} outputs {} features but layer {} expects {}",
                pair[0].fan_out(),
                i + 1,
                pair[1].fan_in()
            )));
        }
    }
    if last.fan_out() != 1 {
        return Err(Error::Shape(format!(
            "final layer must have one output, has {}",
            last.fan_out()
        )));
    }
    Ok(())
}

/// Records the layers' parameters as differentiable leaves.
pub fn record_layers<T: Scalar>(tape: &mut Tape<T>, layers: &[Layer<T>], requires_grad: bool) -> Vec<LayerVars> {
    layers
        .iter()
        .map(|l| LayerVars {
            weight: tape.leaf(l.weight.clone(), requires_grad),
            bias: tape.leaf(l.bias.clone(), requires_grad),
        })
        .collect()
}

/// ReLU MLP with a linear output layer, recorded on `tape`.
pub fn forward_mlp<T: Scalar>(tape: &mut Tape<T>, layers: &[LayerVars], input: Var) -> Result<Var> {
    let Some((last, hidden)) = layers.split_last() else {
        return Err(Error::Shape("network has no layers".into()));
    };
    let in_width = tape.value(input).cols();
    let first_fan_in = tape.value(layers[0].weight).rows();
    if in_width != first_fan_in {
        return Err(Error::Shape(format!(
            "input width {in_width} does not match first layer fan-in {first_fan_in}"
        )));
    }
    let mut h = input;
    for l in hidden {
        let z = tape.matmul(h, l.weight)?;
        let z = tape.add_row(z, l.bias)?;
        h = tape.relu(z)?;
    }
    let z = tape.matmul(h, last.weight)?;
    tape.add_row(z, last.bias)
}

/// Tape-free evaluation of the same network; safe to call concurrently.
pub fn eval_mlp<T: Scalar>(layers: &[Layer<T>], input: &Tensor2<T>) -> Result<Tensor2<T>> {
    let Some((last, hidden)) = layers.split_last() else {
        return Err(Error::Shape("network has no layers".into()));
    };
    if input.cols() != layers[0].fan_in() {
        return Err(Error::Shape(format!(
            "input width {} does not match first layer fan-in {}",
            input.cols(),
            layers[0].fan_in()
        )));
    }
    let mut h: Option<Tensor2<T>> = None;
    for l in hidden {
        let mut next = affine(h.as_ref().unwrap_or(input), l)?;
        relu_in_place(&mut next);
        h = Some(next);
    }
    affine(h.as_ref().unwrap_or(input), last)
}

fn affine<T: Scalar>(x: &Tensor2<T>, layer: &Layer<T>) -> Result<Tensor2<T>> {
    let mut out = x.matmul(&layer.weight)?;
    let cols = out.cols();
    for row in out.data_mut().chunks_exact_mut(cols) {
        for (v, &b) in row.iter_mut().zip(layer.bias.data()) {
            *v += b;
        }
    }
    Ok(out)
}

fn relu_in_place<T: Scalar>(x: &mut Tensor2<T>) {
    for v in x.data_mut() {
        if *v <= T::zero() {
            *v = T::zero();
        }
    }
}
