use crate::autodiff::{forward_mlp, record_layers, Tape, Tensor2, Var};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Scalar;

/// Sum of squared residuals over the batch plus `lambda·‖trainable‖²`.
pub fn reconstruction_loss<T: Scalar>(
    model: &ModelParams<T>,
    code: &[T],
    points: &Tensor2<T>,
    sdf: &[T],
    lambda: T,
) -> Result<T> {
    if points.rows() == 0 {
        return Err(Error::Parameter("empty batch".into()));
    }
    let pred = model.predict_sdf(code, &rows_as_points(points)?)?;
    if pred.len() != sdf.len() {
        return Err(Error::Shape(format!("{} targets for {} points", sdf.len(), pred.len())));
    }
    let sse = pred.iter().zip(sdf).fold(T::zero(), |acc, (&p, &s)| acc + (p - s) * (p - s));
    Ok(sse + lambda * trainable_norm2(code, model.arch.fixed_count()))
}

pub(crate) fn trainable_norm2<T: Scalar>(code: &[T], fixed_count: usize) -> T {
    code[fixed_count..].iter().fold(T::zero(), |acc, &v| acc + v * v)
}

fn rows_as_points<T: Scalar>(points: &Tensor2<T>) -> Result<Vec<[T; 3]>> {
    if points.cols() != 3 {
        return Err(Error::Shape(format!("points need 3 columns, got {}", points.cols())));
    }
    Ok(points.data().chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// Gradients of the squared-residual sum for one shape's batch.
pub(crate) struct BatchGradients<T> {
    pub sse: T,
    pub layers: Vec<(Tensor2<T>, Tensor2<T>)>,
    /// Gradient with respect to the whole code row (fixed slots included).
    pub code: Tensor2<T>,
}

pub(crate) fn batch_gradients<T: Scalar>(
    model: &ModelParams<T>,
    code: &[T],
    points: &Tensor2<T>,
    targets: &Tensor2<T>,
) -> Result<BatchGradients<T>> {
    let mut tape = Tape::new();
    let vars = record_layers(&mut tape, &model.layers, true);
    let p = tape.leaf(points.clone(), false);
    let c = tape.leaf(Tensor2::from_vec(1, code.len(), code.to_vec())?, true);
    let t = tape.leaf(targets.clone(), false);
    let x = tape.concat_broadcast(p, c)?;
    let out = forward_mlp(&mut tape, &vars, x)?;
    let r = tape.sub(out, t)?;
    let sq = tape.mul(r, r)?;
    let loss = tape.sum(sq)?;
    let sse = tape.value(loss).data()[0];
    let mut grads = tape.backward(loss, Tensor2::scalar(T::one()))?;
    let mut take = |v: Var, shape: (usize, usize)| {
        grads.take(v).unwrap_or_else(|| Tensor2::zeros(shape.0, shape.1))
    };
    let layers = vars
        .iter()
        .zip(&model.layers)
        .map(|(v, l)| (take(v.weight, l.weight.shape()), take(v.bias, l.bias.shape())))
        .collect();
    let code = take(c, (1, code.len()));
    Ok(BatchGradients { sse, layers, code })
}

/// Mean absolute Pearson correlation between one fixed latent column and
/// each trainable column, taken across shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationLoss {
    pub value: f64,
    /// Trainable dimensions with zero variance; they contribute 0.
    pub constant_dims: Vec<usize>,
}

/// `(1/N)·Σ_j |ρ(z_fixed, z_j)|` for the fixed slot `fixed_slot`.
pub fn correlation_loss<T: Scalar>(latents: &Tensor2<T>, fixed_count: usize, fixed_slot: usize) -> Result<CorrelationLoss> {
    let (value, _, constant_dims) = correlation_terms(latents, fixed_count, fixed_slot, false)?;
    Ok(CorrelationLoss { value, constant_dims })
}

/// Value and gradient (`shapes × N`, trainable columns only).
pub fn correlation_loss_grad<T: Scalar>(
    latents: &Tensor2<T>,
    fixed_count: usize,
    fixed_slot: usize,
) -> Result<(f64, Tensor2<f64>)> {
    let (value, grad, _) = correlation_terms(latents, fixed_count, fixed_slot, true)?;
    Ok((value, grad.expect("gradient requested")))
}

fn centered(values: impl Iterator<Item = f64>) -> (Vec<f64>, f64) {
    let v: Vec<f64> = values.collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    (c, norm)
}

#[allow(clippy::type_complexity)]
fn correlation_terms<T: Scalar>(
    latents: &Tensor2<T>,
    fixed_count: usize,
    fixed_slot: usize,
    want_grad: bool,
) -> Result<(f64, Option<Tensor2<f64>>, Vec<usize>)> {
    let n = latents.rows();
    if n < 3 {
        return Err(Error::Parameter(format!("correlation needs at least 3 shapes, got {n}")));
    }
    if fixed_slot >= fixed_count || fixed_count > latents.cols() {
        return Err(Error::Shape(format!("fixed slot {fixed_slot} is not among {fixed_count} fixed slots")));
    }
    let dims = latents.cols() - fixed_count;
    if dims == 0 {
        return Ok((0.0, want_grad.then(|| Tensor2::zeros(n, 0)), Vec::new()));
    }
    let (f, f_norm) = centered((0..n).map(|r| latents.get(r, fixed_slot).as_f64()));
    if !(f_norm > 0.0) {
        return Err(Error::UndefinedCorrelation(format!("fixed slot {fixed_slot} is constant across shapes")));
    }
    let mut grad = want_grad.then(|| Tensor2::zeros(n, dims));
    let mut total = 0.0;
    let mut constant = Vec::new();
    for j in 0..dims {
        let (z, z_norm) = centered((0..n).map(|r| latents.get(r, fixed_count + j).as_f64()));
        if !(z_norm > 0.0) {
            constant.push(j);
            continue;
        }
        let dot: f64 = z.iter().zip(&f).map(|(a, b)| a * b).sum();
        let rho = (dot / (z_norm * f_norm)).clamp(-1.0, 1.0);
        total += rho.abs();
        if let Some(g) = grad.as_mut() {
            // dρ/dz = (f̂/‖f̂‖ − ρ·ẑ/‖ẑ‖) / ‖ẑ‖ on centred vectors
            let sign = if rho > 0.0 {
                1.0
            } else if rho < 0.0 {
                -1.0
            } else {
                0.0
            };
            for r in 0..n {
                let d = (f[r] / f_norm - rho * z[r] / z_norm) / z_norm;
                g.set(r, j, sign * d / dims as f64);
            }
        }
    }
    if !constant.is_empty() {
        log::debug!("{} trainable dimensions are constant across shapes", constant.len());
    }
    Ok((total / dims as f64, grad, constant))
}
