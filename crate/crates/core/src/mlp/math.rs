//! Network arithmetic, generic over the float width.
//!
//! Training and inference run at 32 bits; the gradient-check harness
//! instantiates the exact same code at 64 bits so the finite-difference
//! comparison is tight. Weight matrices are fan-out x fan-in; a layer maps
//! activations `a` to `a W^T + b`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Float widths the network math is defined over.
pub trait MlpFloat:
    Float + FromPrimitive + LinalgScalar + ScalarOperand + std::fmt::Display + std::fmt::Debug
{
}

impl MlpFloat for f32 {}
impl MlpFloat for f64 {}

/// All weights and biases, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<F> {
    /// Layer `l` weight matrix, fan-out x fan-in.
    pub weights: Vec<Array2<F>>,
    /// Layer `l` bias vector, fan-out.
    pub biases: Vec<Array1<F>>,
}

impl<F: MlpFloat> Params<F> {
    /// `[input, hidden..., output]` widths implied by the matrices.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.weights.first().map_or(0, |w| w.ncols())];
        dims.extend(self.weights.iter().map(|w| w.nrows()));
        dims
    }

    pub fn count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn zeros_like(&self) -> Params<F> {
        Params {
            weights: self.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.dim())).collect(),
        }
    }

    /// Converts every parameter through f64 — used to lift a 32-bit model
    /// into the 64-bit gradient harness.
    pub fn cast<G: MlpFloat>(&self) -> Params<G> {
        let lift = |v: &F| G::from(v.to_f64().expect("finite")).expect("representable");
        Params {
            weights: self.weights.iter().map(|w| w.mapv(|v| lift(&v))).collect(),
            biases: self.biases.iter().map(|b| b.mapv(|v| lift(&v))).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.len() != self.biases.len() {
            return Err(Error::Config(
                "parameter set must hold matched weight/bias lists for at least one layer".into(),
            ));
        }
        for l in 0..self.weights.len() {
            if self.biases[l].len() != self.weights[l].nrows() {
                return Err(Error::Shape {
                    expected: self.weights[l].nrows(),
                    actual: self.biases[l].len(),
                    context: format!("bias width of layer {l}"),
                });
            }
            if l > 0 && self.weights[l].ncols() != self.weights[l - 1].nrows() {
                return Err(Error::Shape {
                    expected: self.weights[l - 1].nrows(),
                    actual: self.weights[l].ncols(),
                    context: format!("fan-in of layer {l}"),
                });
            }
        }
        Ok(())
    }
}

/// He-normal initialization: weights drawn from N(0, 2/fan_in), biases zero.
/// Draw order is fixed (layers in order, each matrix row-major) so a seed
/// pins every parameter.
pub fn he_init<F: MlpFloat>(layer_dims: &[usize], rng: &mut SplitMix64) -> Params<F> {
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for pair in layer_dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let std = (2.0 / fan_in as f64).sqrt();
        let values: Vec<F> = (0..fan_in * fan_out)
            .map(|_| F::from(rng.next_normal() * std).expect("finite draw"))
            .collect();
        weights.push(Array2::from_shape_vec((fan_out, fan_in), values).expect("exact length"));
        biases.push(Array1::zeros(fan_out));
    }
    Params { weights, biases }
}

fn relu<F: MlpFloat>(v: F) -> F {
    if v > F::zero() {
        v
    } else {
        F::zero()
    }
}

fn check_input<F: MlpFloat>(params: &Params<F>, x: &ArrayView2<'_, F>) -> Result<()> {
    params.validate()?;
    if x.ncols() != params.weights[0].ncols() {
        return Err(Error::Shape {
            expected: params.weights[0].ncols(),
            actual: x.ncols(),
            context: "input feature width".into(),
        });
    }
    Ok(())
}

/// Forward pass: ReLU on hidden layers, affine output.
pub fn forward<F: MlpFloat>(params: &Params<F>, x: ArrayView2<'_, F>) -> Result<Array2<F>> {
    check_input(params, &x)?;
    let layers = params.weights.len();
    let mut a = x.to_owned();
    for l in 0..layers {
        let mut z = a.dot(&params.weights[l].t()) + &params.biases[l];
        if l + 1 < layers {
            z.mapv_inplace(relu);
        }
        a = z;
    }
    Ok(a)
}

/// Mean absolute percentage error with the denominator clamped at one
/// percentage point: `mean(|y - p| / max(|y|, 1)) * 100`. The clamp keeps
/// zero-blockage samples from producing unbounded loss.
pub fn mape<F: MlpFloat>(y_true: ArrayView1<'_, F>, y_pred: ArrayView1<'_, F>) -> Result<F> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape {
            expected: y_true.len(),
            actual: y_pred.len(),
            context: "prediction count vs target count".into(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Domain(
            "percentage error is undefined over zero samples".into(),
        ));
    }
    let mut sum = F::zero();
    for (&yt, &yp) in y_true.iter().zip(y_pred.iter()) {
        sum = sum + (yt - yp).abs() / yt.abs().max(F::one());
    }
    let n = F::from_usize(y_true.len()).expect("count fits in float");
    Ok(sum / n * F::from_f64(100.0).expect("constant"))
}

/// Loss and exact reverse-mode gradients of [`mape`] over a batch.
///
/// ReLU's subgradient at zero is taken as 0, and the loss sign at an exact
/// prediction contributes 0 — the usual almost-everywhere convention.
pub fn backward<F: MlpFloat>(
    params: &Params<F>,
    x: ArrayView2<'_, F>,
    y: ArrayView1<'_, F>,
) -> Result<(F, Params<F>)> {
    check_input(params, &x)?;
    if y.len() != x.nrows() {
        return Err(Error::Shape {
            expected: x.nrows(),
            actual: y.len(),
            context: "target count vs batch rows".into(),
        });
    }
    let layers = params.weights.len();
    if params.weights[layers - 1].nrows() != 1 {
        return Err(Error::Shape {
            expected: 1,
            actual: params.weights[layers - 1].nrows(),
            context: "regression output width".into(),
        });
    }

    let mut acts: Vec<Array2<F>> = Vec::with_capacity(layers + 1);
    let mut pre: Vec<Array2<F>> = Vec::with_capacity(layers);
    acts.push(x.to_owned());
    for l in 0..layers {
        let z = acts[l].dot(&params.weights[l].t()) + &params.biases[l];
        let a = if l + 1 < layers { z.mapv(relu) } else { z.clone() };
        pre.push(z);
        acts.push(a);
    }
    let y_pred = acts[layers].column(0).to_owned();
    let loss = mape(y, y_pred.view())?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("loss became non-finite ({loss})")));
    }

    // dL/dp_i = 100/n * sign(p_i - y_i) / max(|y_i|, 1)
    let scale = F::from_f64(100.0).expect("constant")
        / F::from_usize(y.len()).expect("count fits in float");
    let grad_pred: Array1<F> = y
        .iter()
        .zip(y_pred.iter())
        .map(|(&yt, &yp)| {
            let d = yp - yt;
            let sign = if d > F::zero() {
                F::one()
            } else if d < F::zero() {
                -F::one()
            } else {
                F::zero()
            };
            scale * sign / yt.abs().max(F::one())
        })
        .collect();

    let mut delta: Array2<F> = grad_pred.insert_axis(Axis(1));
    let mut grad_w = Vec::with_capacity(layers);
    let mut grad_b = Vec::with_capacity(layers);
    for l in (0..layers).rev() {
        grad_w.push(delta.t().dot(&acts[l]));
        grad_b.push(delta.sum_axis(Axis(0)));
        if l > 0 {
            let mask = pre[l - 1].mapv(|v| if v > F::zero() { F::one() } else { F::zero() });
            delta = delta.dot(&params.weights[l]) * mask;
        }
    }
    grad_w.reverse();
    grad_b.reverse();
    Ok((
        loss,
        Params {
            weights: grad_w,
            biases: grad_b,
        },
    ))
}

/// Central-difference gradient oracle for [`backward`]: perturbs every
/// parameter by ±h and differences the loss. O(parameters) forward passes —
/// strictly a test harness, kept here so every test suite checks against the
/// same implementation.
pub fn fd_gradients<F: MlpFloat>(
    params: &Params<F>,
    x: ArrayView2<'_, F>,
    y: ArrayView1<'_, F>,
    h: F,
) -> Result<Params<F>> {
    let loss_at = |p: &Params<F>| -> Result<F> {
        let pred = forward(p, x)?;
        mape(y, pred.column(0))
    };
    let two_h = h + h;
    let mut grads = params.zeros_like();
    let mut work = params.clone();
    for l in 0..params.weights.len() {
        for idx in ndarray::indices(params.weights[l].dim()) {
            let orig = work.weights[l][idx];
            work.weights[l][idx] = orig + h;
            let up = loss_at(&work)?;
            work.weights[l][idx] = orig - h;
            let down = loss_at(&work)?;
            work.weights[l][idx] = orig;
            grads.weights[l][idx] = (up - down) / two_h;
        }
        for i in 0..params.biases[l].len() {
            let orig = work.biases[l][i];
            work.biases[l][i] = orig + h;
            let up = loss_at(&work)?;
            work.biases[l][i] = orig - h;
            let down = loss_at(&work)?;
            work.biases[l][i] = orig;
            grads.biases[l][i] = (up - down) / two_h;
        }
    }
    Ok(grads)
}
