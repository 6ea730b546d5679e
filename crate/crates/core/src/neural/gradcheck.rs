//! Central finite-difference checks of the analytic gradients.
//!
//! Only forward passes are used to build the numerical estimate. For the
//! full network, a coordinate whose ±ε perturbation changes any ReLU gate
//! sits on a kink where the derivative is not defined; such coordinates are
//! redrawn rather than compared.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{bce_logit_grad, bce_loss, sigmoid, Conv2d, Dense};
use super::model::{Model, ModelParams};
use super::tensor::Scalar;
use crate::error::Result;

/// Worst relative error seen over the checked coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub kinks_skipped: usize,
}

impl GradCheckReport {
    fn record(&mut self, analytic: f64, numeric: f64, floor: f64) {
        self.checked += 1;
        self.max_rel_error = self.max_rel_error.max(rel_error(analytic, numeric, floor));
    }

    pub fn merge(&mut self, other: &GradCheckReport) {
        self.checked += other.checked;
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
        self.kinks_skipped += other.kinks_skipped;
    }
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn perturb<F: Scalar>(v: &mut F, delta: f64) {
    *v = F::of(v.as_f64() + delta);
}

/// Linear probe `sum(c_i * y_i)` with coefficients in [-1, 1].
fn probe<F: Scalar>(y: &[F], c: &[f64]) -> f64 {
    y.iter().zip(c).map(|(v, w)| v.as_f64() * w).sum()
}

fn coeffs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Checks every weight, bias and input gradient of a conv layer under a
/// random linear loss.
pub fn check_conv<F: Scalar, R: Rng + ?Sized>(
    layer: &Conv2d<F>,
    input: &[F],
    h: usize,
    w: usize,
    eps: f64,
    floor: f64,
    rng: &mut R,
) -> Result<GradCheckReport> {
    let out_len = layer.out_channels() * h * w;
    let c = coeffs(out_len, rng);
    let g: Vec<F> = c.iter().map(|&v| F::of(v)).collect();
    let mut grads = Conv2d::zeros(
        layer.out_channels(),
        layer.in_channels(),
        layer.weight.shape()[2],
        layer.weight.shape()[3],
    );
    let gin = layer.backward(input, &g, h, w, &mut grads, true)?.unwrap_or_default();
    let mut rep = GradCheckReport::default();
    let loss = |l: &Conv2d<F>, x: &[F]| -> Result<f64> { Ok(probe(&l.forward(x, h, w)?, &c)) };
    for i in 0..layer.weight.len() {
        let mut l = layer.clone();
        perturb(&mut l.weight.data_mut()[i], eps);
        let up = loss(&l, input)?;
        perturb(&mut l.weight.data_mut()[i], -2.0 * eps);
        let down = loss(&l, input)?;
        rep.record(grads.weight.data()[i].as_f64(), (up - down) / (2.0 * eps), floor);
    }
    for i in 0..layer.bias.len() {
        let mut l = layer.clone();
        perturb(&mut l.bias.data_mut()[i], eps);
        let up = loss(&l, input)?;
        perturb(&mut l.bias.data_mut()[i], -2.0 * eps);
        let down = loss(&l, input)?;
        rep.record(grads.bias.data()[i].as_f64(), (up - down) / (2.0 * eps), floor);
    }
    for i in 0..input.len() {
        let mut x = input.to_vec();
        perturb(&mut x[i], eps);
        let up = loss(layer, &x)?;
        perturb(&mut x[i], -2.0 * eps);
        let down = loss(layer, &x)?;
        rep.record(gin[i].as_f64(), (up - down) / (2.0 * eps), floor);
    }
    Ok(rep)
}

/// Same as [`check_conv`] for a dense layer.
pub fn check_dense<F: Scalar, R: Rng + ?Sized>(
    layer: &Dense<F>,
    input: &[F],
    eps: f64,
    floor: f64,
    rng: &mut R,
) -> Result<GradCheckReport> {
    let c = coeffs(layer.out_features(), rng);
    let g: Vec<F> = c.iter().map(|&v| F::of(v)).collect();
    let mut grads = Dense::zeros(layer.out_features(), layer.in_features());
    let gin = layer.backward(input, &g, &mut grads, true)?.unwrap_or_default();
    let mut rep = GradCheckReport::default();
    let loss = |l: &Dense<F>, x: &[F]| -> Result<f64> { Ok(probe(&l.forward(x)?, &c)) };
    for i in 0..layer.weight.len() {
        let mut l = layer.clone();
        perturb(&mut l.weight.data_mut()[i], eps);
        let up = loss(&l, input)?;
        perturb(&mut l.weight.data_mut()[i], -2.0 * eps);
        let down = loss(&l, input)?;
        rep.record(grads.weight.data()[i].as_f64(), (up - down) / (2.0 * eps), floor);
    }
    for i in 0..layer.bias.len() {
        let mut l = layer.clone();
        perturb(&mut l.bias.data_mut()[i], eps);
        let up = loss(&l, input)?;
        perturb(&mut l.bias.data_mut()[i], -2.0 * eps);
        let down = loss(&l, input)?;
        rep.record(grads.bias.data()[i].as_f64(), (up - down) / (2.0 * eps), floor);
    }
    for i in 0..input.len() {
        let mut x = input.to_vec();
        perturb(&mut x[i], eps);
        let up = loss(layer, &x)?;
        perturb(&mut x[i], -2.0 * eps);
        let down = loss(layer, &x)?;
        rep.record(gin[i].as_f64(), (up - down) / (2.0 * eps), floor);
    }
    Ok(rep)
}

/// Checks the fused sigmoid + BCE logit gradient.
pub fn check_bce<F: Scalar>(logits: &[F], labels: &[F], eps: f64, floor: f64) -> GradCheckReport {
    let probs = |z: &[F]| -> Vec<F> { z.iter().map(|&v| sigmoid(v)).collect() };
    let g = bce_logit_grad(labels, &probs(logits));
    let mut rep = GradCheckReport::default();
    for i in 0..logits.len() {
        let mut z = logits.to_vec();
        perturb(&mut z[i], eps);
        let up = bce_loss(labels, &probs(&z));
        perturb(&mut z[i], -2.0 * eps);
        let down = bce_loss(labels, &probs(&z));
        rep.record(g[i].as_f64(), (up - down) / (2.0 * eps), floor);
    }
    rep
}

/// Checks up to `per_tensor` randomly chosen coordinates of every parameter
/// tensor of the composed network, in training mode with fixed dropout
/// masks.
pub fn check_model<F: Scalar, R: Rng + ?Sized>(
    model: &Model<F>,
    input: &[F],
    labels: &[F],
    eps: f64,
    floor: f64,
    per_tensor: usize,
    rng: &mut R,
) -> Result<GradCheckReport> {
    let dropout_seed: u64 = rng.random();
    let run = |m: &Model<F>| {
        let mut r = ChaCha8Rng::seed_from_u64(dropout_seed);
        m.forward_cached(input, true, &mut r)
    };
    let base = run(model)?;
    let pattern = base.relu_pattern();
    let mut grads = model.params.clone();
    grads.fill(F::zero());
    model.backward(&base, labels, &mut grads)?;
    let grads: Vec<Vec<f64>> = grads
        .tensors()
        .iter()
        .map(|t| t.data().iter().map(|v| v.as_f64()).collect())
        .collect();

    let mut rep = GradCheckReport::default();
    let n_tensors = model.params.tensors().len();
    for t in 0..n_tensors {
        let len = grads[t].len();
        let mut candidates = sample(rng, len, len).into_vec().into_iter();
        let mut done = 0;
        while done < per_tensor.min(len) {
            let Some(i) = candidates.next() else { break };
            let eval = |delta: f64| -> Result<(f64, bool)> {
                let mut m = model.clone();
                let mut ts: Vec<_> = tensors_mut_of(&mut m.params);
                perturb(&mut ts[t].data_mut()[i], delta);
                drop(ts);
                let c = run(&m)?;
                Ok((bce_loss(labels, &c.probs), c.relu_pattern() == pattern))
            };
            let (up, same_up) = eval(eps)?;
            let (down, same_down) = eval(-eps)?;
            if !(same_up && same_down) {
                rep.kinks_skipped += 1;
                continue;
            }
            rep.record(grads[t][i], (up - down) / (2.0 * eps), floor);
            done += 1;
        }
    }
    Ok(rep)
}

fn tensors_mut_of<F: Scalar>(p: &mut ModelParams<F>) -> Vec<&mut super::tensor::Tensor<F>> {
    p.tensors_mut()
}
