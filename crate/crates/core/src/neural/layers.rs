//! Layer kernels: same-padded stride-1 convolution, dense, ReLU, inverted
//! dropout, sigmoid and binary cross-entropy.

use rand::Rng;

use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// 2-D cross-correlation with zero "same" padding and stride 1.
///
/// Weights are `[out, in, kh, kw]`, bias `[out]`, activations `[C, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<F> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Scalar> Conv2d<F> {
    pub fn new(weight: Tensor<F>, bias: Tensor<F>) -> Result<Self> {
        let ws = weight.shape();
        if ws.len() != 4 || bias.shape() != [ws[0]] {
            return Err(Error::ShapeMismatch(format!(
                "conv weight {ws:?} with bias {:?}",
                bias.shape()
            )));
        }
        if ws[2].is_multiple_of(2) || ws[3].is_multiple_of(2) {
            return Err(Error::ShapeMismatch(format!(
                "same padding needs odd kernels, got {}x{}",
                ws[2], ws[3]
            )));
        }
        Ok(Conv2d { weight, bias })
    }

    pub fn zeros(out_ch: usize, in_ch: usize, kh: usize, kw: usize) -> Self {
        Conv2d {
            weight: Tensor::zeros(vec![out_ch, in_ch, kh, kw]),
            bias: Tensor::zeros(vec![out_ch]),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    fn kernel(&self) -> (usize, usize) {
        (self.weight.shape()[2], self.weight.shape()[3])
    }

    fn check_input(&self, input: &[F], h: usize, w: usize) -> Result<()> {
        if input.len() != self.in_channels() * h * w {
            return Err(Error::ShapeMismatch(format!(
                "conv expects {}x{h}x{w} input, got {} values",
                self.in_channels(),
                input.len()
            )));
        }
        Ok(())
    }

    /// Output is `[out, h, w]`.
    pub fn forward(&self, input: &[F], h: usize, w: usize) -> Result<Vec<F>> {
        self.check_input(input, h, w)?;
        let (kh, kw) = self.kernel();
        let (ph, pw) = (kh / 2, kw / 2);
        let (cin, cout) = (self.in_channels(), self.out_channels());
        let wt = self.weight.data();
        let mut out = vec![F::zero(); cout * h * w];
        for o in 0..cout {
            let plane = &mut out[o * h * w..(o + 1) * h * w];
            plane.fill(self.bias.data()[o]);
            for c in 0..cin {
                let src = &input[c * h * w..(c + 1) * h * w];
                for ky in 0..kh {
                    let (y0, y1) = valid_range(h, ky, ph);
                    for kx in 0..kw {
                        let k = wt[((o * cin + c) * kh + ky) * kw + kx];
                        if k == F::zero() {
                            continue;
                        }
                        let (x0, x1) = valid_range(w, kx, pw);
                        for y in y0..y1 {
                            let sy = y + ky - ph;
                            let dst = &mut plane[y * w + x0..y * w + x1];
                            let s = &src[sy * w + x0 + kx - pw..sy * w + x1 + kx - pw];
                            for (d, &v) in dst.iter_mut().zip(s) {
                                *d += k * v;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grads` and returns the input
    /// gradient (skipped when `need_input_grad` is false).
    pub fn backward(
        &self,
        input: &[F],
        grad_out: &[F],
        h: usize,
        w: usize,
        grads: &mut Conv2d<F>,
        need_input_grad: bool,
    ) -> Result<Option<Vec<F>>> {
        self.check_input(input, h, w)?;
        let (kh, kw) = self.kernel();
        let (ph, pw) = (kh / 2, kw / 2);
        let (cin, cout) = (self.in_channels(), self.out_channels());
        if grad_out.len() != cout * h * w {
            return Err(Error::ShapeMismatch("conv output gradient".into()));
        }
        let wt = self.weight.data();
        let mut grad_in = if need_input_grad {
            Some(vec![F::zero(); cin * h * w])
        } else {
            None
        };
        for o in 0..cout {
            let g = &grad_out[o * h * w..(o + 1) * h * w];
            grads.bias.data_mut()[o] += g.iter().copied().sum();
            for c in 0..cin {
                let src = &input[c * h * w..(c + 1) * h * w];
                for ky in 0..kh {
                    let (y0, y1) = valid_range(h, ky, ph);
                    for kx in 0..kw {
                        let (x0, x1) = valid_range(w, kx, pw);
                        let widx = ((o * cin + c) * kh + ky) * kw + kx;
                        let mut acc = F::zero();
                        for y in y0..y1 {
                            let sy = y + ky - ph;
                            let gr = &g[y * w + x0..y * w + x1];
                            let s = &src[sy * w + x0 + kx - pw..sy * w + x1 + kx - pw];
                            acc += dot(gr, s);
                        }
                        grads.weight.data_mut()[widx] += acc;
                        if let Some(gi) = grad_in.as_mut() {
                            let k = wt[widx];
                            let gplane = &mut gi[c * h * w..(c + 1) * h * w];
                            for y in y0..y1 {
                                let sy = y + ky - ph;
                                let gr = &g[y * w + x0..y * w + x1];
                                let d = &mut gplane[sy * w + x0 + kx - pw..sy * w + x1 + kx - pw];
                                for (dv, &gv) in d.iter_mut().zip(gr) {
                                    *dv += k * gv;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(grad_in)
    }
}

/// Dot product with eight interleaved partial sums so the loop vectorizes.
/// The summation order is fixed, so results are still deterministic.
#[inline]
fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut lanes = [F::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            lanes[i] += x[i] * y[i];
        }
    }
    let mut tail = F::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((lanes[0] + lanes[4]) + (lanes[1] + lanes[5])) + ((lanes[2] + lanes[6]) + (lanes[3] + lanes[7])) + tail
}

/// Output rows (or columns) whose tap at kernel offset `k` lands inside the
/// input.
#[inline]
fn valid_range(len: usize, k: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k);
    let hi = (len + pad).saturating_sub(k).min(len);
    (lo, hi.max(lo))
}

/// Affine layer `y = W x + b` with `W` stored `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn new(weight: Tensor<F>, bias: Tensor<F>) -> Result<Self> {
        let ws = weight.shape();
        if ws.len() != 2 || bias.shape() != [ws[0]] {
            return Err(Error::ShapeMismatch(format!(
                "dense weight {ws:?} with bias {:?}",
                bias.shape()
            )));
        }
        Ok(Dense { weight, bias })
    }

    pub fn zeros(out: usize, input: usize) -> Self {
        Dense {
            weight: Tensor::zeros(vec![out, input]),
            bias: Tensor::zeros(vec![out]),
        }
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, input: &[F]) -> Result<Vec<F>> {
        let n_in = self.in_features();
        if input.len() != n_in {
            return Err(Error::ShapeMismatch(format!(
                "dense expects {n_in} inputs, got {}",
                input.len()
            )));
        }
        Ok(self
            .weight
            .data()
            .chunks_exact(n_in)
            .zip(self.bias.data())
            .map(|(row, &b)| b + dot(row, input))
            .collect())
    }

    pub fn backward(
        &self,
        input: &[F],
        grad_out: &[F],
        grads: &mut Dense<F>,
        need_input_grad: bool,
    ) -> Result<Option<Vec<F>>> {
        let n_in = self.in_features();
        if input.len() != n_in || grad_out.len() != self.out_features() {
            return Err(Error::ShapeMismatch("dense backward".into()));
        }
        let mut grad_in = if need_input_grad {
            Some(vec![F::zero(); n_in])
        } else {
            None
        };
        let gw = grads.weight.data_mut();
        for (o, &g) in grad_out.iter().enumerate() {
            if g == F::zero() {
                continue;
            }
            grads.bias.data_mut()[o] += g;
            for (d, &x) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                *d += g * x;
            }
            if let Some(gi) = grad_in.as_mut() {
                let row = &self.weight.data()[o * n_in..(o + 1) * n_in];
                for (d, &wv) in gi.iter_mut().zip(row) {
                    *d += g * wv;
                }
            }
        }
        Ok(grad_in)
    }
}

pub fn relu<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        x
    } else {
        F::zero()
    }
}

pub fn relu_in_place<F: Scalar>(xs: &mut [F]) {
    xs.iter_mut().for_each(|x| *x = relu(*x));
}

/// Zeroes `grad` wherever the ReLU input was not strictly positive.
pub fn relu_backward<F: Scalar>(pre_activation: &[F], grad: &mut [F]) {
    for (g, &z) in grad.iter_mut().zip(pre_activation) {
        if z <= F::zero() {
            *g = F::zero();
        }
    }
}

pub fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Inverted dropout. In training mode every element is zeroed with
/// probability `rate` and survivors are scaled by `1 / (1 - rate)`; the
/// returned mask holds the per-element factor. Evaluation mode is the
/// identity and returns no mask.
pub fn dropout<F: Scalar, R: Rng + ?Sized>(
    xs: &mut [F],
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Option<Vec<F>> {
    if !training || rate <= 0.0 {
        return None;
    }
    let keep = F::of(1.0 / (1.0 - rate));
    let mask: Vec<F> = xs
        .iter()
        .map(|_| if rng.random::<f64>() < rate { F::zero() } else { keep })
        .collect();
    for (x, &m) in xs.iter_mut().zip(&mask) {
        *x *= m;
    }
    Some(mask)
}

/// Probability floor used inside the logarithms of the loss.
pub const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy over K outputs, with predictions clamped to
/// `[eps, 1 - eps]`. Accumulates in f64.
pub fn bce_loss<F: Scalar>(labels: &[F], probs: &[F]) -> f64 {
    let k = labels.len().max(1) as f64;
    -labels
        .iter()
        .zip(probs)
        .map(|(&b, &p)| {
            let (b, p) = (b.as_f64(), p.as_f64().clamp(BCE_EPS, 1.0 - BCE_EPS));
            b * p.ln() + (1.0 - b) * (1.0 - p).ln()
        })
        .sum::<f64>()
        / k
}

/// Gradient of [`bce_loss`] composed with the sigmoid, with respect to the
/// logits: `(p - b) / K`.
pub fn bce_logit_grad<F: Scalar>(labels: &[F], probs: &[F]) -> Vec<F> {
    let k = F::of(labels.len().max(1) as f64);
    labels
        .iter()
        .zip(probs)
        .map(|(&b, &p)| (p - b) / k)
        .collect()
}
