//! The flip-prediction network: three same-padded conv layers with ReLU,
//! flatten, two ReLU dense layers each followed by dropout, and a dense
//! output layer with one sigmoid unit per information bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    bce_logit_grad, bce_loss, dropout, relu_backward, relu_in_place, sigmoid, Conv2d, Dense,
};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::flip::{FlipPredictor, FlipScores};
use crate::metadata::{InputTensor, DEFAULT_CLIP};

pub const CONV_LAYERS: usize = 3;
pub const DENSE_LAYERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
}

impl ConvSpec {
    pub const fn new(filters: usize, kernel_h: usize, kernel_w: usize) -> Self {
        ConvSpec {
            filters,
            kernel_h,
            kernel_w,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// (C, H, W) of the input image stack.
    pub input: [usize; 3],
    pub conv: Vec<ConvSpec>,
    /// Widths of the dense layers; the last one is K.
    pub dense: Vec<usize>,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Clip level used to build the input images.
    #[serde(default = "default_clip")]
    pub clip: f64,
}

fn default_clip() -> f64 {
    DEFAULT_CLIP
}

impl ModelConfig {
    /// 16@3x3, 32@3x3, 64@3x3 convs and 256, 128, K dense units with dropout
    /// 0.5.
    pub fn standard(input: [usize; 3], k: usize, seed: u64) -> Self {
        ModelConfig {
            input,
            conv: vec![
                ConvSpec::new(16, 3, 3),
                ConvSpec::new(32, 3, 3),
                ConvSpec::new(64, 3, 3),
            ],
            dense: vec![256, 128, k],
            dropout_rate: 0.5,
            seed,
            clip: DEFAULT_CLIP,
        }
    }

    /// Same topology with 8@3x3 convs and 128, 64, K dense units: about
    /// 15x fewer multiply-adds than [`ModelConfig::standard`], sized for
    /// single-core runs.
    pub fn desk(input: [usize; 3], k: usize, seed: u64) -> Self {
        ModelConfig {
            conv: vec![ConvSpec::new(8, 3, 3); CONV_LAYERS],
            dense: vec![128, 64, k],
            ..Self::standard(input, k, seed)
        }
    }

    pub fn output_len(&self) -> usize {
        self.dense.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.conv.len() != CONV_LAYERS || self.dense.len() != DENSE_LAYERS {
            return bad(format!(
                "topology needs {CONV_LAYERS} conv and {DENSE_LAYERS} dense layers, got {} and {}",
                self.conv.len(),
                self.dense.len()
            ));
        }
        if self.input.contains(&0) {
            return bad(format!("empty input shape {:?}", self.input));
        }
        if self
            .conv
            .iter()
            .any(|c| c.filters == 0 || c.kernel_h % 2 == 0 || c.kernel_w % 2 == 0)
        {
            return bad("conv layers need filters > 0 and odd kernels".into());
        }
        if self.dense.contains(&0) {
            return bad("dense widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        if self.clip.is_nan() || self.clip <= 0.0 {
            return bad(format!("clip {} must be positive", self.clip));
        }
        Ok(())
    }

    /// Length of the flattened conv output.
    pub fn flat_len(&self) -> usize {
        self.conv.last().map_or(0, |c| c.filters) * self.input[1] * self.input[2]
    }
}

/// All trainable tensors, in declaration order (conv layers, then dense).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub conv: Vec<Conv2d<F>>,
    pub dense: Vec<Dense<F>>,
}

impl<F: Scalar> ModelParams<F> {
    /// Zero tensors shaped for `config`.
    pub fn zeros(config: &ModelConfig) -> Self {
        let mut conv = Vec::new();
        let mut ch = config.input[0];
        for c in &config.conv {
            conv.push(Conv2d::zeros(c.filters, ch, c.kernel_h, c.kernel_w));
            ch = c.filters;
        }
        let mut dense = Vec::new();
        let mut width = config.flat_len();
        for &d in &config.dense {
            dense.push(Dense::zeros(d, width));
            width = d;
        }
        ModelParams { conv, dense }
    }

    /// Weight then bias of every layer, in declaration order.
    pub fn tensors(&self) -> Vec<&Tensor<F>> {
        self.conv
            .iter()
            .flat_map(|c| [&c.weight, &c.bias])
            .chain(self.dense.iter().flat_map(|d| [&d.weight, &d.bias]))
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<F>> {
        self.conv
            .iter_mut()
            .flat_map(|c| [&mut c.weight, &mut c.bias])
            .chain(self.dense.iter_mut().flat_map(|d| [&mut d.weight, &mut d.bias]))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    pub fn fill(&mut self, v: F) {
        for t in self.tensors_mut() {
            t.fill(v);
        }
    }

    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        ModelParams {
            conv: self
                .conv
                .iter()
                .map(|c| Conv2d {
                    weight: c.weight.cast(),
                    bias: c.bias.cast(),
                })
                .collect(),
            dense: self
                .dense
                .iter()
                .map(|d| Dense {
                    weight: d.weight.cast(),
                    bias: d.bias.cast(),
                })
                .collect(),
        }
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    /// Input of every layer, index 0 being the image.
    inputs: Vec<Vec<F>>,
    /// Pre-activation of every hidden layer.
    pre: Vec<Vec<F>>,
    /// Dropout factors of the hidden dense layers (training only).
    masks: Vec<Option<Vec<F>>>,
    pub logits: Vec<F>,
    pub probs: Vec<F>,
}

impl<F: Scalar> ForwardCache<F> {
    /// Which hidden units were strictly positive before their ReLU.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.pre.iter().flatten().map(|&z| z > F::zero()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    pub config: ModelConfig,
    pub params: ModelParams<F>,
}

impl<F: Scalar> Model<F> {
    /// He-uniform initialization for the ReLU layers, Glorot-uniform for the
    /// output layer, zero biases, all drawn from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ModelParams::<F>::zeros(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n_dense = params.dense.len();
        for c in &mut params.conv {
            let s = c.weight.shape();
            let fan_in = s[1] * s[2] * s[3];
            uniform_fill(&mut c.weight, (6.0 / fan_in as f64).sqrt(), &mut rng);
        }
        for (i, d) in params.dense.iter_mut().enumerate() {
            let (fan_out, fan_in) = (d.weight.shape()[0], d.weight.shape()[1]);
            let limit = if i + 1 == n_dense {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            uniform_fill(&mut d.weight, limit, &mut rng);
        }
        Ok(Model { config, params })
    }

    pub fn from_params(config: ModelConfig, params: ModelParams<F>) -> Result<Self> {
        config.validate()?;
        let expected = ModelParams::<F>::zeros(&config);
        let shapes = |p: &ModelParams<F>| -> Vec<Vec<usize>> {
            p.tensors().iter().map(|t| t.shape().to_vec()).collect()
        };
        if shapes(&expected) != shapes(&params) {
            return Err(Error::ShapeMismatch(
                "parameters do not match the model configuration".into(),
            ));
        }
        Ok(Model { config, params })
    }

    pub fn cast<G: Scalar>(&self) -> Model<G> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
        }
    }

    pub fn input_len(&self) -> usize {
        self.config.input.iter().product()
    }

    /// Forward pass keeping everything backward needs. `rng` drives dropout
    /// and is only consulted in training mode.
    pub fn forward_cached<R: Rng + ?Sized>(
        &self,
        input: &[F],
        training: bool,
        rng: &mut R,
    ) -> Result<ForwardCache<F>> {
        if input.len() != self.input_len() {
            return Err(Error::ShapeMismatch(format!(
                "model expects {:?} input ({} values), got {}",
                self.config.input,
                self.input_len(),
                input.len()
            )));
        }
        let [_, h, w] = self.config.input;
        let mut inputs = vec![input.to_vec()];
        let mut pre = Vec::new();
        let mut masks = Vec::new();
        let mut x = input.to_vec();
        for c in &self.params.conv {
            let z = c.forward(&x, h, w)?;
            x = z.clone();
            relu_in_place(&mut x);
            pre.push(z);
            inputs.push(x.clone());
        }
        let n_dense = self.params.dense.len();
        for (i, d) in self.params.dense.iter().enumerate() {
            let z = d.forward(&x)?;
            if i + 1 == n_dense {
                let probs = z.iter().map(|&v| sigmoid(v)).collect();
                return Ok(ForwardCache {
                    inputs,
                    pre,
                    masks,
                    logits: z,
                    probs,
                });
            }
            x = z.clone();
            relu_in_place(&mut x);
            masks.push(dropout(&mut x, self.config.dropout_rate, rng, training));
            pre.push(z);
            inputs.push(x.clone());
        }
        unreachable!("validated topology has a dense output layer")
    }

    /// Evaluation-mode prediction.
    pub fn predict_slice(&self, input: &[F]) -> Result<Vec<F>> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.forward_cached(input, false, &mut rng)?.probs)
    }

    /// Gradients of the mean BCE against `labels`, accumulated into `grads`.
    /// Returns the loss.
    pub fn backward(
        &self,
        cache: &ForwardCache<F>,
        labels: &[F],
        grads: &mut ModelParams<F>,
    ) -> Result<f64> {
        if labels.len() != cache.probs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} outputs",
                labels.len(),
                cache.probs.len()
            )));
        }
        let loss = bce_loss(labels, &cache.probs);
        let g = bce_logit_grad(labels, &cache.probs);
        self.backward_from_logits(cache, g, grads)?;
        Ok(loss)
    }

    /// Backpropagates an arbitrary logit gradient.
    pub fn backward_from_logits(
        &self,
        cache: &ForwardCache<F>,
        logit_grad: Vec<F>,
        grads: &mut ModelParams<F>,
    ) -> Result<()> {
        let [_, h, w] = self.config.input;
        let n_conv = self.params.conv.len();
        let n_dense = self.params.dense.len();
        let mut g = logit_grad;
        for i in (0..n_dense).rev() {
            let layer = n_conv + i;
            if i + 1 < n_dense {
                if let Some(mask) = &cache.masks[i] {
                    for (gv, &m) in g.iter_mut().zip(mask) {
                        *gv *= m;
                    }
                }
                relu_backward(&cache.pre[layer], &mut g);
            }
            g = self.params.dense[i]
                .backward(&cache.inputs[layer], &g, &mut grads.dense[i], true)?
                .expect("input gradient requested");
        }
        for i in (0..n_conv).rev() {
            relu_backward(&cache.pre[i], &mut g);
            let next = self.params.conv[i].backward(&cache.inputs[i], &g, h, w, &mut grads.conv[i], i > 0)?;
            if let Some(next) = next {
                g = next;
            }
        }
        Ok(())
    }

    /// Mean evaluation-mode BCE over a set of samples.
    pub fn mean_loss(&self, samples: &[(Vec<F>, Vec<F>)]) -> Result<f64> {
        let mut total = 0.0;
        for (x, y) in samples {
            total += bce_loss(y, &self.predict_slice(x)?);
        }
        Ok(total / samples.len().max(1) as f64)
    }
}

fn uniform_fill<F: Scalar, R: Rng + ?Sized>(t: &mut Tensor<F>, limit: f64, rng: &mut R) {
    for v in t.data_mut() {
        *v = F::of(rng.random_range(-limit..limit));
    }
}

impl<F: Scalar> FlipPredictor for Model<F> {
    fn output_len(&self) -> usize {
        self.config.output_len()
    }

    fn predict(&self, input: &InputTensor) -> Result<FlipScores> {
        if input.shape() != self.config.input {
            return Err(Error::ShapeMismatch(format!(
                "input image {:?}, model expects {:?}",
                input.shape(),
                self.config.input
            )));
        }
        let x: Vec<F> = input.data().iter().map(|&v| F::of(f64::from(v))).collect();
        let probs = self.predict_slice(&x)?;
        FlipScores::new(probs.iter().map(|p| p.as_f64()).collect())
    }

    fn clip(&self) -> f64 {
        self.config.clip
    }
}
