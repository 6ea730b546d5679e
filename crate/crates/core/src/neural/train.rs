//! Mini-batch training with Adam and best-validation checkpointing.
//!
//! Batches are split into fixed-size chunks; each chunk accumulates its
//! gradient in the working precision and chunk sums are added in f64 in
//! chunk order. Dropout draws come from a per-(epoch, sample) stream. The
//! result is therefore identical for any worker count.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::model::{Model, ModelParams};
use super::tensor::Scalar;
use crate::error::{Error, Result};

/// Samples per gradient chunk.
const CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub validation_ratio: f64,
    pub seed: u64,
    /// Worker threads for per-sample work; 1 runs everything inline.
    #[serde(default = "one")]
    pub threads: usize,
}

fn one() -> usize {
    1
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            batch_size: 500,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            epochs: 50,
            validation_ratio: 0.2,
            seed: 0,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        if !(self.validation_ratio > 0.0 && self.validation_ratio < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "validation ratio {} outside (0, 1)",
                self.validation_ratio
            )));
        }
        if self.threads == 0 {
            return Err(Error::InvalidParameter("threads must be >= 1".into()));
        }
        Ok(())
    }
}

/// One training example: a flattened input image and its K-bit label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f32>,
    pub label: Vec<f32>,
}

/// Random-access view of a training set.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;

    fn sample(&self, index: usize) -> Result<Sample>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl SampleSource for [Sample] {
    fn len(&self) -> usize {
        <[Sample]>::len(self)
    }

    fn sample(&self, index: usize) -> Result<Sample> {
        self.get(index)
            .cloned()
            .ok_or_else(|| Error::InvalidParameter(format!("sample {index} out of range")))
    }
}

impl SampleSource for Vec<Sample> {
    fn len(&self) -> usize {
        <[Sample]>::len(self)
    }

    fn sample(&self, index: usize) -> Result<Sample> {
        self.as_slice().sample(index)
    }
}

fn convert<F: Scalar>(v: &[f32]) -> Vec<F> {
    v.iter().map(|&x| F::of(f64::from(x))).collect()
}

fn flat_zeros<F: Scalar>(p: &ModelParams<F>) -> Vec<Vec<f64>> {
    p.tensors().iter().map(|t| vec![0.0; t.len()]).collect()
}

/// Loss of a single epoch and of the validation split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Model plus optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer<F> {
    pub model: Model<F>,
    pub adam: AdamState,
    pub cfg: TrainConfig,
}

impl<F: Scalar> Trainer<F> {
    pub fn new(model: Model<F>, cfg: TrainConfig) -> Result<Self> {
        if cfg.batch_size == 0 || cfg.threads == 0 {
            return Err(Error::InvalidParameter("batch size and threads must be >= 1".into()));
        }
        let adam = AdamState::new(&model.params);
        Ok(Trainer { model, adam, cfg })
    }

    fn chunk_grad<S: SampleSource + ?Sized>(
        &self,
        source: &S,
        chunk: &[usize],
        epoch: usize,
    ) -> Result<(ModelParams<F>, f64)> {
        let mut grads = self.model.params.clone();
        grads.fill(F::zero());
        let mut loss = 0.0;
        for &i in chunk {
            let s = source.sample(i)?;
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ 0x5eed_d20b ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            rng.set_stream(i as u64);
            let cache = self.model.forward_cached(&convert::<F>(&s.input), true, &mut rng)?;
            loss += self.model.backward(&cache, &convert::<F>(&s.label), &mut grads)?;
        }
        Ok((grads, loss))
    }

    /// One Adam step on the mean gradient of `batch`. Returns the summed
    /// per-sample loss.
    pub fn step<S: SampleSource + ?Sized>(&mut self, source: &S, batch: &[usize], epoch: usize) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let chunks: Vec<&[usize]> = batch.chunks(CHUNK).collect();
        let mut acc = flat_zeros(&self.model.params);
        let mut loss = 0.0;
        let mut add = |(g, l): (ModelParams<F>, f64)| {
            loss += l;
            for (a, t) in acc.iter_mut().zip(g.tensors()) {
                for (av, v) in a.iter_mut().zip(t.data()) {
                    *av += v.as_f64();
                }
            }
        };
        if self.cfg.threads <= 1 {
            for c in &chunks {
                add(self.chunk_grad(source, c, epoch)?);
            }
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.cfg.threads)
                .build()
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            for wave in chunks.chunks(self.cfg.threads) {
                let results: Vec<Result<(ModelParams<F>, f64)>> = pool.install(|| {
                    wave.par_iter()
                        .map(|c| self.chunk_grad(source, c, epoch))
                        .collect()
                });
                for r in results {
                    add(r?);
                }
            }
        }
        let scale = 1.0 / batch.len() as f64;
        for a in acc.iter_mut() {
            a.iter_mut().for_each(|v| *v *= scale);
        }
        adam_step(&mut self.model.params, &acc, &mut self.adam, &self.cfg.adam())?;
        Ok(loss)
    }

    /// Shuffles `indices` with the epoch's seed and runs one pass of
    /// mini-batches. Returns the mean training-mode loss.
    pub fn train_epoch<S: SampleSource + ?Sized>(&mut self, source: &S, indices: &[usize], epoch: usize) -> Result<f64> {
        let mut order = indices.to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed.wrapping_add(epoch as u64 + 1));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(self.cfg.batch_size) {
            total += self.step(source, batch, epoch)?;
        }
        Ok(total / order.len().max(1) as f64)
    }

    /// Mean evaluation-mode loss over `indices`.
    pub fn evaluate<S: SampleSource + ?Sized>(&self, source: &S, indices: &[usize]) -> Result<f64> {
        evaluate(&self.model, source, indices)
    }
}

/// Mean evaluation-mode BCE of `model` over `indices`.
pub fn evaluate<F: Scalar, S: SampleSource + ?Sized>(model: &Model<F>, source: &S, indices: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &i in indices {
        let s = source.sample(i)?;
        let p = model.predict_slice(&convert::<F>(&s.input))?;
        total += super::layers::bce_loss(&convert::<F>(&s.label), &p);
    }
    Ok(total / indices.len().max(1) as f64)
}

/// The seeded (validation, training) partition of `0..n` used by [`train`].
pub fn split_indices(n: usize, cfg: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_val = ((n as f64 * cfg.validation_ratio).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let tr = idx.split_off(n_val.min(n));
    (idx, tr)
}

/// Outcome of [`train`].
#[derive(Debug, Clone)]
pub struct TrainReport<F> {
    /// Parameters from the epoch with the lowest validation loss.
    pub best: Model<F>,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

/// Splits `source` into training and validation parts (seeded), trains for
/// `cfg.epochs` epochs and keeps the best-validation parameters.
pub fn train<F: Scalar, S: SampleSource + ?Sized>(
    model: Model<F>,
    source: &S,
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EpochLog),
) -> Result<TrainReport<F>> {
    cfg.validate()?;
    let n = source.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two samples to train, got {n}"
        )));
    }
    let (val, tr) = split_indices(n, cfg);
    let (val, tr) = (val.as_slice(), tr.as_slice());
    let mut trainer = Trainer::new(model, cfg.clone())?;
    let mut best = trainer.model.clone();
    let mut best_loss = trainer.evaluate(source, val)?;
    let mut best_epoch = 0;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let train_loss = trainer.train_epoch(source, tr, epoch)?;
        let val_loss = trainer.evaluate(source, val)?;
        let entry = EpochLog {
            epoch,
            train_loss,
            val_loss,
        };
        progress(&entry);
        log.push(entry);
        if val_loss < best_loss {
            best_loss = val_loss;
            best = trainer.model.clone();
            best_epoch = epoch;
        }
    }
    Ok(TrainReport {
        best,
        best_epoch,
        log,
    })
}
