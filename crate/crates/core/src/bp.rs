//! Min-sum belief propagation on the polar factor graph.
//!
//! The graph has `n + 1` stages of `N` nodes. Stage 0 holds the bit
//! estimates `u` and their priors, stage `n` holds the channel LLRs. The
//! butterfly between stage `i` and `i + 1` pairs node `j` with `j + N/2^(i+1)`
//! and implements `right_top = left_top ^ left_bot`, `right_bot = left_bot`,
//! so stage `n` carries `u · F^{⊗n}`. The encoder's bit reversal is undone when
//! the channel row is loaded.
//!
//! Infinite priors are represented by saturation at `±llr_max`; every message
//! is clamped to that range after each update.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polar::{bit_reversal_permutation, CodeConfig};

pub const DEFAULT_ITERATIONS: usize = 5;
pub const DEFAULT_LLR_MAX: f64 = 100.0;

/// Iteration count, saturation level and the set of flipped positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub iterations: usize,
    pub llr_max: f64,
    #[serde(default)]
    pub flip_set: Vec<usize>,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            iterations: DEFAULT_ITERATIONS,
            llr_max: DEFAULT_LLR_MAX,
            flip_set: Vec::new(),
        }
    }
}

impl DecoderConfig {
    pub fn new(iterations: usize, llr_max: f64) -> Result<Self> {
        let cfg = DecoderConfig {
            iterations,
            llr_max,
            flip_set: Vec::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same settings with a different flip set.
    pub fn with_flips(&self, flips: &[usize]) -> Self {
        DecoderConfig {
            iterations: self.iterations,
            llr_max: self.llr_max,
            flip_set: flips.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        if !(self.llr_max > 0.0 && self.llr_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "llr_max must be positive and finite, got {}",
                self.llr_max
            )));
        }
        Ok(())
    }
}

/// Min-sum check update: `sign(x) sign(y) min(|x|, |y|)` with `sign(0) = 0`.
#[inline]
pub fn g(x: f64, y: f64) -> f64 {
    let m = x.abs().min(y.abs());
    if m == 0.0 {
        0.0
    } else if (x < 0.0) != (y < 0.0) {
        -m
    } else {
        m
    }
}

/// Channel LLRs `2y/σ²` for BPSK (0 -> +1) over AWGN, clamped to `±llr_max`.
pub fn channel_llrs(y: &[f64], noise_var: f64, llr_max: f64) -> Result<Vec<f64>> {
    if noise_var.is_nan() || noise_var <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    Ok(y
        .iter()
        .map(|&v| (2.0 * v / noise_var).clamp(-llr_max, llr_max))
        .collect())
}

/// Stage-0 priors. Frozen positions get `+llr_max`, flipped positions
/// `llr_max · (2û - 1)` and the remaining information positions 0.
pub fn init_priors(
    config: &CodeConfig,
    dec: &DecoderConfig,
    prev_estimate: Option<&[u8]>,
) -> Result<Vec<f64>> {
    let n = config.block_len();
    let mut row = vec![dec.llr_max; n];
    for &i in config.info_set() {
        row[i] = 0.0;
    }
    if dec.flip_set.is_empty() {
        return Ok(row);
    }
    let est = prev_estimate.ok_or(Error::MissingEstimate)?;
    if est.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: est.len(),
        });
    }
    for &j in &dec.flip_set {
        if !config.is_info(j) {
            return Err(Error::FlipNotInfo(j));
        }
        row[j] = dec.llr_max * (2.0 * f64::from(est[j] & 1) - 1.0);
    }
    Ok(row)
}

/// L and R messages on the full (n+1) × N graph, row-major by stage.
#[derive(Debug, Clone, PartialEq)]
pub struct BpState {
    stages: usize,
    block_len: usize,
    l: Vec<f64>,
    r: Vec<f64>,
}

impl BpState {
    /// All-zero messages apart from the stage-0 priors and the stage-n
    /// channel row. `channel_row` is in codeword order.
    pub fn new(config: &CodeConfig, priors: &[f64], channel_row: &[f64]) -> Result<Self> {
        let n = config.block_len();
        for len in [priors.len(), channel_row.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        let stages = config.stages();
        let mut state = BpState {
            stages,
            block_len: n,
            l: vec![0.0; (stages + 1) * n],
            r: vec![0.0; (stages + 1) * n],
        };
        state.r[..n].copy_from_slice(priors);
        let perm = bit_reversal_permutation(n)?;
        let last = stages * n;
        for (k, &p) in perm.iter().enumerate() {
            state.l[last + k] = channel_row[p];
        }
        Ok(state)
    }

    /// Builds a state from explicit message matrices.
    pub fn from_messages(stages: usize, block_len: usize, l: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        let len = (stages + 1) * block_len;
        for v in [&l, &r] {
            if v.len() != len {
                return Err(Error::LengthMismatch {
                    expected: len,
                    actual: v.len(),
                });
            }
        }
        Ok(BpState {
            stages,
            block_len,
            l,
            r,
        })
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn l(&self) -> &[f64] {
        &self.l
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn l_at(&self, stage: usize, node: usize) -> f64 {
        self.l[stage * self.block_len + node]
    }

    pub fn r_at(&self, stage: usize, node: usize) -> f64 {
        self.r[stage * self.block_len + node]
    }

    /// One iteration: a left-to-right sweep producing `R^{(t)}` from the
    /// priors and `L^{(t-1)}`, then a right-to-left sweep producing `L^{(t)}`
    /// from the channel row and the fresh `R^{(t)}`.
    pub fn iterate(&mut self, llr_max: f64) {
        let n = self.block_len;
        let clamp = |v: f64| v.clamp(-llr_max, llr_max);
        for i in 0..self.stages {
            let d = n >> (i + 1);
            let (cur, nxt) = (i * n, (i + 1) * n);
            for block in (0..n).step_by(2 * d) {
                for top in block..block + d {
                    let bot = top + d;
                    let r_top = self.r[cur + top];
                    let r_bot = self.r[cur + bot];
                    let l_top = self.l[nxt + top];
                    let l_bot = self.l[nxt + bot];
                    self.r[nxt + top] = clamp(g(r_top, l_bot + r_bot));
                    self.r[nxt + bot] = clamp(g(r_top, l_top) + r_bot);
                }
            }
        }
        for i in (0..self.stages).rev() {
            let d = n >> (i + 1);
            let (cur, nxt) = (i * n, (i + 1) * n);
            for block in (0..n).step_by(2 * d) {
                for top in block..block + d {
                    let bot = top + d;
                    let r_top = self.r[cur + top];
                    let r_bot = self.r[cur + bot];
                    let l_top = self.l[nxt + top];
                    let l_bot = self.l[nxt + bot];
                    self.l[cur + top] = clamp(g(l_top, l_bot + r_bot));
                    self.l[cur + bot] = clamp(g(r_top, l_top) + l_bot);
                }
            }
        }
    }

    /// `û_j = 0` iff `L_{0,j} + R_{0,j} >= 0`.
    pub fn hard_decision(&self) -> Vec<u8> {
        (0..self.block_len)
            .map(|j| u8::from(self.l[j] + self.r[j] < 0.0))
            .collect()
    }

    /// Largest absolute L or R message.
    pub fn max_abs(&self) -> f64 {
        self.l
            .iter()
            .chain(&self.r)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Free-function form of [`BpState::iterate`].
pub fn bp_iterate(state: &mut BpState, dec: &DecoderConfig) {
    state.iterate(dec.llr_max);
}

/// Free-function form of [`BpState::hard_decision`].
pub fn hard_decision(state: &BpState) -> Vec<u8> {
    state.hard_decision()
}

/// One (L, R) copy per completed iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct BpTrace {
    stages: usize,
    block_len: usize,
    snapshots: Vec<BpState>,
}

impl BpTrace {
    pub fn new(stages: usize, block_len: usize, snapshots: Vec<BpState>) -> Result<Self> {
        for s in &snapshots {
            if s.stages != stages || s.block_len != block_len {
                return Err(Error::ShapeMismatch(format!(
                    "snapshot is {}x{}, trace is {}x{}",
                    s.stages + 1,
                    s.block_len,
                    stages + 1,
                    block_len
                )));
            }
        }
        Ok(BpTrace {
            stages,
            block_len,
            snapshots,
        })
    }

    pub fn iterations(&self) -> usize {
        self.snapshots.len()
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn snapshots(&self) -> &[BpState] {
        &self.snapshots
    }

    /// Binary dump: magic `PBPT`, then version, N, n and T as little-endian
    /// u32, then for each iteration the L matrix and the R matrix as
    /// row-major little-endian f32.
    pub fn to_bytes(&self) -> Vec<u8> {
        let cells = (self.stages + 1) * self.block_len;
        let mut out = Vec::with_capacity(20 + self.snapshots.len() * 2 * cells * 4);
        out.extend_from_slice(b"PBPT");
        for v in [
            TRACE_VERSION,
            self.block_len as u32,
            self.stages as u32,
            self.snapshots.len() as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for s in &self.snapshots {
            for v in s.l.iter().chain(&s.r) {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    /// Parses a dump written by [`BpTrace::to_bytes`]. Values come back at
    /// f32 precision.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidParameter(format!("trace dump: {m}"));
        if bytes.len() < 20 || &bytes[..4] != b"PBPT" {
            return Err(bad("missing PBPT header"));
        }
        let word = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap());
        if word(0) != TRACE_VERSION {
            return Err(bad("unsupported version"));
        }
        let (block_len, stages, iters) = (word(1) as usize, word(2) as usize, word(3) as usize);
        let cells = (stages + 1) * block_len;
        if bytes.len() != 20 + iters * 2 * cells * 4 {
            return Err(bad("length does not match header"));
        }
        let mut values = bytes[20..]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())));
        let mut snapshots = Vec::with_capacity(iters);
        for _ in 0..iters {
            let l: Vec<f64> = values.by_ref().take(cells).collect();
            let r: Vec<f64> = values.by_ref().take(cells).collect();
            snapshots.push(BpState {
                stages,
                block_len,
                l,
                r,
            });
        }
        BpTrace::new(stages, block_len, snapshots)
    }
}

const TRACE_VERSION: u32 = 1;

/// Decision of one BP run.
#[derive(Debug, Clone, PartialEq)]
pub struct BpDecision {
    pub u_hat: Vec<u8>,
    /// `û` restricted to the information set, ascending.
    pub info_bits: Vec<u8>,
}

/// Decision plus the full per-iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BpRun {
    pub u_hat: Vec<u8>,
    pub info_bits: Vec<u8>,
    pub trace: BpTrace,
}

fn run(
    channel_row: &[f64],
    config: &CodeConfig,
    dec: &DecoderConfig,
    prev_estimate: Option<&[u8]>,
    mut trace: Option<&mut Vec<BpState>>,
) -> Result<BpDecision> {
    dec.validate()?;
    let priors = init_priors(config, dec, prev_estimate)?;
    let mut state = BpState::new(config, &priors, channel_row)?;
    for _ in 0..dec.iterations {
        state.iterate(dec.llr_max);
        if let Some(t) = trace.as_deref_mut() {
            t.push(state.clone());
        }
    }
    let u_hat = state.hard_decision();
    let info_bits = config.extract_info(&u_hat);
    Ok(BpDecision { u_hat, info_bits })
}

/// Initializes, runs `dec.iterations` iterations and takes the hard decision,
/// keeping every intermediate state.
pub fn run_bp(
    channel_row: &[f64],
    config: &CodeConfig,
    dec: &DecoderConfig,
    prev_estimate: Option<&[u8]>,
) -> Result<BpRun> {
    let mut snaps = Vec::with_capacity(dec.iterations);
    let d = run(channel_row, config, dec, prev_estimate, Some(&mut snaps))?;
    Ok(BpRun {
        u_hat: d.u_hat,
        info_bits: d.info_bits,
        trace: BpTrace::new(config.stages(), config.block_len(), snaps)?,
    })
}

/// [`run_bp`] without the trace.
pub fn decode(
    channel_row: &[f64],
    config: &CodeConfig,
    dec: &DecoderConfig,
    prev_estimate: Option<&[u8]>,
) -> Result<BpDecision> {
    run(channel_row, config, dec, prev_estimate, None)
}
