//! Frame simulation and order-preserving fan-out over frame indices.

use std::ops::Range;

use anyhow::Result;
use polarbf::channel::{random_bits, transmit_with, ChannelConfig};
use polarbf::polar::{assemble_u, encode, CodeConfig, MessageWord};
use rayon::prelude::*;
use rayon::ThreadPool;

/// One transmitted frame. LLRs are rounded to f32, which is also what the
/// datasets store, so a reloaded frame decodes identically.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub index: u64,
    pub payload: Vec<u8>,
    pub llrs: Vec<f32>,
}

impl SimFrame {
    pub fn llrs_f64(&self) -> Vec<f64> {
        widen(&self.llrs)
    }
}

pub fn widen(llrs: &[f32]) -> Vec<f64> {
    llrs.iter().map(|&v| f64::from(v)).collect()
}

/// Payload bits, then channel noise, both from the frame's own stream.
pub fn simulate(code: &CodeConfig, ch: &ChannelConfig, index: u64, llr_max: f64) -> Result<SimFrame> {
    let mut rng = ch.frame_rng(index);
    let payload = random_bits(code.payload_len(), &mut rng);
    let u = assemble_u(&MessageWord::new(payload.clone(), code)?, code)?;
    let x = encode(&u, code)?;
    let rx = transmit_with(x.bits(), ch, llr_max, &mut rng);
    Ok(SimFrame {
        index,
        payload,
        llrs: rx.llrs.iter().map(|&v| v as f32).collect(),
    })
}

/// Runs `f` over a range of frame indices, inline or on a pool, and returns
/// the results in index order.
pub struct Workers {
    pool: Option<ThreadPool>,
}

impl Workers {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = if threads > 1 {
            Some(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?)
        } else {
            None
        };
        Ok(Workers { pool })
    }

    pub fn map<T, F>(&self, range: Range<u64>, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync,
    {
        match &self.pool {
            None => range.map(f).collect(),
            Some(pool) => pool.install(|| range.into_par_iter().map(&f).collect()),
        }
    }
}
