//! Single-bit flipping on top of BP: the critical-set baseline, the
//! predictor-guided search, and the exhaustive labeling oracle.
//!
//! Every flip attempt re-initializes the decoder with one information bit
//! forced to the complement of the plain-BP estimate and re-runs BP. Attempts
//! always reference the estimate of the first (unflipped) decode.

use serde::{Deserialize, Serialize};

use crate::bp::{decode, run_bp, BpDecision, BpTrace, DecoderConfig};
use crate::error::{Error, Result};
use crate::metadata::{build_input_tensor, InputTensor, DEFAULT_CLIP};
use crate::polar::{crc_check, CodeConfig};

/// Lowest-index leaves of the maximal rate-1 subtrees of the code tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriticalSet {
    indices: Vec<usize>,
}

/// Order in which CS-BF tries the critical-set members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CsOrder {
    /// Largest Bhattacharyya parameter first; ties by ascending index.
    #[default]
    LeastReliableFirst,
    AscendingIndex,
}

impl CriticalSet {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Members in the order CS-BF attempts them.
    pub fn attempt_order(&self, config: &CodeConfig, order: CsOrder) -> Vec<usize> {
        let mut out = self.indices.clone();
        if order == CsOrder::LeastReliableFirst {
            let z = config.bhattacharyya();
            out.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
        }
        out
    }
}

/// Decomposes the code tree over natural-order leaves and keeps the first
/// leaf of every maximal subtree whose leaves are all information bits.
pub fn build_critical_set(config: &CodeConfig) -> CriticalSet {
    fn walk(config: &CodeConfig, start: usize, size: usize, out: &mut Vec<usize>) {
        if (start..start + size).all(|i| config.is_info(i)) {
            out.push(start);
        } else if size > 1 {
            walk(config, start, size / 2, out);
            walk(config, start + size / 2, size / 2, out);
        }
    }
    let mut indices = Vec::new();
    walk(config, 0, config.block_len(), &mut indices);
    CriticalSet { indices }
}

/// Ground truth: bit `k` is 1 iff flipping the k-th information position
/// makes the frame pass CRC.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipLabel {
    bits: Vec<u8>,
}

impl FlipLabel {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidParameter("label entries must be 0 or 1".into()));
        }
        Ok(FlipLabel { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn is_correctable(&self) -> bool {
        self.bits.contains(&1)
    }

    /// Information positions whose flip passes CRC.
    pub fn positions(&self, config: &CodeConfig) -> Vec<usize> {
        self.bits
            .iter()
            .zip(config.info_set())
            .filter(|(b, _)| **b == 1)
            .map(|(_, &p)| p)
            .collect()
    }
}

/// Predicted flip probability for each information bit, in information-set
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipScores {
    probs: Vec<f64>,
}

impl FlipScores {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter("scores must lie in [0, 1]".into()));
        }
        Ok(FlipScores { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Indices sorted by descending score, ties by ascending index.
pub fn flip_order(scores: &FlipScores) -> Vec<usize> {
    let p = scores.probs();
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    idx
}

/// Anything that scores the information bits of a failed frame.
pub trait FlipPredictor {
    /// Number of scores produced, which must equal K.
    fn output_len(&self) -> usize;

    fn predict(&self, input: &InputTensor) -> Result<FlipScores>;

    /// Clip level used when turning traces into input images.
    fn clip(&self) -> f64 {
        DEFAULT_CLIP
    }
}

/// Final result of a bit-flipping decode.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub passed: bool,
    /// Flip re-decodes performed; 0 when plain BP passed.
    pub attempts: usize,
    pub u_hat: Vec<u8>,
    pub info_bits: Vec<u8>,
}

/// One flipped re-decode.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipAttempt {
    pub position: usize,
    pub passed: bool,
    pub u_hat: Vec<u8>,
    pub info_bits: Vec<u8>,
}

/// Plain decode plus every flip attempt made, stopping at the first pass.
///
/// Truncating to a smaller attempt budget gives exactly the result a search
/// run with that budget would have produced.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipSearch {
    pub plain: BpDecision,
    pub plain_passed: bool,
    pub attempts: Vec<FlipAttempt>,
}

impl FlipSearch {
    /// The outcome under an attempt budget of `t_max`.
    pub fn outcome(&self, t_max: usize) -> DecodeOutcome {
        if self.plain_passed {
            return DecodeOutcome {
                passed: true,
                attempts: 0,
                u_hat: self.plain.u_hat.clone(),
                info_bits: self.plain.info_bits.clone(),
            };
        }
        let used = &self.attempts[..t_max.min(self.attempts.len())];
        match used.last() {
            Some(last) => DecodeOutcome {
                passed: last.passed,
                attempts: used.len(),
                u_hat: last.u_hat.clone(),
                info_bits: last.info_bits.clone(),
            },
            None => DecodeOutcome {
                passed: false,
                attempts: 0,
                u_hat: self.plain.u_hat.clone(),
                info_bits: self.plain.info_bits.clone(),
            },
        }
    }

    /// 1-based attempt index of the first CRC pass, 0 if plain BP passed.
    pub fn first_pass(&self) -> Option<usize> {
        if self.plain_passed {
            return Some(0);
        }
        self.attempts.iter().position(|a| a.passed).map(|i| i + 1)
    }
}

/// Re-decodes with each candidate flipped in turn until CRC passes or
/// `t_max` candidates have been tried.
pub fn flip_attempts(
    channel_row: &[f64],
    config: &CodeConfig,
    dec: &DecoderConfig,
    plain: &BpDecision,
    candidates: impl IntoIterator<Item = usize>,
    t_max: usize,
) -> Result<Vec<FlipAttempt>> {
    let mut attempts = Vec::new();
    for position in candidates.into_iter().take(t_max) {
        let d = decode(channel_row, config, &dec.with_flips(&[position]), Some(&plain.u_hat))?;
        let passed = crc_check(&d.info_bits, config);
        attempts.push(FlipAttempt {
            position,
            passed,
            u_hat: d.u_hat,
            info_bits: d.info_bits,
        });
        if passed {
            break;
        }
    }
    Ok(attempts)
}

fn plain_decode(channel_row: &[f64], config: &CodeConfig, dec: &DecoderConfig) -> Result<BpDecision> {
    decode(channel_row, config, &dec.with_flips(&[]), None)
}

/// CS-BF with the full attempt log.
pub fn cs_bf_search(
    channel_row: &[f64],
    config: &CodeConfig,
    dec: &DecoderConfig,
    order: &[usize],
    t_max: usize,
) -> Result<FlipSearch> {
    let plain = plain_decode(channel_row, config, dec)?;
    let plain_passed = crc_check(&plain.info_bits, config);
    let attempts = if plain_passed {
        Vec::new()
    } else {
        flip_attempts(channel_row, config, dec, &plain, order.iter().copied(), t_max)?
    };
    Ok(FlipSearch {
        plain,
        plain_passed,
        attempts,
    })
}

/// Critical-set bit flipping with the least-reliable-first order.
pub fn cs_bf_decode(
    channel_row: &[f64],
    config: &CodeConfig,
    dec: &DecoderConfig,
    t_max: usize,
) -> Result<DecodeOutcome> {
    let order = build_critical_set(config).attempt_order(config, CsOrder::default());
    Ok(cs_bf_search(channel_row, config, dec, &order, t_max)?.outcome(t_max))
}

/// Maps predictor scores to information positions in attempt order.
pub fn predicted_positions(scores: &FlipScores, config: &CodeConfig) -> Result<Vec<usize>> {
    if scores.len() != config.info_len() {
        return Err(Error::ShapeMismatch(format!(
            "predictor produced {} scores for K = {}",
            scores.len(),
            config.info_len()
        )));
    }
    Ok(flip_order(scores)
        .into_iter()
        .map(|k| config.info_set()[k])
        .collect())
}

/// Scores a failed frame from its BP trace.
pub fn score_trace<P: FlipPredictor + ?Sized>(trace: &BpTrace, model: &P) -> Result<FlipScores> {
    let input = build_input_tensor(trace, model.clip())?;
    model.predict(&input)
}

/// Predictor-guided flipping with the full attempt log. The predictor runs
/// at most once, and only when plain BP fails CRC.
pub fn cnn_bf_search<P: FlipPredictor + ?Sized>(
    channel_row: &[f64],
    config: &CodeConfig,
    dec: &DecoderConfig,
    model: &P,
    t_max: usize,
) -> Result<FlipSearch> {
    if model.output_len() != config.info_len() {
        return Err(Error::ShapeMismatch(format!(
            "model emits {} scores, code has K = {}",
            model.output_len(),
            config.info_len()
        )));
    }
    let run = run_bp(channel_row, config, &dec.with_flips(&[]), None)?;
    let plain = BpDecision {
        u_hat: run.u_hat,
        info_bits: run.info_bits,
    };
    let plain_passed = crc_check(&plain.info_bits, config);
    let attempts = if plain_passed {
        Vec::new()
    } else {
        let scores = score_trace(&run.trace, model)?;
        let order = predicted_positions(&scores, config)?;
        flip_attempts(channel_row, config, dec, &plain, order, t_max)?
    };
    Ok(FlipSearch {
        plain,
        plain_passed,
        attempts,
    })
}

/// CNN-aided bit flipping.
pub fn cnn_bf_decode<P: FlipPredictor + ?Sized>(
    channel_row: &[f64],
    config: &CodeConfig,
    dec: &DecoderConfig,
    model: &P,
    t_max: usize,
) -> Result<DecodeOutcome> {
    Ok(cnn_bf_search(channel_row, config, dec, model, t_max)?.outcome(t_max))
}

/// Labels a frame by trying every single information-bit flip. Returns
/// `None` when plain BP already passes CRC.
pub fn label_frame(
    channel_row: &[f64],
    config: &CodeConfig,
    dec: &DecoderConfig,
) -> Result<Option<(FlipLabel, Vec<u8>)>> {
    let plain = plain_decode(channel_row, config, dec)?;
    if crc_check(&plain.info_bits, config) {
        return Ok(None);
    }
    let mut bits = Vec::with_capacity(config.info_len());
    for &pos in config.info_set() {
        let d = decode(channel_row, config, &dec.with_flips(&[pos]), Some(&plain.u_hat))?;
        bits.push(u8::from(crc_check(&d.info_bits, config)));
    }
    Ok(Some((FlipLabel { bits }, plain.u_hat)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crc::Crc;

    #[test]
    fn critical_set_toy() {
        let cfg = CodeConfig::from_info_set(8, &[3, 5, 6, 7], Crc::NONE).unwrap();
        assert_eq!(build_critical_set(&cfg).indices(), &[3, 5, 6]);
    }

    #[test]
    fn critical_set_all_frozen() {
        let cfg = CodeConfig::from_info_set(8, &[], Crc::NONE).unwrap();
        assert!(build_critical_set(&cfg).is_empty());
    }

    #[test]
    fn critical_set_all_info() {
        let cfg = CodeConfig::from_info_set(4, &[0, 1, 2, 3], Crc::NONE).unwrap();
        assert_eq!(build_critical_set(&cfg).indices(), &[0]);
    }

    #[test]
    fn critical_set_attempt_orders() {
        let cfg = CodeConfig::construct(64, 32, 0.5).unwrap();
        let cs = build_critical_set(&cfg);
        assert_eq!(cs.attempt_order(&cfg, CsOrder::AscendingIndex), cs.indices());
        let order = cs.attempt_order(&cfg, CsOrder::LeastReliableFirst);
        let z = cfg.bhattacharyya();
        assert!(order.windows(2).all(|w| z[w[0]] >= z[w[1]]));
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, cs.indices());
    }

    #[test]
    fn flip_order_examples() {
        let s = FlipScores::new(vec![0.1, 0.9, 0.5]).unwrap();
        assert_eq!(flip_order(&s), vec![1, 2, 0]);
        let s = FlipScores::new(vec![0.3; 5]).unwrap();
        assert_eq!(flip_order(&s), vec![0, 1, 2, 3, 4]);
        let s = FlipScores::new(vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(flip_order(&s)[0], 2);
        assert!(FlipScores::new(vec![1.5]).is_err());
    }

    #[test]
    fn truncated_outcome_without_attempts() {
        let search = FlipSearch {
            plain: BpDecision {
                u_hat: vec![1, 0],
                info_bits: vec![1],
            },
            plain_passed: false,
            attempts: vec![],
        };
        let o = search.outcome(12);
        assert!(!o.passed);
        assert_eq!(o.attempts, 0);
        assert_eq!(o.u_hat, vec![1, 0]);
        assert_eq!(search.first_pass(), None);
    }
}
