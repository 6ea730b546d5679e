//! The four evaluations: coverage, cumulative flip accuracy, BLER and mean
//! flip attempts.

use anyhow::{bail, Result};
use polarbf::bp::{run_bp, BpDecision, DecoderConfig};
use polarbf::flip::{
    build_critical_set, flip_attempts, predicted_positions, score_trace, FlipPredictor, FlipSearch,
};
use polarbf::polar::{crc_check, CodeConfig};
use serde::Serialize;

use crate::dataset::{summarize, Dataset, DatasetRecord, SnrReport};
use crate::manifest::{Purpose, RunManifest};
use crate::sim::{simulate, widen, Workers};

/// Coverage statistics of a stored dataset, one entry per manifest SNR.
pub fn coverage(manifest: &RunManifest, dataset: &Dataset) -> Result<Vec<SnrReport>> {
    let code = manifest.code_config()?;
    Ok(manifest
        .channel
        .snr_db
        .iter()
        .map(|&snr| {
            let recs: Vec<&DatasetRecord> = dataset.at_snr(snr).collect();
            summarize(&recs, &code, snr, 0, true)
        })
        .collect())
}

/// CS-BF and CNN-BF searches on one channel row, sharing the plain decode.
pub struct FrameSearches {
    pub plain: BpDecision,
    pub plain_passed: bool,
    pub cs: FlipSearch,
    pub cnn: Option<FlipSearch>,
}

/// Runs plain BP once; on CRC failure runs the CS search and, when a model
/// is given, the CNN search, each up to `t_max` attempts.
pub fn search_frame<P: FlipPredictor + ?Sized>(
    llrs: &[f64],
    code: &CodeConfig,
    dec: &DecoderConfig,
    cs_order: &[usize],
    model: Option<&P>,
    t_max: usize,
) -> Result<FrameSearches> {
    let run = run_bp(llrs, code, dec, None)?;
    let plain = BpDecision {
        u_hat: run.u_hat,
        info_bits: run.info_bits,
    };
    let plain_passed = crc_check(&plain.info_bits, code);
    let search = |attempts| FlipSearch {
        plain: plain.clone(),
        plain_passed,
        attempts,
    };
    if plain_passed {
        return Ok(FrameSearches {
            plain: plain.clone(),
            plain_passed,
            cs: search(Vec::new()),
            cnn: model.map(|_| search(Vec::new())),
        });
    }
    let cs = search(flip_attempts(llrs, code, dec, &plain, cs_order.iter().copied(), t_max)?);
    let cnn = match model {
        Some(m) => {
            let scores = score_trace(&run.trace, m)?;
            let order = predicted_positions(&scores, code)?;
            Some(search(flip_attempts(llrs, code, dec, &plain, order, t_max)?))
        }
        None => None,
    };
    Ok(FrameSearches {
        plain,
        plain_passed,
        cs,
        cnn,
    })
}

/// Cumulative CRC successes after `t` attempts, `t = 1..=t_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyCurve {
    pub snr_db: f64,
    pub method: String,
    pub failed: usize,
    pub correctable: usize,
    /// `successes[t - 1]` frames passed CRC within `t` attempts.
    pub successes: Vec<usize>,
}

impl AccuracyCurve {
    pub fn fraction_of_failed(&self, t: usize) -> f64 {
        crate::dataset::ratio(self.successes[t - 1], self.failed)
    }

    pub fn fraction_of_correctable(&self, t: usize) -> f64 {
        crate::dataset::ratio(self.successes[t - 1], self.correctable)
    }
}

fn cumulative(firsts: &[Option<usize>], t_max: usize) -> Vec<usize> {
    (1..=t_max)
        .map(|t| firsts.iter().filter(|f| matches!(f, Some(a) if *a >= 1 && *a <= t)).count())
        .collect()
}

/// Cumulative accuracy of CS-BF and (optionally) CNN-BF on the stored
/// failed frames of `dataset`, both on identical frames.
pub fn accuracy<P: FlipPredictor + Sync + ?Sized>(
    manifest: &RunManifest,
    dataset: &Dataset,
    model: Option<&P>,
    workers: &Workers,
) -> Result<Vec<AccuracyCurve>> {
    let code = manifest.code_config()?;
    let dec = manifest.decoder_config()?;
    dataset.check_compatible(&code, dec.iterations)?;
    let order = build_critical_set(&code).attempt_order(&code, manifest.eval.cs_order);
    let t_max = manifest.t_max_max();
    let mut curves = Vec::new();
    for &snr in &manifest.channel.snr_db {
        let recs: Vec<&DatasetRecord> = dataset.at_snr(snr).collect();
        let results = workers.map(0..recs.len() as u64, |i| {
            let r = recs[i as usize];
            let s = search_frame(&widen(&r.llrs), &code, &dec, &order, model, t_max)?;
            if s.plain_passed || s.plain.u_hat != r.u_hat {
                bail!("stored frame {} at {snr} dB does not reproduce its plain-BP failure", r.frame_seed);
            }
            Ok((s.cs.first_pass(), s.cnn.map(|c| c.first_pass())))
        })?;
        let failed = recs.len();
        let correctable = recs.iter().filter(|r| r.correctable).count();
        let cs_first: Vec<Option<usize>> = results.iter().map(|r| r.0).collect();
        curves.push(AccuracyCurve {
            snr_db: snr,
            method: "cs".into(),
            failed,
            correctable,
            successes: cumulative(&cs_first, t_max),
        });
        if model.is_some() {
            let cnn_first: Vec<Option<usize>> = results.iter().map(|r| r.1.flatten()).collect();
            curves.push(AccuracyCurve {
                snr_db: snr,
                method: "cnn".into(),
                failed,
                correctable,
                successes: cumulative(&cnn_first, t_max),
            });
        }
    }
    Ok(curves)
}

/// Per frame: plain-BP block error, then for each `T_max` the (block error,
/// attempts) of CS-BF and CNN-BF.
type FrameResult = (bool, Vec<[(bool, usize); 2]>);

/// Per-scheme totals over the fresh evaluation frames of one SNR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeStats {
    pub snr_db: f64,
    pub scheme: String,
    pub frames: u64,
    pub block_errors: u64,
    pub total_attempts: u64,
}

impl SchemeStats {
    pub fn bler(&self) -> f64 {
        self.block_errors as f64 / self.frames.max(1) as f64
    }

    pub fn mean_attempts(&self) -> f64 {
        self.total_attempts as f64 / self.frames.max(1) as f64
    }
}

pub fn scheme_name(method: &str, t_max: usize) -> String {
    format!("{method}@{t_max}")
}

/// Simulates `frames` fresh frames per SNR and scores plain BP, CS-BF and
/// (optionally) CNN-BF at every manifest `T_max`. A block error is a
/// decoded payload that differs from the transmitted one, so CRC false
/// accepts count as errors.
pub fn frame_stats<P: FlipPredictor + Sync + ?Sized>(
    manifest: &RunManifest,
    model: Option<&P>,
    frames: u64,
    workers: &Workers,
) -> Result<Vec<SchemeStats>> {
    let code = manifest.code_config()?;
    let dec = manifest.decoder_config()?;
    let order = build_critical_set(&code).attempt_order(&code, manifest.eval.cs_order);
    let t_max = manifest.t_max_max();
    let p = code.payload_len();
    let mut out = Vec::new();
    for (si, &snr) in manifest.channel.snr_db.iter().enumerate() {
        let ch = manifest.channel_config(si, Purpose::Eval)?;
        let per_frame: Vec<FrameResult> = workers.map(0..frames, |i| {
            let f = simulate(&code, &ch, i, dec.llr_max)?;
            let s = search_frame(&f.llrs_f64(), &code, &dec, &order, model, t_max)?;
            let wrong = |info: &[u8]| info[..p] != f.payload[..];
            let per_t: Vec<[(bool, usize); 2]> = manifest
                .eval
                .t_max
                .iter()
                .map(|&t| {
                    let cs = s.cs.outcome(t);
                    let cnn = s.cnn.as_ref().map(|c| c.outcome(t));
                    [
                        (wrong(&cs.info_bits), cs.attempts),
                        cnn.map_or((false, 0), |o| (wrong(&o.info_bits), o.attempts)),
                    ]
                })
                .collect();
            Ok((wrong(&s.plain.info_bits), per_t))
        })?;
        let stat = |scheme: String, pick: &dyn Fn(&FrameResult) -> (bool, usize)| {
            let (mut errors, mut attempts) = (0u64, 0u64);
            for r in &per_frame {
                let (e, a) = pick(r);
                errors += u64::from(e);
                attempts += a as u64;
            }
            SchemeStats {
                snr_db: snr,
                scheme,
                frames,
                block_errors: errors,
                total_attempts: attempts,
            }
        };
        out.push(stat("bp".into(), &|r| (r.0, 0)));
        for (ti, &t) in manifest.eval.t_max.iter().enumerate() {
            out.push(stat(scheme_name("cs_bf", t), &|r| r.1[ti][0]));
        }
        if model.is_some() {
            for (ti, &t) in manifest.eval.t_max.iter().enumerate() {
                out.push(stat(scheme_name("cnn_bf", t), &|r| r.1[ti][1]));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_counts() {
        let firsts = [Some(1), Some(3), None, Some(0), Some(2)];
        assert_eq!(cumulative(&firsts, 4), vec![1, 2, 3, 3]);
    }
}
