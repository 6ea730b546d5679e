//! CSV output. Every file starts with one comment line naming the manifest
//! hash and the content identifiers of the inputs it was computed from.

use std::path::Path;

use anyhow::{bail, Context, Result};
use polarbf::neural::EpochLog;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dataset::SnrReport;
use crate::eval::{AccuracyCurve, SchemeStats};

/// Git-style blob identifier: SHA-256 of `"blob <len>\0"` followed by the
/// content.
pub fn content_id(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Inputs recorded in a CSV header line.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    pub manifest: String,
    pub dataset: Option<String>,
    pub weights: Option<String>,
}

impl Provenance {
    pub fn line(&self) -> String {
        let none = || "-".to_string();
        format!(
            "# manifest={} dataset={} weights={}",
            self.manifest,
            self.dataset.clone().unwrap_or_else(none),
            self.weights.clone().unwrap_or_else(none)
        )
    }
}

pub fn csv_bytes<R: Serialize>(prov: &Provenance, rows: &[R]) -> Result<Vec<u8>> {
    let mut out = prov.line().into_bytes();
    out.push(b'\n');
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("flushing CSV: {}", e.error()))
}

pub fn write_csv<R: Serialize>(path: &Path, prov: &Provenance, rows: &[R]) -> Result<()> {
    std::fs::write(path, csv_bytes(prov, rows)?).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Serialize)]
pub struct CoverageRow {
    pub snr_db: f64,
    pub frames_simulated: u64,
    pub failed: usize,
    pub correctable: usize,
    pub covered: usize,
    pub correctable_fraction: f64,
    pub coverage: f64,
}

pub fn coverage_rows(reports: &[SnrReport]) -> Vec<CoverageRow> {
    reports
        .iter()
        .map(|r| CoverageRow {
            snr_db: r.snr_db,
            frames_simulated: r.frames_simulated,
            failed: r.failed,
            correctable: r.correctable,
            covered: r.covered,
            correctable_fraction: r.correctable_fraction(),
            coverage: r.coverage(),
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct AccuracyRow {
    pub snr_db: f64,
    pub method: String,
    pub attempt: usize,
    pub successes: usize,
    pub failed: usize,
    pub correctable: usize,
    pub fraction_of_failed: f64,
    pub fraction_of_correctable: f64,
}

pub fn accuracy_rows(curves: &[AccuracyCurve]) -> Vec<AccuracyRow> {
    curves
        .iter()
        .flat_map(|c| {
            (1..=c.successes.len()).map(move |t| AccuracyRow {
                snr_db: c.snr_db,
                method: c.method.clone(),
                attempt: t,
                successes: c.successes[t - 1],
                failed: c.failed,
                correctable: c.correctable,
                fraction_of_failed: c.fraction_of_failed(t),
                fraction_of_correctable: c.fraction_of_correctable(t),
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct BlerRow {
    pub snr_db: f64,
    pub scheme: String,
    pub frames: u64,
    pub block_errors: u64,
    pub bler: f64,
}

pub fn bler_rows(stats: &[SchemeStats]) -> Vec<BlerRow> {
    stats
        .iter()
        .map(|s| BlerRow {
            snr_db: s.snr_db,
            scheme: s.scheme.clone(),
            frames: s.frames,
            block_errors: s.block_errors,
            bler: s.bler(),
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct AttemptsRow {
    pub snr_db: f64,
    pub scheme: String,
    pub frames: u64,
    pub total_attempts: u64,
    pub mean_attempts: f64,
}

/// Flip schemes only; plain BP never flips.
pub fn attempts_rows(stats: &[SchemeStats]) -> Vec<AttemptsRow> {
    stats
        .iter()
        .filter(|s| s.scheme != "bp")
        .map(|s| AttemptsRow {
            snr_db: s.snr_db,
            scheme: s.scheme.clone(),
            frames: s.frames,
            total_attempts: s.total_attempts,
            mean_attempts: s.mean_attempts(),
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct LossRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

pub fn loss_rows(log: &[EpochLog]) -> Vec<LossRow> {
    log.iter()
        .map(|e| LossRow {
            epoch: e.epoch,
            train_loss: e.train_loss,
            val_loss: e.val_loss,
        })
        .collect()
}

/// Cumulative success never decreases with the attempt budget.
pub fn check_accuracy(curves: &[AccuracyCurve]) -> Result<()> {
    for c in curves {
        if c.successes.windows(2).any(|w| w[1] < w[0]) {
            bail!("{} accuracy at {} dB decreases with attempts: {:?}", c.method, c.snr_db, c.successes);
        }
    }
    Ok(())
}

fn budget(scheme: &str) -> Option<(&str, usize)> {
    let (method, t) = scheme.split_once('@')?;
    Some((method, t.parse().ok()?))
}

/// Block errors of each flip method never increase with `T_max` on the same
/// frames.
pub fn check_bler(stats: &[SchemeStats]) -> Result<()> {
    for a in stats {
        for b in stats {
            let (Some((ma, ta)), Some((mb, tb))) = (budget(&a.scheme), budget(&b.scheme)) else {
                continue;
            };
            if a.snr_db == b.snr_db && ma == mb && ta < tb && b.block_errors > a.block_errors {
                bail!(
                    "{} dB: {} has {} block errors but {} has {}",
                    a.snr_db,
                    a.scheme,
                    a.block_errors,
                    b.scheme,
                    b.block_errors
                );
            }
        }
    }
    Ok(())
}

/// Schemes whose mean attempts rise from one SNR to the next. This is a
/// statistical trend rather than a structural invariant, so callers report
/// it instead of failing.
pub fn attempts_trend_violations(stats: &[SchemeStats]) -> Vec<String> {
    let mut out = Vec::new();
    let mut schemes: Vec<&str> = stats.iter().filter(|s| s.scheme != "bp").map(|s| s.scheme.as_str()).collect();
    schemes.sort_unstable();
    schemes.dedup();
    for scheme in schemes {
        let mut points: Vec<&SchemeStats> = stats.iter().filter(|s| s.scheme == scheme).collect();
        points.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        for w in points.windows(2) {
            if w[1].mean_attempts() > w[0].mean_attempts() {
                out.push(format!(
                    "{scheme}: mean attempts rise from {:.4} at {} dB to {:.4} at {} dB",
                    w[0].mean_attempts(),
                    w[0].snr_db,
                    w[1].mean_attempts(),
                    w[1].snr_db
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_id_matches_git_layout() {
        let expected = hex::encode(Sha256::digest(b"blob 3\0abc"));
        assert_eq!(content_id(b"abc"), expected);
    }

    #[test]
    fn csv_starts_with_provenance() {
        let prov = Provenance {
            manifest: "ab".into(),
            dataset: Some("cd".into()),
            weights: None,
        };
        let rows = vec![LossRow {
            epoch: 1,
            train_loss: 0.5,
            val_loss: 0.25,
        }];
        let text = String::from_utf8(csv_bytes(&prov, &rows).unwrap()).unwrap();
        assert_eq!(text, "# manifest=ab dataset=cd weights=-\nepoch,train_loss,val_loss\n1,0.5,0.25\n");
    }

    fn stat(snr: f64, scheme: &str, errors: u64, attempts: u64) -> SchemeStats {
        SchemeStats {
            snr_db: snr,
            scheme: scheme.into(),
            frames: 100,
            block_errors: errors,
            total_attempts: attempts,
        }
    }

    #[test]
    fn bler_monotonicity() {
        let ok = vec![stat(1.0, "cs_bf@6", 10, 0), stat(1.0, "cs_bf@12", 9, 0), stat(1.0, "cnn_bf@6", 3, 0)];
        assert!(check_bler(&ok).is_ok());
        let bad = vec![stat(1.0, "cs_bf@6", 10, 0), stat(1.0, "cs_bf@12", 11, 0)];
        assert!(check_bler(&bad).is_err());
    }

    #[test]
    fn attempts_trend() {
        let s = vec![stat(0.0, "cs_bf@6", 0, 50), stat(1.0, "cs_bf@6", 0, 60), stat(1.0, "bp", 0, 0)];
        assert_eq!(attempts_trend_violations(&s).len(), 1);
    }
}
