//! The CLI commands as library calls. Each reads and writes files under the
//! manifest's `out_dir` and writes human-readable progress to `log`.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use polarbf::neural::{load_weights, save_weights, Model, TrainReport};

use crate::dataset::{generate, Dataset, SnrReport};
use crate::eval::{self, AccuracyCurve, SchemeStats};
use crate::manifest::{self, Purpose, RunManifest};
use crate::report::{self, content_id, Provenance};
use crate::selftest::{self, Check};
use crate::sim::Workers;
use crate::training::train_on;

fn file_id(path: &Path) -> Result<String> {
    Ok(content_id(&std::fs::read(path).with_context(|| format!("reading {}", path.display()))?))
}

pub fn load_dataset(m: &RunManifest, name: &str, log: &mut dyn Write) -> Result<(Dataset, String)> {
    let path = m.path(name);
    let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
    let ds = Dataset::from_bytes(&bytes).with_context(|| format!("decoding {}", path.display()))?;
    if ds.header.manifest_hash != m.hash() {
        writeln!(log, "note: {} was generated from a different manifest", path.display())?;
    }
    Ok((ds, content_id(&bytes)))
}

pub fn load_model(m: &RunManifest) -> Result<(Model<f32>, String)> {
    let path = m.path(manifest::WEIGHTS);
    let model = load_weights(&path).with_context(|| format!("loading {}", path.display()))?;
    if model.config != m.model_config()? {
        bail!("{} does not match the manifest's model", path.display());
    }
    Ok((model, file_id(&path)?))
}

fn provenance(m: &RunManifest, dataset: Option<String>, weights: Option<String>) -> Provenance {
    Provenance {
        manifest: m.hash_hex(),
        dataset,
        weights,
    }
}

/// Generation reports of the train and test sets.
#[derive(Debug, Clone)]
pub struct GenSummary {
    pub train: Vec<SnrReport>,
    pub test: Vec<SnrReport>,
}

/// Simulates and labels both datasets and writes the test-set coverage CSV.
pub fn gen_dataset(m: &RunManifest, log: &mut dyn Write) -> Result<GenSummary> {
    std::fs::create_dir_all(&m.out_dir).with_context(|| format!("creating {}", m.out_dir.display()))?;
    m.save(&m.path("manifest.json"))?;
    let workers = Workers::new(m.threads)?;
    let mut reports = Vec::new();
    for (purpose, quota, name) in [
        (Purpose::Train, m.dataset.train_per_snr, manifest::TRAIN_DATASET),
        (Purpose::Test, m.dataset.test_per_snr, manifest::TEST_DATASET),
    ] {
        let (ds, snr_reports) = generate(m, purpose, quota, &workers)?;
        let bytes = ds.to_bytes();
        let path = m.path(name);
        std::fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
        writeln!(log, "{name}: {} records", ds.records.len())?;
        for r in &snr_reports {
            writeln!(
                log,
                "  {:>5.2} dB: {} simulated, {} failed, {:.2}% correctable, CS coverage {:.2}%{}",
                r.snr_db,
                r.frames_simulated,
                r.failed,
                100.0 * r.correctable_fraction(),
                100.0 * r.coverage(),
                if r.quota_met { "" } else { " (no failures on this channel)" }
            )?;
        }
        if purpose == Purpose::Test {
            let prov = provenance(m, Some(content_id(&bytes)), None);
            report::write_csv(&m.path(manifest::COVERAGE_CSV), &prov, &report::coverage_rows(&snr_reports))?;
        }
        reports.push(snr_reports);
    }
    let test = reports.pop().expect("two datasets");
    let train = reports.pop().expect("two datasets");
    Ok(GenSummary { train, test })
}

/// Trains on the train set and writes the best weights and the loss CSV.
pub fn train(m: &RunManifest, log: &mut dyn Write) -> Result<TrainReport<f32>> {
    let (ds, ds_id) = load_dataset(m, manifest::TRAIN_DATASET, log)?;
    let report = train_on(m, &ds, |e| {
        let _ = writeln!(log, "epoch {:>4}: train {:.6} val {:.6}", e.epoch, e.train_loss, e.val_loss);
    })?;
    let weights = m.path(manifest::WEIGHTS);
    save_weights(&report.best, &weights)?;
    let prov = provenance(m, Some(ds_id), Some(file_id(&weights)?));
    report::write_csv(&m.path(manifest::LOSS_CSV), &prov, &report::loss_rows(&report.log))?;
    writeln!(log, "best validation loss at epoch {}", report.best_epoch)?;
    Ok(report)
}

/// Cumulative accuracy of both methods on the test set.
pub fn eval_accuracy(m: &RunManifest, log: &mut dyn Write) -> Result<Vec<AccuracyCurve>> {
    let (ds, ds_id) = load_dataset(m, manifest::TEST_DATASET, log)?;
    let (model, w_id) = load_model(m)?;
    let curves = eval::accuracy(m, &ds, Some(&model), &Workers::new(m.threads)?)?;
    report::check_accuracy(&curves)?;
    let prov = provenance(m, Some(ds_id), Some(w_id));
    report::write_csv(&m.path(manifest::ACCURACY_CSV), &prov, &report::accuracy_rows(&curves))?;
    for c in &curves {
        let t = c.successes.len().min(6);
        writeln!(
            log,
            "{:>5.2} dB {:>3}: {:.2}% of failed frames within {t} attempts",
            c.snr_db,
            c.method,
            100.0 * c.fraction_of_failed(t)
        )?;
    }
    Ok(curves)
}

/// Which fresh-frame CSVs to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameOutputs {
    pub bler: bool,
    pub attempts: bool,
}

/// BLER and attempt statistics on fresh frames, computed in one pass.
pub fn eval_frames(m: &RunManifest, outputs: FrameOutputs, log: &mut dyn Write) -> Result<Vec<SchemeStats>> {
    let (model, w_id) = load_model(m)?;
    let stats = eval::frame_stats(m, Some(&model), m.eval.frames_per_snr, &Workers::new(m.threads)?)?;
    report::check_bler(&stats)?;
    let prov = provenance(m, None, Some(w_id));
    if outputs.bler {
        report::write_csv(&m.path(manifest::BLER_CSV), &prov, &report::bler_rows(&stats))?;
        for s in &stats {
            writeln!(
                log,
                "{:>5.2} dB {:>10}: BLER {:.4e} ({} / {})",
                s.snr_db,
                s.scheme,
                s.bler(),
                s.block_errors,
                s.frames
            )?;
        }
    }
    if outputs.attempts {
        report::write_csv(&m.path(manifest::ATTEMPTS_CSV), &prov, &report::attempts_rows(&stats))?;
        for s in stats.iter().filter(|s| s.scheme != "bp") {
            writeln!(log, "{:>5.2} dB {:>10}: {:.4} attempts per frame", s.snr_db, s.scheme, s.mean_attempts())?;
        }
        for v in report::attempts_trend_violations(&stats) {
            writeln!(log, "warning: {v}")?;
        }
    }
    Ok(stats)
}

/// Coverage of the stored test set. Simulated-frame counts are not stored
/// in datasets and appear as 0.
pub fn coverage(m: &RunManifest, log: &mut dyn Write) -> Result<Vec<SnrReport>> {
    let (ds, ds_id) = load_dataset(m, manifest::TEST_DATASET, log)?;
    let reports = eval::coverage(m, &ds)?;
    let prov = provenance(m, Some(ds_id), None);
    report::write_csv(&m.path(manifest::COVERAGE_CSV), &prov, &report::coverage_rows(&reports))?;
    for r in &reports {
        writeln!(
            log,
            "{:>5.2} dB: {} failed, {} correctable, CS coverage {:.2}%",
            r.snr_db,
            r.failed,
            r.correctable,
            100.0 * r.coverage()
        )?;
    }
    Ok(reports)
}

/// Runs the oracle checks and fails if any of them fails.
pub fn selftest(log: &mut dyn Write) -> Result<Vec<Check>> {
    let checks = selftest::run_all()?;
    for c in &checks {
        writeln!(log, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        bail!("{failed} of {} self-test checks failed", checks.len());
    }
    Ok(checks)
}
