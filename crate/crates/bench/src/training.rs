//! Training on stored frames, rebuilding each input image on demand.

use anyhow::{ensure, Result};
use polarbf::bp::{run_bp, DecoderConfig};
use polarbf::metadata::build_input_tensor;
use polarbf::neural::{split_indices, train, EpochLog, Model, Sample, SampleSource, TrainReport};
use polarbf::polar::CodeConfig;

use crate::dataset::{Dataset, DatasetRecord};
use crate::manifest::RunManifest;
use crate::sim::widen;

/// Correctable records viewed as training samples. Each access re-runs
/// plain BP on the stored LLRs, which is cheap next to a CNN step and keeps
/// memory at a few hundred bytes per frame.
pub struct TraceSamples<'a> {
    records: Vec<&'a DatasetRecord>,
    code: &'a CodeConfig,
    dec: &'a DecoderConfig,
    clip: f64,
}

impl<'a> TraceSamples<'a> {
    pub fn new(dataset: &'a Dataset, code: &'a CodeConfig, dec: &'a DecoderConfig, clip: f64) -> Self {
        TraceSamples {
            records: dataset.records.iter().filter(|r| r.correctable).collect(),
            code,
            dec,
            clip,
        }
    }
}

impl SampleSource for TraceSamples<'_> {
    fn len(&self) -> usize {
        self.records.len()
    }

    fn sample(&self, index: usize) -> polarbf::Result<Sample> {
        let r = self.records.get(index).ok_or_else(|| {
            polarbf::Error::InvalidParameter(format!("sample {index} out of range"))
        })?;
        let run = run_bp(&widen(&r.llrs), self.code, self.dec, None)?;
        if run.u_hat != r.u_hat {
            return Err(polarbf::Error::InvalidParameter(format!(
                "frame {} no longer decodes to its stored estimate",
                r.frame_seed
            )));
        }
        let input = build_input_tensor(&run.trace, self.clip)?;
        Ok(Sample {
            input: input.data().to_vec(),
            label: r.label.iter().map(|&b| f32::from(b)).collect(),
        })
    }
}

/// Trains the manifest's model on the correctable frames of `dataset`.
pub fn train_on(
    manifest: &RunManifest,
    dataset: &Dataset,
    progress: impl FnMut(&EpochLog),
) -> Result<TrainReport<f32>> {
    let code = manifest.code_config()?;
    let dec = manifest.decoder_config()?;
    dataset.check_compatible(&code, dec.iterations)?;
    let model_cfg = manifest.model_config()?;
    let source = TraceSamples::new(dataset, &code, &dec, model_cfg.clip);
    ensure!(source.len() >= 2, "dataset has {} correctable frames; need at least 2", source.len());
    let mut cfg = manifest.train.clone();
    cfg.threads = manifest.threads;
    Ok(train(Model::<f32>::new(model_cfg)?, &source, &cfg, progress)?)
}

/// Correctable frames per manifest SNR that land in the training part of
/// the validation split, i.e. the frames gradient steps actually see.
pub fn training_counts(manifest: &RunManifest, dataset: &Dataset) -> Vec<usize> {
    let correctable: Vec<&DatasetRecord> = dataset.records.iter().filter(|r| r.correctable).collect();
    let (_, tr) = split_indices(correctable.len(), &manifest.train);
    manifest
        .channel
        .snr_db
        .iter()
        .map(|&snr| tr.iter().filter(|&&i| correctable[i].ebn0_db == snr as f32).count())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_counts_cover_the_training_split() {
        let mut m = RunManifest::default();
        m.channel.snr_db = vec![0.0, 1.5];
        let mut ds = Dataset::new(&m).unwrap();
        for i in 0..50u64 {
            ds.records.push(DatasetRecord {
                ebn0_db: if i % 3 == 0 { 1.5 } else { 0.0 },
                frame_seed: i,
                llrs: vec![0.0; 64],
                payload: vec![0; 26],
                u_hat: vec![0; 64],
                label: vec![0; 32],
                correctable: i % 5 != 0,
            });
        }
        let counts = training_counts(&m, &ds);
        assert_eq!(counts.iter().sum::<usize>(), 40 - 8);
        assert!(counts.iter().all(|&c| c > 0));
    }
}
