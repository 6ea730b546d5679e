//! Labeled failed-frame datasets and their binary file format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! header   magic "PBFD" | version u32 | N u32 | K u32 | payload_len u32
//!          | T u32 | record count u64 | manifest SHA-256 [32]
//! record   ebn0_db f32 | frame_seed u64 | llrs f32 x N
//!          | payload bits | plain-BP u_hat bits | label bits | correctable u8
//! ```
//!
//! Bit fields are packed LSB first, `ceil(len / 8)` bytes each. Traces are
//! not stored; they are rebuilt from the LLRs by re-running plain BP.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use polarbf::bp::DecoderConfig;
use polarbf::channel::ChannelConfig;
use polarbf::flip::{build_critical_set, label_frame, CriticalSet};
use polarbf::polar::CodeConfig;
use serde::Serialize;

use crate::manifest::{Purpose, QuotaKind, RunManifest};
use crate::sim::{simulate, Workers};

pub const MAGIC: &[u8; 4] = b"PBFD";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 5 + 8 + 32;

/// Frames simulated per fan-out round while filling a quota.
const ROUND: u64 = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub ebn0_db: f32,
    /// Index of the frame in its (SNR, purpose) stream.
    pub frame_seed: u64,
    pub llrs: Vec<f32>,
    pub payload: Vec<u8>,
    pub u_hat: Vec<u8>,
    pub label: Vec<u8>,
    pub correctable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub block_len: usize,
    pub info_len: usize,
    pub payload_len: usize,
    pub iterations: usize,
    pub manifest_hash: [u8; 32],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DatasetRecord>,
}

fn packed_len(bits: usize) -> usize {
    bits.div_ceil(8)
}

fn pack(bits: &[u8], out: &mut Vec<u8>) {
    let mut bytes = vec![0u8; packed_len(bits.len())];
    for (i, &b) in bits.iter().enumerate() {
        bytes[i / 8] |= (b & 1) << (i % 8);
    }
    out.extend(bytes);
}

fn unpack(bytes: &[u8], len: usize) -> Vec<u8> {
    (0..len).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect()
}

impl DatasetHeader {
    pub fn record_len(&self) -> usize {
        4 + 8
            + 4 * self.block_len
            + packed_len(self.payload_len)
            + packed_len(self.block_len)
            + packed_len(self.info_len)
            + 1
    }
}

impl Dataset {
    pub fn new(manifest: &RunManifest) -> Result<Self> {
        let code = manifest.code_config()?;
        Ok(Dataset {
            header: DatasetHeader {
                block_len: code.block_len(),
                info_len: code.info_len(),
                payload_len: code.payload_len(),
                iterations: manifest.decoder.iterations,
                manifest_hash: manifest.hash(),
            },
            records: Vec::new(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(HEADER_LEN + self.records.len() * h.record_len());
        out.extend_from_slice(MAGIC);
        for v in [VERSION, h.block_len as u32, h.info_len as u32, h.payload_len as u32, h.iterations as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        out.extend_from_slice(&h.manifest_hash);
        for r in &self.records {
            out.extend_from_slice(&r.ebn0_db.to_le_bytes());
            out.extend_from_slice(&r.frame_seed.to_le_bytes());
            for v in &r.llrs {
                out.extend_from_slice(&v.to_le_bytes());
            }
            pack(&r.payload, &mut out);
            pack(&r.u_hat, &mut out);
            pack(&r.label, &mut out);
            out.push(u8::from(r.correctable));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        ensure!(bytes.len() >= HEADER_LEN, "dataset shorter than its header");
        ensure!(&bytes[..4] == MAGIC, "not a dataset file (bad magic)");
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
        let version = u32_at(4) as u32;
        ensure!(version == VERSION, "unsupported dataset version {version}");
        let header = DatasetHeader {
            block_len: u32_at(8),
            info_len: u32_at(12),
            payload_len: u32_at(16),
            iterations: u32_at(20),
            manifest_hash: bytes[32..64].try_into().expect("32 bytes"),
        };
        let count = u64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes")) as usize;
        let rec = header.record_len();
        ensure!(
            bytes.len() == HEADER_LEN + count * rec,
            "dataset holds {} bytes, header promises {count} records of {rec}",
            bytes.len()
        );
        let (n, k, p) = (header.block_len, header.info_len, header.payload_len);
        let records = bytes[HEADER_LEN..]
            .chunks_exact(rec)
            .map(|r| {
                let mut o = 0;
                let mut take = |len: usize| {
                    let s = &r[o..o + len];
                    o += len;
                    s
                };
                let ebn0_db = f32::from_le_bytes(take(4).try_into().expect("4 bytes"));
                let frame_seed = u64::from_le_bytes(take(8).try_into().expect("8 bytes"));
                let llrs = take(4 * n)
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect();
                let payload = unpack(take(packed_len(p)), p);
                let u_hat = unpack(take(packed_len(n)), n);
                let label = unpack(take(packed_len(k)), k);
                let correctable = take(1)[0] != 0;
                if correctable != label.contains(&1) {
                    bail!("record {frame_seed}: correctable flag disagrees with its label");
                }
                Ok(DatasetRecord {
                    ebn0_db,
                    frame_seed,
                    llrs,
                    payload,
                    u_hat,
                    label,
                    correctable,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { header, records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_bytes(&bytes).with_context(|| format!("parsing {}", path.display()))
    }

    /// Checks that the file was produced for `code` and `iterations`.
    pub fn check_compatible(&self, code: &CodeConfig, iterations: usize) -> Result<()> {
        let h = &self.header;
        ensure!(
            h.block_len == code.block_len() && h.info_len == code.info_len() && h.payload_len == code.payload_len(),
            "dataset is for ({}, {}) with {} payload bits, manifest code is ({}, {})",
            h.block_len,
            h.info_len,
            h.payload_len,
            code.block_len(),
            code.info_len()
        );
        ensure!(
            h.iterations == iterations,
            "dataset was labeled with T = {}, manifest has T = {iterations}",
            h.iterations
        );
        Ok(())
    }

    /// Records at one SNR, in file order.
    pub fn at_snr(&self, snr_db: f64) -> impl Iterator<Item = &DatasetRecord> {
        let key = snr_db as f32;
        self.records.iter().filter(move |r| r.ebn0_db == key)
    }
}

/// Per-SNR summary of a generation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrReport {
    pub snr_db: f64,
    pub frames_simulated: u64,
    pub failed: usize,
    pub correctable: usize,
    /// Correctable frames with a label-1 position inside the critical set.
    pub covered: usize,
    pub quota_met: bool,
}

impl SnrReport {
    pub fn correctable_fraction(&self) -> f64 {
        ratio(self.correctable, self.failed)
    }

    pub fn coverage(&self) -> f64 {
        ratio(self.covered, self.correctable)
    }
}

pub fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Simulates frame `index` and labels it if plain BP fails CRC.
pub fn label_one(
    code: &CodeConfig,
    dec: &DecoderConfig,
    ch: &ChannelConfig,
    index: u64,
) -> Result<Option<DatasetRecord>> {
    let frame = simulate(code, ch, index, dec.llr_max)?;
    let Some((label, u_hat)) = label_frame(&frame.llrs_f64(), code, dec)? else {
        return Ok(None);
    };
    let correctable = label.is_correctable();
    Ok(Some(DatasetRecord {
        ebn0_db: ch.ebn0_db as f32,
        frame_seed: index,
        llrs: frame.llrs,
        payload: frame.payload,
        u_hat,
        label: label.bits().to_vec(),
        correctable,
    }))
}

/// Whether a correctable record has a label-1 position inside `cs`.
pub fn covered_by(record: &DatasetRecord, code: &CodeConfig, cs: &CriticalSet) -> bool {
    record
        .label
        .iter()
        .zip(code.info_set())
        .any(|(&b, &pos)| b == 1 && cs.contains(pos))
}

/// Summarizes the records of one SNR.
pub fn summarize(records: &[&DatasetRecord], code: &CodeConfig, snr_db: f64, frames: u64, quota_met: bool) -> SnrReport {
    let cs = build_critical_set(code);
    SnrReport {
        snr_db,
        frames_simulated: frames,
        failed: records.len(),
        correctable: records.iter().filter(|r| r.correctable).count(),
        covered: records
            .iter()
            .filter(|r| r.correctable && covered_by(r, code, &cs))
            .count(),
        quota_met,
    }
}

/// Fills the per-SNR quota of `purpose` frames. The frame sequence is fixed
/// by the manifest, and the cut at the quota happens in frame order, so the
/// result does not depend on the worker count.
pub fn generate(manifest: &RunManifest, purpose: Purpose, quota: usize, workers: &Workers) -> Result<(Dataset, Vec<SnrReport>)> {
    let code = manifest.code_config()?;
    let dec = manifest.decoder_config()?;
    let mut dataset = Dataset::new(manifest)?;
    let mut reports = Vec::new();
    for (si, &snr) in manifest.channel.snr_db.iter().enumerate() {
        let ch = manifest.channel_config(si, purpose)?;
        let mut kept: Vec<DatasetRecord> = Vec::new();
        let mut counted = 0usize;
        let mut frames = 0u64;
        // A noiseless channel never fails: nothing to collect.
        let cap = if ch.noiseless { 0 } else { manifest.dataset.max_frames_per_snr };
        'outer: while counted < quota && frames < cap {
            let end = (frames + ROUND).min(cap);
            let batch = workers.map(frames..end, |i| label_one(&code, &dec, &ch, i))?;
            for (offset, rec) in batch.into_iter().enumerate() {
                if let Some(r) = rec {
                    let counts = match manifest.dataset.quota {
                        QuotaKind::Failed => true,
                        QuotaKind::Correctable => r.correctable,
                    };
                    kept.push(r);
                    if counts {
                        counted += 1;
                        if counted == quota {
                            frames += offset as u64 + 1;
                            break 'outer;
                        }
                    }
                }
            }
            frames = end;
        }
        let met = counted >= quota;
        if !met && !ch.noiseless {
            bail!(
                "SNR {snr} dB: only {counted} of {quota} frames after {frames} simulated; raise max_frames_per_snr"
            );
        }
        let refs: Vec<&DatasetRecord> = kept.iter().collect();
        reports.push(summarize(&refs, &code, snr, frames, met));
        dataset.records.extend(kept);
    }
    Ok((dataset, reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(n: usize, k: usize, p: usize, label_one: Option<usize>) -> DatasetRecord {
        let mut label = vec![0u8; k];
        if let Some(i) = label_one {
            label[i] = 1;
        }
        DatasetRecord {
            ebn0_db: 1.5,
            frame_seed: 42,
            llrs: (0..n).map(|i| i as f32 * -0.25).collect(),
            payload: (0..p).map(|i| (i % 3 == 0) as u8).collect(),
            u_hat: (0..n).map(|i| (i % 5 == 1) as u8).collect(),
            correctable: label_one.is_some(),
            label,
        }
    }

    fn header() -> DatasetHeader {
        DatasetHeader {
            block_len: 64,
            info_len: 32,
            payload_len: 26,
            iterations: 5,
            manifest_hash: [7; 32],
        }
    }

    #[test]
    fn bytes_round_trip() {
        let ds = Dataset {
            header: header(),
            records: vec![record(64, 32, 26, Some(3)), record(64, 32, 26, None)],
        };
        let bytes = ds.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 2 * (12 + 256 + 4 + 8 + 4 + 1));
        assert_eq!(Dataset::from_bytes(&bytes).unwrap(), ds);
    }

    #[test]
    fn rejects_corruption() {
        let ds = Dataset {
            header: header(),
            records: vec![record(64, 32, 26, Some(0))],
        };
        let mut bytes = ds.to_bytes();
        assert!(Dataset::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let last = bytes.len() - 1;
        bytes[last] = 0;
        assert!(Dataset::from_bytes(&bytes).is_err());
        bytes[0] = b'X';
        assert!(Dataset::from_bytes(&bytes).is_err());
    }

    #[test]
    fn bit_packing() {
        let mut out = Vec::new();
        pack(&[1, 0, 0, 0, 0, 0, 0, 0, 1, 1], &mut out);
        assert_eq!(out, vec![0b0000_0001, 0b0000_0011]);
        assert_eq!(unpack(&out, 10), vec![1, 0, 0, 0, 0, 0, 0, 0, 1, 1]);
    }
}
