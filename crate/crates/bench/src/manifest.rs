//! Run manifest: everything a command needs to reproduce its output.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use polarbf::bp::DecoderConfig;
use polarbf::channel::{ChannelConfig, SnrMode};
use polarbf::crc::Crc;
use polarbf::flip::CsOrder;
use polarbf::metadata::{DEFAULT_CLIP, PLANES_PER_ITERATION};
use polarbf::neural::{ConvSpec, ModelConfig, TrainConfig};
use polarbf::polar::CodeConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrcKind {
    Crc6,
    None,
}

impl CrcKind {
    pub fn crc(self) -> Crc {
        match self {
            CrcKind::Crc6 => Crc::CRC6,
            CrcKind::None => Crc::NONE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub block_len: usize,
    /// Information length including the CRC bits.
    pub info_len: usize,
    pub design_param: f64,
    pub crc: CrcKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderSpec {
    pub iterations: usize,
    pub llr_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub mode: SnrMode,
    #[serde(default)]
    pub noiseless: bool,
}

/// What the per-SNR dataset quota counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuotaKind {
    /// CRC-failing frames.
    Failed,
    /// CRC-failing frames with at least one correctable position.
    Correctable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub train_per_snr: usize,
    pub test_per_snr: usize,
    pub quota: QuotaKind,
    /// Simulation cap per SNR; reaching it before the quota is an error.
    pub max_frames_per_snr: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub conv: Vec<ConvSpec>,
    /// The two hidden dense widths; the output width is K.
    pub hidden: [usize; 2],
    pub dropout_rate: f64,
    pub seed: u64,
    pub clip: f64,
}

impl ModelSpec {
    pub fn standard() -> Self {
        Self::from_config(&ModelConfig::standard([1, 1, 1], 1, 0))
    }

    pub fn desk() -> Self {
        Self::from_config(&ModelConfig::desk([1, 1, 1], 1, 0))
    }

    fn from_config(c: &ModelConfig) -> Self {
        ModelSpec {
            conv: c.conv.clone(),
            hidden: [c.dense[0], c.dense[1]],
            dropout_rate: c.dropout_rate,
            seed: c.seed,
            clip: c.clip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    /// Fresh frames per SNR for the BLER and attempt evaluations.
    pub frames_per_snr: u64,
    pub t_max: Vec<usize>,
    pub cs_order: CsOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code: CodeSpec,
    pub decoder: DecoderSpec,
    pub channel: ChannelSpec,
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub eval: EvalSpec,
    /// Worker threads for frame fan-out and training.
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl Default for RunManifest {
    fn default() -> Self {
        RunManifest {
            code: CodeSpec {
                block_len: 64,
                info_len: 32,
                design_param: 0.5,
                crc: CrcKind::Crc6,
            },
            decoder: DecoderSpec {
                iterations: 5,
                llr_max: 100.0,
            },
            channel: ChannelSpec {
                snr_db: vec![0.0, 1.0, 2.0, 3.0],
                mode: SnrMode::EbN0,
                noiseless: false,
            },
            seed: 2024,
            dataset: DatasetSpec {
                train_per_snr: 10_000,
                test_per_snr: 20_000,
                quota: QuotaKind::Failed,
                max_frames_per_snr: 10_000_000,
            },
            model: ModelSpec::standard(),
            train: TrainConfig::default(),
            eval: EvalSpec {
                frames_per_snr: 100_000,
                t_max: vec![6, 12],
                cs_order: CsOrder::default(),
            },
            threads: 1,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Output files inside `out_dir`.
pub const TRAIN_DATASET: &str = "train.pbfd";
pub const TEST_DATASET: &str = "test.pbfd";
pub const WEIGHTS: &str = "weights.bin";
pub const LOSS_CSV: &str = "loss.csv";
pub const COVERAGE_CSV: &str = "coverage.csv";
pub const ACCURACY_CSV: &str = "accuracy.csv";
pub const BLER_CSV: &str = "bler.csv";
pub const ATTEMPTS_CSV: &str = "attempts.csv";

/// Seed domains, so that train, test and evaluation frames never share
/// noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Train = 1,
    Test = 2,
    Eval = 3,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.code_config()?;
        self.decoder_config()?;
        self.train.validate()?;
        self.model_config()?.validate()?;
        if self.channel.snr_db.is_empty() {
            bail!("empty SNR list");
        }
        if self.channel.snr_db.iter().any(|s| !s.is_finite()) {
            bail!("non-finite SNR in {:?}", self.channel.snr_db);
        }
        if self.eval.t_max.is_empty() {
            bail!("empty T_max list");
        }
        if self.threads == 0 {
            bail!("threads must be >= 1");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding. Worker counts and the output
    /// directory do not change any result and are left out.
    pub fn hash(&self) -> [u8; 32] {
        let mut canonical = self.clone();
        canonical.threads = 1;
        canonical.train.threads = 1;
        canonical.out_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("manifest serializes");
        Sha256::digest(&bytes).into()
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash())
    }

    pub fn code_config(&self) -> Result<CodeConfig> {
        Ok(CodeConfig::construct_with_crc(
            self.code.block_len,
            self.code.info_len,
            self.code.design_param,
            self.code.crc.crc(),
        )?)
    }

    pub fn decoder_config(&self) -> Result<DecoderConfig> {
        Ok(DecoderConfig::new(self.decoder.iterations, self.decoder.llr_max)?)
    }

    pub fn channel_config(&self, snr_index: usize, purpose: Purpose) -> Result<ChannelConfig> {
        let code = self.code_config()?;
        let mut ch = ChannelConfig::new(self.channel.snr_db[snr_index], code.rate(), self.stream_key(snr_index, purpose))?;
        ch.mode = self.channel.mode;
        ch.noiseless = self.channel.noiseless;
        Ok(ch)
    }

    /// Key of the per-frame generator family for one (SNR, purpose) pair.
    pub fn stream_key(&self, snr_index: usize, purpose: Purpose) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update((purpose as u64).to_le_bytes());
        h.update((snr_index as u64).to_le_bytes());
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let code = self.code_config()?;
        let k = code.info_len();
        Ok(ModelConfig {
            input: [
                PLANES_PER_ITERATION * self.decoder.iterations,
                code.stages() + 1,
                code.block_len(),
            ],
            conv: self.model.conv.clone(),
            dense: vec![self.model.hidden[0], self.model.hidden[1], k],
            dropout_rate: self.model.dropout_rate,
            seed: self.model.seed,
            clip: if self.model.clip > 0.0 { self.model.clip } else { DEFAULT_CLIP },
        })
    }

    pub fn t_max_max(&self) -> usize {
        self.eval.t_max.iter().copied().max().unwrap_or(0)
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }
}

/// Parses "0,1,2.5" into SNR values.
pub fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow::anyhow!("bad list entry {s:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_manifest_is_valid_and_round_trips() {
        let m = RunManifest::default();
        m.validate().unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.hash(), m.hash());
        let mut other = m.clone();
        other.threads = 4;
        other.out_dir = PathBuf::from("elsewhere");
        assert_eq!(other.hash(), m.hash());
        other.seed += 1;
        assert_ne!(other.hash(), m.hash());
        assert_eq!(m.model_config().unwrap().input, [20, 7, 64]);
    }

    #[test]
    fn stream_keys_differ_by_purpose_and_snr() {
        let m = RunManifest::default();
        let a = m.stream_key(0, Purpose::Train);
        assert_ne!(a, m.stream_key(0, Purpose::Test));
        assert_ne!(a, m.stream_key(1, Purpose::Train));
        assert_eq!(a, m.stream_key(0, Purpose::Train));
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list::<f64>("0, 1,2.5").unwrap(), vec![0.0, 1.0, 2.5]);
        assert_eq!(parse_list::<usize>("6,12").unwrap(), vec![6, 12]);
        assert!(parse_list::<usize>("6,x").is_err());
    }
}
