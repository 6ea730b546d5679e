//! Weight files.
//!
//! Layout: one line of JSON (the manifest) terminated by `\n`, followed by
//! every parameter tensor as little-endian f32, row-major, in declaration
//! order (conv1 weight, conv1 bias, ..., dense3 weight, dense3 bias). The
//! manifest records the format name and version, the full model
//! configuration, the initialization seed, each tensor's name and shape and
//! the payload size in bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Model, ModelConfig, ModelParams};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const WEIGHT_FORMAT: &str = "polarbf-weights";
pub const WEIGHT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightManifest {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub model: ModelConfig,
    pub tensors: Vec<TensorEntry>,
    pub payload_bytes: usize,
}

fn tensor_names(params: &ModelParams<f32>) -> Vec<String> {
    let mut names = Vec::new();
    for i in 0..params.conv.len() {
        names.push(format!("conv{}.weight", i + 1));
        names.push(format!("conv{}.bias", i + 1));
    }
    for i in 0..params.dense.len() {
        names.push(format!("dense{}.weight", i + 1));
        names.push(format!("dense{}.bias", i + 1));
    }
    names
}

/// Serializes a model to bytes.
pub fn weights_to_bytes(model: &Model<f32>) -> Result<Vec<u8>> {
    let tensors = model.params.tensors();
    let entries = tensor_names(&model.params)
        .into_iter()
        .zip(&tensors)
        .map(|(name, t)| TensorEntry {
            name,
            shape: t.shape().to_vec(),
        })
        .collect();
    let payload_bytes = 4 * tensors.iter().map(|t| t.len()).sum::<usize>();
    let manifest = WeightManifest {
        format: WEIGHT_FORMAT.into(),
        version: WEIGHT_VERSION,
        seed: model.config.seed,
        model: model.config.clone(),
        tensors: entries,
        payload_bytes,
    };
    let mut out = serde_json::to_vec(&manifest).map_err(|e| Error::WeightFormat(e.to_string()))?;
    out.push(b'\n');
    out.reserve(payload_bytes);
    for t in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses bytes written by [`weights_to_bytes`].
pub fn weights_from_bytes(bytes: &[u8]) -> Result<Model<f32>> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::WeightFormat("missing manifest line".into()))?;
    let manifest: WeightManifest =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::WeightFormat(e.to_string()))?;
    if manifest.format != WEIGHT_FORMAT || manifest.version != WEIGHT_VERSION {
        return Err(Error::WeightFormat(format!(
            "unsupported format {} v{}",
            manifest.format, manifest.version
        )));
    }
    let payload = &bytes[nl + 1..];
    if payload.len() != manifest.payload_bytes {
        return Err(Error::WeightFormat(format!(
            "payload is {} bytes, manifest says {}",
            payload.len(),
            manifest.payload_bytes
        )));
    }
    let mut params = ModelParams::<f32>::zeros(&manifest.model);
    let mut offset = 0;
    {
        let tensors = params.tensors_mut();
        if tensors.len() != manifest.tensors.len() {
            return Err(Error::WeightFormat("tensor count mismatch".into()));
        }
        for (t, entry) in tensors.into_iter().zip(&manifest.tensors) {
            if t.shape() != entry.shape.as_slice() {
                return Err(Error::WeightFormat(format!(
                    "{} has shape {:?}, configuration implies {:?}",
                    entry.name,
                    entry.shape,
                    t.shape()
                )));
            }
            let n = t.len() * 4;
            let chunk = payload
                .get(offset..offset + n)
                .ok_or_else(|| Error::WeightFormat("truncated payload".into()))?;
            let data = chunk
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            *t = Tensor::from_vec(entry.shape.clone(), data)?;
            offset += n;
        }
    }
    if !params.all_finite() {
        return Err(Error::WeightFormat("non-finite weights".into()));
    }
    Model::from_params(manifest.model, params)
}

pub fn save_weights(model: &Model<f32>, path: &Path) -> Result<()> {
    let bytes = weights_to_bytes(model)?;
    fs::write(path, bytes).map_err(|e| Error::WeightFormat(format!("{}: {e}", path.display())))
}

pub fn load_weights(path: &Path) -> Result<Model<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::WeightFormat(format!("{}: {e}", path.display())))?;
    weights_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::model::ConvSpec;

    fn small() -> Model<f32> {
        Model::new(ModelConfig {
            input: [4, 3, 8],
            conv: vec![ConvSpec::new(2, 3, 3); 3],
            dense: vec![6, 5, 4],
            dropout_rate: 0.5,
            seed: 5,
            clip: 30.0,
        })
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = small();
        let bytes = weights_to_bytes(&m).unwrap();
        let back = weights_from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        let x: Vec<f32> = (0..96).map(|i| (i as f32 * 0.1).cos()).collect();
        assert_eq!(m.predict_slice(&x).unwrap(), back.predict_slice(&x).unwrap());
    }

    #[test]
    fn manifest_is_json_line() {
        let bytes = weights_to_bytes(&small()).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        let v: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
        assert_eq!(v["format"], WEIGHT_FORMAT);
        assert_eq!(v["tensors"][0]["name"], "conv1.weight");
        assert_eq!(v["tensors"][0]["shape"], serde_json::json!([2, 4, 3, 3]));
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = weights_to_bytes(&small()).unwrap();
        assert!(weights_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(weights_from_bytes(b"{}").is_err());
        let mut bad = bytes.clone();
        let nan = f32::NAN.to_le_bytes();
        let n = bad.len();
        bad[n - 4..].copy_from_slice(&nan);
        assert!(weights_from_bytes(&bad).is_err());
    }
}
