//! On-disk model manifests (JSON), tensor files (`WNDT` binary) and corpus
//! files (JSON).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EncoderOutput, Token};

pub const TENSOR_MAGIC: &[u8; 4] = b"WNDT";
pub const MANIFEST_FORMAT_VERSION: &str = "1.0";

/// Dense float32 tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::Format(format!(
                "dims {dims:?} need {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * (self.dims.len() + self.data.len()));
        out.extend_from_slice(TENSOR_MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut bytes, &mut magic)?;
        if &magic != TENSOR_MAGIC {
            return Err(Error::Format("bad tensor magic".into()));
        }
        let rank = read_u32(&mut bytes)? as usize;
        let dims = (0..rank)
            .map(|_| read_u32(&mut bytes).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format("tensor dims overflow".into()))?;
        if bytes.len() != count * 4 {
            return Err(Error::Format(format!(
                "tensor payload is {} bytes, dims {dims:?} need {}",
                bytes.len(),
                count * 4
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { dims, data })
    }
}

fn read_exact(src: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    src.read_exact(buf)
        .map_err(|_| Error::Format("truncated tensor header".into()))
}

fn read_u32(src: &mut &[u8]) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(src, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&tensor.to_bytes())?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    Tensor::from_bytes(&fs::read(path)?)
}

/// JSON description of a synthetic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: String,
    pub vocab_size: usize,
    /// Defaults to the last index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blank_id: Option<Token>,
    pub context_len: usize,
    #[serde(flatten)]
    pub source: ModelSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    Seed(SeedBlock),
    Table(TableBlock),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedBlock {
    pub seed: u64,
    #[serde(default = "default_blank_bias")]
    pub blank_bias: f64,
    #[serde(default = "default_smoothness")]
    pub smoothness: f64,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
}

fn default_blank_bias() -> f64 {
    3.0
}

fn default_smoothness() -> f64 {
    0.5
}

fn default_feature_dim() -> usize {
    super::seeded::DEFAULT_FEATURE_DIM
}

/// Logit table, either in a tensor file of shape `[V^k, num_keys, V]`
/// (path relative to the manifest) or inline as nested rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableBlock {
    pub num_keys: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<Vec<Vec<Vec<f32>>>>,
}

impl ModelManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let manifest: Self = serde_json::from_str(text)?;
        check_major(&manifest.format_version)?;
        Ok(manifest)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

/// Accepts any `1.x` version string.
pub fn check_major(version: &str) -> Result<()> {
    let major = version.split('.').next().unwrap_or_default();
    if major != "1" {
        return Err(Error::Format(format!(
            "unsupported format version {version}"
        )));
    }
    Ok(())
}

/// A list of utterances with optional reference transcripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFile {
    pub format_version: String,
    pub utterances: Vec<CorpusEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub utterance_id: String,
    /// One row of features per frame.
    pub frames: Vec<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<Token>>,
}

impl CorpusEntry {
    pub fn encoder_output(&self, feature_dim: usize) -> Result<EncoderOutput> {
        if self.frames.is_empty() {
            return EncoderOutput::empty(self.utterance_id.clone(), feature_dim);
        }
        EncoderOutput::from_rows(self.utterance_id.clone(), &self.frames)
    }
}

impl CorpusFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let corpus: Self = serde_json::from_str(text)?;
        check_major(&corpus.format_version)?;
        Ok(corpus)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_layout_is_little_endian() {
        let t = Tensor::new(vec![1, 2], vec![1.0, -2.5]).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(&bytes[..4], b"WNDT");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &(-2.5f32).to_le_bytes());
        assert_eq!(bytes.len(), 4 + 4 + 8 + 8);
        assert_eq!(Tensor::from_bytes(&bytes).unwrap(), t);
    }

    #[test]
    fn tensor_rejects_garbage() {
        assert!(Tensor::from_bytes(b"WND").is_err());
        assert!(Tensor::from_bytes(b"XXXX\0\0\0\0").is_err());
        let mut bytes = Tensor::new(vec![2], vec![0.0, 1.0]).unwrap().to_bytes();
        bytes.pop();
        assert!(Tensor::from_bytes(&bytes).is_err());
        assert!(Tensor::new(vec![3], vec![0.0]).is_err());
    }

    #[test]
    fn manifest_seed_block() {
        let m = ModelManifest::from_json(
            r#"{"format_version":"1.0","vocab_size":8,"context_len":1,"seed":{"seed":7}}"#,
        )
        .unwrap();
        match m.source {
            ModelSource::Seed(ref s) => {
                assert_eq!(s.seed, 7);
                assert_eq!(s.blank_bias, 3.0);
            }
            _ => panic!("expected seed block"),
        }
        assert_eq!(ModelManifest::from_json(&m.to_json().unwrap()).unwrap(), m);
    }

    #[test]
    fn manifest_rejects_unknown_major() {
        let err = ModelManifest::from_json(
            r#"{"format_version":"2.0","vocab_size":8,"context_len":1,"seed":{"seed":7}}"#,
        );
        assert!(matches!(err, Err(Error::Format(_))));
    }
}
