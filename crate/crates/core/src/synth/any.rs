use std::fs;
use std::path::Path;

use rand::RngCore;

use super::format::{
    read_tensor, write_tensor, ModelManifest, ModelSource, SeedBlock, TableBlock, Tensor,
    MANIFEST_FORMAT_VERSION,
};
use super::{
    build_table_model, ContextState, SeededModel, SeededParams, SyntheticSource, TableModel,
    TableSpec,
};
use crate::error::{Error, Result};
use crate::model::TransducerModel;
use crate::types::{FrameWindow, Token, Vocabulary, WindowLogits};

/// Either synthetic model kind, as loaded from a manifest.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Table(TableModel),
    Seeded(SeededModel),
}

impl AnyModel {
    /// Loads a manifest; tensor paths resolve against the manifest's directory.
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let text = fs::read_to_string(manifest_path)?;
        let manifest = ModelManifest::from_json(&text)?;
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_manifest(&manifest, base)
    }

    pub fn from_manifest(manifest: &ModelManifest, base_dir: &Path) -> Result<Self> {
        let vocab = match manifest.blank_id {
            Some(blank) => Vocabulary::new(manifest.vocab_size, blank)?,
            None => Vocabulary::with_trailing_blank(manifest.vocab_size)?,
        };
        match &manifest.source {
            ModelSource::Seed(block) => Ok(Self::Seeded(SeededModel::new(SeededParams {
                seed: block.seed,
                vocab,
                context_len: manifest.context_len,
                blank_bias: block.blank_bias,
                smoothness: block.smoothness,
                feature_dim: block.feature_dim,
            })?)),
            ModelSource::Table(block) => {
                let data = match (&block.tensor, &block.logits) {
                    (Some(file), None) => {
                        let tensor = read_tensor(&base_dir.join(file))?;
                        let contexts = vocab.size().pow(manifest.context_len as u32);
                        let want = [contexts, block.num_keys, vocab.size()];
                        if tensor.dims != want {
                            return Err(Error::Format(format!(
                                "table tensor has dims {:?}, expected {want:?}",
                                tensor.dims
                            )));
                        }
                        tensor.data
                    }
                    (None, Some(rows)) => flatten_inline(rows, block.num_keys, vocab.size())?,
                    _ => {
                        return Err(Error::Format(
                            "table block needs exactly one of `tensor` or `logits`".into(),
                        ))
                    }
                };
                let spec =
                    TableSpec::from_dense(vocab, manifest.context_len, block.num_keys, &data)?;
                Ok(Self::Table(build_table_model(spec)?))
            }
        }
    }

    /// Writes `<stem>.json`, plus `<stem>.wndt` for table models.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let vocab = self.vocab();
        let (context_len, source) = match self {
            Self::Seeded(m) => {
                let p = m.params();
                (
                    p.context_len,
                    ModelSource::Seed(SeedBlock {
                        seed: p.seed,
                        blank_bias: p.blank_bias,
                        smoothness: p.smoothness,
                        feature_dim: p.feature_dim,
                    }),
                )
            }
            Self::Table(m) => {
                let tensor_name = format!("{stem}.wndt");
                let contexts = vocab.size().pow(m.context_len() as u32);
                let tensor = Tensor::new(
                    vec![contexts, m.num_keys(), vocab.size()],
                    m.raw_logits().to_vec(),
                )?;
                write_tensor(&dir.join(&tensor_name), &tensor)?;
                (
                    m.context_len(),
                    ModelSource::Table(TableBlock {
                        num_keys: m.num_keys(),
                        tensor: Some(tensor_name),
                        logits: None,
                    }),
                )
            }
        };
        let manifest = ModelManifest {
            format_version: MANIFEST_FORMAT_VERSION.to_string(),
            vocab_size: vocab.size(),
            blank_id: Some(vocab.blank()),
            context_len,
            source,
        };
        fs::write(dir.join(format!("{stem}.json")), manifest.to_json()?)?;
        Ok(())
    }
}

fn flatten_inline(rows: &[Vec<Vec<f32>>], num_keys: usize, v: usize) -> Result<Vec<f32>> {
    let mut out = Vec::new();
    for ctx in rows {
        if ctx.len() != num_keys {
            return Err(Error::Format(format!(
                "inline table context has {} keys, expected {num_keys}",
                ctx.len()
            )));
        }
        for row in ctx {
            if row.len() != v {
                return Err(Error::Format(format!(
                    "inline table row has {} entries, expected {v}",
                    row.len()
                )));
            }
            out.extend_from_slice(row);
        }
    }
    Ok(out)
}

impl TransducerModel for AnyModel {
    type State = ContextState;

    fn vocab(&self) -> Vocabulary {
        match self {
            Self::Table(m) => m.vocab(),
            Self::Seeded(m) => m.vocab(),
        }
    }

    fn initial_state(&self) -> ContextState {
        match self {
            Self::Table(m) => m.initial_state(),
            Self::Seeded(m) => m.initial_state(),
        }
    }

    fn advance_state(&self, state: &ContextState, token: Token) -> Result<ContextState> {
        match self {
            Self::Table(m) => m.advance_state(state, token),
            Self::Seeded(m) => m.advance_state(state, token),
        }
    }

    fn joint(&self, window: FrameWindow<'_>, state: &ContextState) -> Result<WindowLogits> {
        match self {
            Self::Table(m) => m.joint(window, state),
            Self::Seeded(m) => m.joint(window, state),
        }
    }
}

impl SyntheticSource for AnyModel {
    fn feature_dim(&self) -> usize {
        match self {
            Self::Table(m) => m.feature_dim(),
            Self::Seeded(m) => m.feature_dim(),
        }
    }

    fn sample_frames(&self, rng: &mut dyn RngCore, num_frames: usize) -> Vec<f32> {
        match self {
            Self::Table(m) => m.sample_frames(rng, num_frames),
            Self::Seeded(m) => m.sample_frames(rng, num_frames),
        }
    }
}
