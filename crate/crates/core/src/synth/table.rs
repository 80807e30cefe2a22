use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ContextState, SyntheticSource};
use crate::error::{Error, Result};
use crate::logprob::log_normalize;
use crate::model::TransducerModel;
use crate::types::{FrameWindow, Token, Vocabulary, WindowLogits};

const MAX_TABLE_FLOATS: usize = 1 << 28;
pub const MAX_FEATURE_KEYS: usize = 256;

/// Logit table under construction, indexed by (context, feature key).
#[derive(Debug, Clone)]
pub struct TableSpec {
    vocab: Vocabulary,
    context_len: usize,
    num_keys: usize,
    rows: Vec<Option<Vec<f32>>>,
}

impl TableSpec {
    pub fn new(vocab: Vocabulary, context_len: usize, num_keys: usize) -> Result<Self> {
        if num_keys == 0 || num_keys > MAX_FEATURE_KEYS {
            return Err(Error::InvalidConfig(format!(
                "feature key count {num_keys} outside 1..={MAX_FEATURE_KEYS}"
            )));
        }
        let contexts = num_contexts(vocab.size(), context_len)?;
        contexts
            .checked_mul(num_keys * vocab.size())
            .filter(|&n| n <= MAX_TABLE_FLOATS)
            .ok_or_else(|| Error::InvalidConfig("logit table too large".into()))?;
        Ok(Self {
            vocab,
            context_len,
            num_keys,
            rows: vec![None; contexts * num_keys],
        })
    }

    /// Fills a table from dense row-major data of shape `[V^k, num_keys, V]`.
    pub fn from_dense(
        vocab: Vocabulary,
        context_len: usize,
        num_keys: usize,
        data: &[f32],
    ) -> Result<Self> {
        let mut spec = Self::new(vocab, context_len, num_keys)?;
        let v = vocab.size();
        if data.len() != spec.rows.len() * v {
            return Err(Error::Format(format!(
                "table needs {} floats, got {}",
                spec.rows.len() * v,
                data.len()
            )));
        }
        for (slot, chunk) in spec.rows.iter_mut().zip(data.chunks_exact(v)) {
            *slot = Some(chunk.to_vec());
        }
        Ok(spec)
    }

    pub fn vocab(&self) -> Vocabulary {
        self.vocab
    }

    /// Sets raw logits for the context reached after `history` (most recent
    /// last; shorter histories are padded with the begin marker).
    pub fn set_row(&mut self, history: &[Token], key: usize, logits: Vec<f32>) -> Result<()> {
        if logits.len() != self.vocab.size() {
            return Err(Error::InvalidLogits(format!(
                "row has {} entries, vocabulary has {}",
                logits.len(),
                self.vocab.size()
            )));
        }
        if key >= self.num_keys {
            return Err(Error::InvalidConfig(format!(
                "feature key {key} out of range"
            )));
        }
        if history
            .iter()
            .any(|&t| self.vocab.is_blank(t) || t as usize >= self.vocab.size())
        {
            return Err(Error::InvalidConfig(
                "history must hold non-blank tokens".into(),
            ));
        }
        let ctx = ContextState::from_history(&self.vocab, self.context_len, history);
        let idx = ctx.index(self.vocab.size()) * self.num_keys + key;
        self.rows[idx] = Some(logits);
        Ok(())
    }
}

fn num_contexts(vocab_size: usize, context_len: usize) -> Result<usize> {
    u32::try_from(context_len)
        .ok()
        .and_then(|k| vocab_size.checked_pow(k))
        .ok_or_else(|| Error::InvalidConfig("context space overflows".into()))
}

/// Transducer whose joiner is an explicit lookup table.
#[derive(Debug, Clone)]
pub struct TableModel {
    vocab: Vocabulary,
    context_len: usize,
    num_keys: usize,
    raw: Vec<f32>,
    log_probs: Vec<f64>,
}

pub fn build_table_model(spec: TableSpec) -> Result<TableModel> {
    let v = spec.vocab.size();
    let mut raw = Vec::with_capacity(spec.rows.len() * v);
    let mut log_probs = Vec::with_capacity(spec.rows.len() * v);
    for (idx, row) in spec.rows.iter().enumerate() {
        let Some(row) = row else {
            let ctx_idx = idx / spec.num_keys;
            return Err(Error::IncompleteTable {
                context: decode_context(ctx_idx, v, spec.context_len),
                key: idx % spec.num_keys,
            });
        };
        let widened: Vec<f64> = row.iter().map(|&x| f64::from(x)).collect();
        log_probs.extend(log_normalize(&widened)?);
        raw.extend_from_slice(row);
    }
    Ok(TableModel {
        vocab: spec.vocab,
        context_len: spec.context_len,
        num_keys: spec.num_keys,
        raw,
        log_probs,
    })
}

fn decode_context(mut idx: usize, v: usize, k: usize) -> Vec<Token> {
    let mut out = vec![0; k];
    for slot in out.iter_mut().rev() {
        *slot = (idx % v) as Token;
        idx /= v;
    }
    out
}

/// Table filled with Gaussian logits (std `scale`) plus `blank_bias` on blank.
pub fn random_table_model(
    vocab: Vocabulary,
    context_len: usize,
    num_keys: usize,
    seed: u64,
    blank_bias: f32,
    scale: f32,
) -> Result<TableModel> {
    let spec = TableSpec::new(vocab, context_len, num_keys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = vocab.size();
    let data: Vec<f32> = (0..spec.rows.len() * v)
        .map(|i| {
            let g: f32 = rng.sample(StandardNormal);
            let bias = if i % v == vocab.blank() as usize {
                blank_bias
            } else {
                0.0
            };
            g * scale + bias
        })
        .collect();
    build_table_model(TableSpec::from_dense(vocab, context_len, num_keys, &data)?)
}

impl TableModel {
    pub fn context_len(&self) -> usize {
        self.context_len
    }

    pub fn num_keys(&self) -> usize {
        self.num_keys
    }

    /// Raw logits, row-major `[V^k, num_keys, V]`.
    pub fn raw_logits(&self) -> &[f32] {
        &self.raw
    }

    pub fn feature_key(&self, row: &[f32]) -> usize {
        let x = row.first().copied().unwrap_or(0.0).round();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(self.num_keys - 1)
        }
    }

    /// Normalized log distribution for one (state, key) cell.
    pub fn cell(&self, state: &ContextState, key: usize) -> &[f64] {
        let v = self.vocab.size();
        let idx = state.index(v) * self.num_keys + key;
        &self.log_probs[idx * v..(idx + 1) * v]
    }
}

impl TransducerModel for TableModel {
    type State = ContextState;

    fn vocab(&self) -> Vocabulary {
        self.vocab
    }

    fn initial_state(&self) -> ContextState {
        ContextState::initial(&self.vocab, self.context_len)
    }

    fn advance_state(&self, state: &ContextState, token: Token) -> Result<ContextState> {
        check_token(&self.vocab, token)?;
        Ok(state.pushed(token))
    }

    fn joint(&self, window: FrameWindow<'_>, state: &ContextState) -> Result<WindowLogits> {
        let mut out = Vec::with_capacity(window.len() * self.vocab.size());
        for row in window.rows() {
            out.extend_from_slice(self.cell(state, self.feature_key(row)));
        }
        WindowLogits::new(window.start(), self.vocab.size(), out)
    }
}

impl SyntheticSource for TableModel {
    fn feature_dim(&self) -> usize {
        1
    }

    fn sample_frames(&self, rng: &mut dyn RngCore, num_frames: usize) -> Vec<f32> {
        (0..num_frames)
            .map(|_| rng.random_range(0..self.num_keys) as f32)
            .collect()
    }
}

pub(crate) fn check_token(vocab: &Vocabulary, token: Token) -> Result<()> {
    if vocab.is_blank(token) || token as usize >= vocab.size() {
        return Err(Error::InvalidConfig(format!(
            "cannot advance decoder with token {token}"
        )));
    }
    Ok(())
}
