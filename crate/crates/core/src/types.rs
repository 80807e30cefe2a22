//! Domain values passed between models and decoders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logprob::logsumexp;

/// Token index into the vocabulary. The blank symbol is a token too.
pub type Token = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vocabulary {
    size: usize,
    blank_id: Token,
}

impl Vocabulary {
    pub fn new(size: usize, blank_id: Token) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidVocabulary(format!(
                "size {size} leaves no room for a label besides blank"
            )));
        }
        if blank_id as usize >= size {
            return Err(Error::InvalidVocabulary(format!(
                "blank id {blank_id} outside vocabulary of size {size}"
            )));
        }
        Ok(Self { size, blank_id })
    }

    /// Vocabulary with blank as the last index.
    pub fn with_trailing_blank(size: usize) -> Result<Self> {
        let blank = size
            .checked_sub(1)
            .ok_or_else(|| Error::InvalidVocabulary("vocabulary size must be positive".into()))?;
        Self::new(size, blank as Token)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn blank(&self) -> Token {
        self.blank_id
    }

    pub fn is_blank(&self, token: Token) -> bool {
        token == self.blank_id
    }

    /// Non-blank tokens in index order.
    pub fn labels(&self) -> impl Iterator<Item = Token> + '_ {
        (0..self.size as Token).filter(move |&t| t != self.blank_id)
    }
}

/// Encoder features for one utterance, stored row-major as `T x D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderOutput {
    pub utterance_id: String,
    dim: usize,
    frames: Vec<f32>,
}

impl EncoderOutput {
    pub fn new(utterance_id: impl Into<String>, dim: usize, frames: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidEncoder(
                "feature dimension must be positive".into(),
            ));
        }
        if !frames.len().is_multiple_of(dim) {
            return Err(Error::InvalidEncoder(format!(
                "{} values do not form rows of width {dim}",
                frames.len()
            )));
        }
        if let Some(pos) = frames.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidEncoder(format!(
                "non-finite feature in frame {}",
                pos / dim
            )));
        }
        Ok(Self {
            utterance_id: utterance_id.into(),
            dim,
            frames,
        })
    }

    pub fn from_rows(utterance_id: impl Into<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(1, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidEncoder("ragged frame rows".into()));
        }
        Self::new(utterance_id, dim, rows.concat())
    }

    pub fn empty(utterance_id: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new(utterance_id, dim, Vec::new())
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.frames[t * self.dim..(t + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.frames
    }

    /// Frames `start..start + len`. Panics if the range leaves the utterance.
    pub fn window(&self, start: usize, len: usize) -> FrameWindow<'_> {
        assert!(
            start + len <= self.num_frames(),
            "window {start}+{len} exceeds {} frames",
            self.num_frames()
        );
        FrameWindow {
            rows: &self.frames[start * self.dim..(start + len) * self.dim],
            dim: self.dim,
            start,
        }
    }
}

/// A contiguous block of encoder rows handed to the joiner.
#[derive(Debug, Clone, Copy)]
pub struct FrameWindow<'a> {
    rows: &'a [f32],
    dim: usize,
    start: usize,
}

impl<'a> FrameWindow<'a> {
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &'a [f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &'a [f32]> + 'a {
        self.rows.chunks_exact(self.dim)
    }

    /// Sub-window of `len` rows starting `offset` rows in.
    pub fn slice(&self, offset: usize, len: usize) -> FrameWindow<'a> {
        FrameWindow {
            rows: &self.rows[offset * self.dim..(offset + len) * self.dim],
            dim: self.dim,
            start: self.start + offset,
        }
    }
}

/// Per-frame log distributions for one decoder state over a window, `n x V`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowLogits {
    window_start: usize,
    vocab_size: usize,
    log_probs: Vec<f64>,
}

impl WindowLogits {
    pub fn new(window_start: usize, vocab_size: usize, log_probs: Vec<f64>) -> Result<Self> {
        if vocab_size == 0 || log_probs.is_empty() || !log_probs.len().is_multiple_of(vocab_size) {
            return Err(Error::InvalidLogits(format!(
                "{} log-probs do not form rows of width {vocab_size}",
                log_probs.len()
            )));
        }
        if log_probs.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::InvalidLogits("NaN or +inf log-probability".into()));
        }
        Ok(Self {
            window_start,
            vocab_size,
            log_probs,
        })
    }

    pub fn window_start(&self) -> usize {
        self.window_start
    }

    /// Number of frames actually evaluated.
    pub fn len(&self) -> usize {
        self.log_probs.len() / self.vocab_size
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.log_probs[i * self.vocab_size..(i + 1) * self.vocab_size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.log_probs.chunks_exact(self.vocab_size)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.log_probs
    }

    /// Floats held by this block, for memory accounting.
    pub fn float_count(&self) -> usize {
        self.log_probs.len()
    }

    /// True when every row's logsumexp is within `tol` of zero.
    pub fn is_normalized(&self, tol: f64) -> bool {
        self.rows().all(|row| logsumexp(row).abs() <= tol)
    }
}

/// A partial or complete decoding result.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis<S> {
    pub tokens: Vec<Token>,
    /// Frame index of each emitted token.
    pub timestamps: Vec<usize>,
    /// Cumulative natural-log probability.
    pub score: f64,
    pub state: S,
}

impl<S> Hypothesis<S> {
    pub fn empty(state: S) -> Self {
        Self {
            tokens: Vec::new(),
            timestamps: Vec::new(),
            score: 0.0,
            state,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks the structural invariants against an utterance of `num_frames`.
    pub fn check_invariants(&self, vocab: &Vocabulary, num_frames: usize) -> Result<()> {
        if self.tokens.len() != self.timestamps.len() {
            return Err(Error::InvalidConfig(
                "token and timestamp lists differ in length".into(),
            ));
        }
        if self
            .tokens
            .iter()
            .any(|&t| vocab.is_blank(t) || t as usize >= vocab.size())
        {
            return Err(Error::InvalidConfig(
                "hypothesis holds a blank or out-of-range token".into(),
            ));
        }
        if self.timestamps.windows(2).any(|w| w[0] > w[1])
            || self.timestamps.iter().any(|&ts| ts >= num_frames)
        {
            return Err(Error::InvalidConfig(
                "timestamps out of order or range".into(),
            ));
        }
        if self.score.is_nan() || self.score > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "invalid score {}",
                self.score
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_bounds() {
        assert!(Vocabulary::new(1, 0).is_err());
        assert!(Vocabulary::new(3, 3).is_err());
        let v = Vocabulary::with_trailing_blank(4).unwrap();
        assert_eq!(v.blank(), 3);
        assert_eq!(v.labels().collect::<Vec<_>>(), vec![0, 1, 2]);
        let v = Vocabulary::new(3, 0).unwrap();
        assert_eq!(v.labels().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn encoder_rejects_bad_shapes() {
        assert!(EncoderOutput::new("u", 2, vec![0.0; 3]).is_err());
        assert!(EncoderOutput::new("u", 1, vec![f32::NAN]).is_err());
        let enc = EncoderOutput::empty("u", 4).unwrap();
        assert_eq!(enc.num_frames(), 0);
    }

    #[test]
    fn window_rows_line_up() {
        let enc = EncoderOutput::from_rows("u", &[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]])
            .unwrap();
        let w = enc.window(1, 2);
        assert_eq!(w.start(), 1);
        assert_eq!(w.len(), 2);
        assert_eq!(w.row(1), &[4.0, 5.0]);
        let sub = w.slice(1, 1);
        assert_eq!(sub.start(), 2);
        assert_eq!(sub.row(0), &[4.0, 5.0]);
    }

    #[test]
    fn window_logits_shape() {
        assert!(WindowLogits::new(0, 3, vec![0.0; 4]).is_err());
        let w = WindowLogits::new(5, 2, vec![0.5f64.ln(); 4]).unwrap();
        assert_eq!(w.len(), 2);
        assert!(w.is_normalized(1e-9));
    }
}
