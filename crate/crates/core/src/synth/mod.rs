//! Synthetic transducer models with limited-context decoders.
//!
//! Both model kinds keep the last `k` emitted tokens as decoder state, which
//! makes the state space finite and small enough for exhaustive search on
//! tiny instances.

mod any;
mod corpus;
mod format;
mod seeded;
mod table;

pub use any::AnyModel;
pub use corpus::{generate_corpus, SyntheticUtterance};
pub use format::{
    check_major, read_tensor, write_tensor, CorpusEntry, CorpusFile, ModelManifest, ModelSource,
    SeedBlock, TableBlock, Tensor, MANIFEST_FORMAT_VERSION, TENSOR_MAGIC,
};
pub use seeded::{build_seeded_model, SeededModel, SeededParams};
pub use table::{build_table_model, random_table_model, TableModel, TableSpec};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::types::{Token, Vocabulary};

/// Decoder state of a limited-context model: the last `k` tokens, oldest
/// first. Slots not yet filled hold the begin-of-sequence marker, encoded
/// as the blank id since blank never enters the history.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContextState {
    slots: Vec<Token>,
}

impl ContextState {
    pub fn initial(vocab: &Vocabulary, context_len: usize) -> Self {
        Self {
            slots: vec![vocab.blank(); context_len],
        }
    }

    /// Builds the state reached after emitting `history` (most recent last).
    pub fn from_history(vocab: &Vocabulary, context_len: usize, history: &[Token]) -> Self {
        let mut state = Self::initial(vocab, context_len);
        for &tok in history {
            state = state.pushed(tok);
        }
        state
    }

    pub fn pushed(&self, token: Token) -> Self {
        let mut slots = self.slots.clone();
        if !slots.is_empty() {
            slots.remove(0);
            slots.push(token);
        }
        Self { slots }
    }

    pub fn slots(&self) -> &[Token] {
        &self.slots
    }

    /// Mixed-radix index of the context, in `0..V^k`.
    pub fn index(&self, vocab_size: usize) -> usize {
        self.slots
            .iter()
            .fold(0usize, |acc, &tok| acc * vocab_size + tok as usize)
    }
}

/// Models that also know how to synthesize their own encoder features.
pub trait SyntheticSource {
    fn feature_dim(&self) -> usize;

    /// `num_frames` rows of features, row-major.
    fn sample_frames(&self, rng: &mut dyn RngCore, num_frames: usize) -> Vec<f32>;
}

/// SplitMix64 finalizer, used to derive per-context seeds.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
