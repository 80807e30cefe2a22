//! Greedy, windowed, batched, and beam-search decoders for RNN-Transducer
//! models, plus synthetic models and brute-force oracles to check them.
//!
//! Decoders talk to a model only through [`TransducerModel`]. The windowed
//! variants evaluate several frames against one decoder state per joiner call
//! and jump straight to the first frame that emits a non-blank token.

pub mod batched;
pub mod beam;
pub mod cost;
pub mod error;
pub mod greedy;
pub mod logprob;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod synth;
pub mod types;

#[cfg(test)]
pub(crate) mod testing;

pub use batched::{decode_batch, BatchOutput, BatchVariant};
pub use beam::{
    decode_graves_beam, decode_wind_beam, first_emission_logprobs, recombine_prune_prefix_search,
    BeamConfig, BeamResult, FirstEmissionDistribution, PrefixPolicy,
};
pub use cost::CostReport;
pub use error::{Error, Result};
pub use greedy::{
    decode_sequential, decode_wind, record_jump_histogram, GreedyConfig, GreedyResult,
};
pub use logprob::{argmax_with_tiebreak, log_add, log_normalize, logsumexp};
pub use metrics::{
    aggregate_costs, build_tradeoff_table, corpus_error_rate, token_error_rate, RunConfig,
    TradeoffRow, TradeoffRun, WerReport,
};
pub use model::TransducerModel;
pub use oracle::{
    enumerate_lattice, exact_kbest, replay_sequential, score_alignment, CapRule, LatticeCaps,
    LatticeEnumeration, LatticePath,
};
pub use types::{EncoderOutput, FrameWindow, Hypothesis, Token, Vocabulary, WindowLogits};
