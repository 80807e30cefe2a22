//! Beam search: the windowed first-emission search and the frame-synchronous
//! reference search.

mod first_emission;
mod graves;
mod recombine;
mod wind;

pub use first_emission::{first_emission_logprobs, FirstEmissionDistribution};
pub use graves::decode_graves_beam;
pub use recombine::recombine_prune_prefix_search;
pub use wind::decode_wind_beam;

use std::cmp::Ordering;

use crate::cost::CostReport;
use crate::error::{Error, Result};
use crate::logprob::{log_add, logsumexp};
use crate::types::{Hypothesis, Token};

pub const DEFAULT_MAX_EXPANSIONS_PER_TIMESTEP: usize = 10;
/// Longest completion scored when merging a prefix into a longer hypothesis.
pub const MAX_PREFIX_COMPLETION: usize = 4;

/// How a hypothesis A that is a strict prefix of another hypothesis B at the
/// same frame is folded into B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrefixPolicy {
    /// B gains the mass of A emitting the missing tokens at this frame, and A
    /// is dropped. Completions up to [`MAX_PREFIX_COMPLETION`] tokens.
    RemovePrefix,
    /// B gains the mass of its one-token-shorter prefix A emitting B's last
    /// token at this frame (chained in length order), and A stays alive with
    /// that single expansion suppressed. Mass is neither lost nor counted twice.
    #[default]
    Suppress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamConfig {
    pub beam_size: usize,
    pub window_size: usize,
    /// Emissions allowed at one frame before the hypothesis is forced onward.
    pub max_expansions_per_timestep: usize,
    pub length_normalize_final: bool,
    pub prefix_policy: PrefixPolicy,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam_size: 4,
            window_size: 8,
            max_expansions_per_timestep: DEFAULT_MAX_EXPANSIONS_PER_TIMESTEP,
            length_normalize_final: false,
            prefix_policy: PrefixPolicy::default(),
        }
    }
}

impl BeamConfig {
    pub fn new(beam_size: usize, window_size: usize) -> Result<Self> {
        let cfg = Self {
            beam_size,
            window_size,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 || self.window_size == 0 || self.max_expansions_per_timestep == 0 {
            return Err(Error::InvalidConfig(
                "beam size, window size and expansion cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BeamResult<S> {
    /// Best first.
    pub hypotheses: Vec<Hypothesis<S>>,
    pub cost: CostReport,
}

impl<S> BeamResult<S> {
    pub fn best(&self) -> Option<&Hypothesis<S>> {
        self.hypotheses.first()
    }
}

/// Search-time hypothesis. Its mass is split by how many tokens were emitted
/// at the current frame, because only mass below the symbol cap may emit
/// again there. `hyp.score` is the total.
#[derive(Debug, Clone)]
pub(crate) struct SearchHyp<S> {
    pub hyp: Hypothesis<S>,
    /// Log mass indexed by emissions at the current frame, length = cap.
    pub by_emissions: Vec<f64>,
    /// Tokens whose zero-jump expansion was already credited to a longer
    /// hypothesis during prefix search.
    pub suppressed: Vec<Token>,
}

impl<S> SearchHyp<S> {
    pub fn new(hyp: Hypothesis<S>, emissions: usize, cap: usize) -> Self {
        debug_assert!(emissions < cap);
        let mut by_emissions = vec![f64::NEG_INFINITY; cap];
        by_emissions[emissions] = hyp.score;
        Self {
            hyp,
            by_emissions,
            suppressed: Vec::new(),
        }
    }

    /// Builds from a split mass; `None` when all of it is zero.
    pub fn from_split(mut hyp: Hypothesis<S>, by_emissions: Vec<f64>) -> Option<Self> {
        hyp.score = logsumexp(&by_emissions);
        (hyp.score > f64::NEG_INFINITY).then_some(Self {
            hyp,
            by_emissions,
            suppressed: Vec::new(),
        })
    }

    pub fn absorb(&mut self, by_emissions: &[f64]) {
        for (mine, &theirs) in self.by_emissions.iter_mut().zip(by_emissions) {
            *mine = log_add(*mine, theirs);
        }
        self.hyp.score = logsumexp(&self.by_emissions);
    }
}

/// Emits one more token at the same frame with log-probability `lp`. Returns
/// the mass still below the cap and the mass that reaches it.
pub(crate) fn shift_emissions(by_emissions: &[f64], lp: f64) -> (Vec<f64>, f64) {
    let cap = by_emissions.len();
    let mut below = vec![f64::NEG_INFINITY; cap];
    for e in 0..cap - 1 {
        below[e + 1] = by_emissions[e] + lp;
    }
    (below, by_emissions[cap - 1] + lp)
}

/// Ranking used everywhere a beam is cut: higher score first, then shorter,
/// then lexicographically smaller tokens.
pub(crate) fn rank(a_score: f64, a_tokens: &[Token], b_score: f64, b_tokens: &[Token]) -> Ordering {
    b_score
        .total_cmp(&a_score)
        .then(a_tokens.len().cmp(&b_tokens.len()))
        .then_with(|| a_tokens.cmp(b_tokens))
}

/// Orders final hypotheses best first, optionally by per-token score.
pub(crate) fn sort_final<S>(hyps: &mut [Hypothesis<S>], length_normalize: bool) {
    let key = |h: &Hypothesis<S>| {
        if length_normalize && !h.tokens.is_empty() {
            h.score / h.tokens.len() as f64
        } else {
            h.score
        }
    };
    hyps.sort_by(|a, b| rank(key(a), &a.tokens, key(b), &b.tokens));
}
