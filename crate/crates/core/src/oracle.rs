//! Brute-force references for tiny instances: a naive replay of frame-by-frame
//! greedy decoding, exhaustive enumeration of alignment paths, and exact
//! K-best label sequences under summed-alignment scoring.
//!
//! Nothing here shares code with the decoders beyond the model trait, so
//! agreement between the two is meaningful.

use std::collections::BTreeMap;

use crate::beam::rank;
use crate::error::{Error, Result};
use crate::logprob::{log_add, logsumexp};
use crate::model::TransducerModel;
use crate::types::{EncoderOutput, Hypothesis, Token};

pub const MAX_LATTICE_FRAMES: usize = 6;
pub const MAX_LATTICE_VOCAB: usize = 4;
pub const MAX_LATTICE_SYMBOLS: usize = 3;
/// Upper bound on enumerated paths, checked while enumerating.
pub const MAX_LATTICE_PATHS: usize = 1 << 22;

/// What happens to a path that has emitted the per-frame maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapRule {
    /// Only blank remains available at that frame; label continuations are
    /// cut, so total mass falls short of one by the cut amount.
    Truncate,
    /// The path moves to the next frame with probability one, the same
    /// safeguard the decoders apply. Total mass is exactly one.
    ForceAdvance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeCaps {
    pub max_symbols_per_frame: usize,
    pub rule: CapRule,
}

impl LatticeCaps {
    pub fn force_advance(max_symbols_per_frame: usize) -> Self {
        Self {
            max_symbols_per_frame,
            rule: CapRule::ForceAdvance,
        }
    }

    pub fn truncate(max_symbols_per_frame: usize) -> Self {
        Self {
            max_symbols_per_frame,
            rule: CapRule::Truncate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticePath {
    pub tokens: Vec<Token>,
    pub timestamps: Vec<usize>,
    pub log_prob: f64,
}

#[derive(Debug, Clone)]
pub struct LatticeEnumeration {
    paths: Vec<LatticePath>,
    sequences: BTreeMap<Vec<Token>, f64>,
}

impl LatticeEnumeration {
    pub fn paths(&self) -> &[LatticePath] {
        &self.paths
    }

    /// Label sequence to log of the summed probability of its paths.
    pub fn sequences(&self) -> &BTreeMap<Vec<Token>, f64> {
        &self.sequences
    }

    pub fn total_log_prob(&self) -> f64 {
        let all: Vec<f64> = self.paths.iter().map(|p| p.log_prob).collect();
        logsumexp(&all)
    }

    pub fn sequence_log_prob(&self, tokens: &[Token]) -> Option<f64> {
        self.sequences.get(tokens).copied()
    }
}

/// Greedy decoding with the default symbol cap of 10, written out step by step.
pub fn replay_sequential<M: TransducerModel>(
    model: &M,
    enc: &EncoderOutput,
) -> Result<Hypothesis<M::State>> {
    replay_sequential_capped(model, enc, crate::greedy::DEFAULT_MAX_SYMBOLS_PER_FRAME)
}

pub fn replay_sequential_capped<M: TransducerModel>(
    model: &M,
    enc: &EncoderOutput,
    max_symbols_per_frame: usize,
) -> Result<Hypothesis<M::State>> {
    if max_symbols_per_frame == 0 {
        return Err(Error::InvalidConfig("symbol cap must be positive".into()));
    }
    let vocab = model.vocab();
    let mut tokens: Vec<Token> = Vec::new();
    let mut timestamps = Vec::new();
    let mut score = 0.0;
    let mut t = 0;
    let mut here = 0;
    while t < enc.num_frames() {
        // Rebuild the decoder state from scratch every step.
        let mut state = model.initial_state();
        for &tok in &tokens {
            state = model.advance_state(&state, tok)?;
        }
        let logits = model.joint(enc.window(t, 1), &state)?;
        let row = logits.row(0);
        let mut best = 0;
        for v in 1..row.len() {
            if row[v] > row[best] {
                best = v;
            }
        }
        if row[best] == f64::NEG_INFINITY {
            return Err(Error::InvalidLogits(format!(
                "frame {t} has no finite entry"
            )));
        }
        score += row[best];
        if best as Token == vocab.blank() {
            t += 1;
            here = 0;
        } else {
            tokens.push(best as Token);
            timestamps.push(t);
            here += 1;
            if here == max_symbols_per_frame {
                t += 1;
                here = 0;
            }
        }
    }
    let mut state = model.initial_state();
    for &tok in &tokens {
        state = model.advance_state(&state, tok)?;
    }
    Ok(Hypothesis {
        tokens,
        timestamps,
        score,
        state,
    })
}

/// Enumerates every alignment path depth-first.
pub fn enumerate_lattice<M: TransducerModel>(
    model: &M,
    enc: &EncoderOutput,
    caps: LatticeCaps,
) -> Result<LatticeEnumeration> {
    let v = model.vocab().size();
    if enc.num_frames() > MAX_LATTICE_FRAMES
        || v > MAX_LATTICE_VOCAB
        || caps.max_symbols_per_frame > MAX_LATTICE_SYMBOLS
        || caps.max_symbols_per_frame == 0
    {
        return Err(Error::FeasibilityExceeded(format!(
            "T={} V={} cap={} (limits T<={MAX_LATTICE_FRAMES}, V<={MAX_LATTICE_VOCAB}, 1<=cap<={MAX_LATTICE_SYMBOLS})",
            enc.num_frames(),
            v,
            caps.max_symbols_per_frame
        )));
    }
    let mut walker = Walker {
        model,
        enc,
        caps,
        paths: Vec::new(),
    };
    walker.visit(0, 0, model.initial_state(), Vec::new(), Vec::new(), 0.0)?;
    let mut sequences: BTreeMap<Vec<Token>, f64> = BTreeMap::new();
    for p in &walker.paths {
        sequences
            .entry(p.tokens.clone())
            .and_modify(|s| *s = log_add(*s, p.log_prob))
            .or_insert(p.log_prob);
    }
    Ok(LatticeEnumeration {
        paths: walker.paths,
        sequences,
    })
}

struct Walker<'a, M: TransducerModel> {
    model: &'a M,
    enc: &'a EncoderOutput,
    caps: LatticeCaps,
    paths: Vec<LatticePath>,
}

impl<M: TransducerModel> Walker<'_, M> {
    fn visit(
        &mut self,
        t: usize,
        here: usize,
        state: M::State,
        tokens: Vec<Token>,
        timestamps: Vec<usize>,
        log_prob: f64,
    ) -> Result<()> {
        if t == self.enc.num_frames() {
            if self.paths.len() == MAX_LATTICE_PATHS {
                return Err(Error::FeasibilityExceeded(format!(
                    "more than {MAX_LATTICE_PATHS} paths"
                )));
            }
            self.paths.push(LatticePath {
                tokens,
                timestamps,
                log_prob,
            });
            return Ok(());
        }
        let at_cap = here == self.caps.max_symbols_per_frame;
        if at_cap && self.caps.rule == CapRule::ForceAdvance {
            return self.visit(t + 1, 0, state, tokens, timestamps, log_prob);
        }
        let logits = self.model.joint(self.enc.window(t, 1), &state)?;
        let row = logits.row(0).to_vec();
        let blank = self.model.vocab().blank();
        for (v, &lp) in row.iter().enumerate() {
            if lp == f64::NEG_INFINITY {
                continue;
            }
            if v as Token == blank {
                self.visit(
                    t + 1,
                    0,
                    state.clone(),
                    tokens.clone(),
                    timestamps.clone(),
                    log_prob + lp,
                )?;
            } else if !at_cap {
                let next = self.model.advance_state(&state, v as Token)?;
                let mut tk = tokens.clone();
                tk.push(v as Token);
                let mut ts = timestamps.clone();
                ts.push(t);
                self.visit(t, here + 1, next, tk, ts, log_prob + lp)?;
            }
        }
        Ok(())
    }
}

/// The `k` most probable label sequences, best first, ties broken by shorter
/// then lexicographically smaller sequence.
pub fn exact_kbest(lattice: &LatticeEnumeration, k: usize) -> Vec<(Vec<Token>, f64)> {
    let mut all: Vec<(Vec<Token>, f64)> = lattice
        .sequences
        .iter()
        .map(|(tokens, &lp)| (tokens.clone(), lp))
        .collect();
    all.sort_by(|a, b| rank(a.1, &a.0, b.1, &b.0));
    all.truncate(k);
    all
}

/// Log-probability of one alignment path, where `timestamps[i]` is the frame
/// that emitted `tokens[i]` and a frame that reaches `max_symbols_per_frame`
/// emissions is left without a blank.
pub fn score_alignment<M: TransducerModel>(
    model: &M,
    enc: &EncoderOutput,
    tokens: &[Token],
    timestamps: &[usize],
    max_symbols_per_frame: usize,
) -> Result<f64> {
    if tokens.len() != timestamps.len() {
        return Err(Error::InvalidConfig(
            "tokens and timestamps differ in length".into(),
        ));
    }
    if timestamps.windows(2).any(|w| w[0] > w[1])
        || timestamps.iter().any(|&f| f >= enc.num_frames())
    {
        return Err(Error::InvalidConfig(format!(
            "bad timestamps {timestamps:?}"
        )));
    }
    let vocab = model.vocab();
    let mut state = model.initial_state();
    let mut score = 0.0;
    let mut next = 0;
    for t in 0..enc.num_frames() {
        let mut here = 0;
        while next < tokens.len() && timestamps[next] == t {
            let tok = tokens[next];
            if vocab.is_blank(tok) || tok as usize >= vocab.size() {
                return Err(Error::InvalidConfig(format!(
                    "token {tok} cannot be emitted"
                )));
            }
            if here == max_symbols_per_frame {
                return Err(Error::InvalidConfig(format!(
                    "frame {t} exceeds the symbol cap"
                )));
            }
            score += model.joint(enc.window(t, 1), &state)?.row(0)[tok as usize];
            state = model.advance_state(&state, tok)?;
            here += 1;
            next += 1;
        }
        if here < max_symbols_per_frame {
            score += model.joint(enc.window(t, 1), &state)?.row(0)[vocab.blank() as usize];
        }
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::{decode_sequential, GreedyConfig};
    use crate::synth::{build_table_model, TableSpec};
    use crate::testing::{all_blank_model, chain_model, chain_utterance};
    use crate::types::Vocabulary;

    /// V = {a=0, blank=1}, k=1.
    fn two_symbol() -> crate::synth::TableModel {
        let vocab = Vocabulary::with_trailing_blank(2).unwrap();
        let mut spec = TableSpec::new(vocab, 1, 1).unwrap();
        spec.set_row(&[], 0, vec![0.3f32.ln(), 0.7f32.ln()])
            .unwrap();
        spec.set_row(&[0], 0, vec![0.4f32.ln(), 0.6f32.ln()])
            .unwrap();
        build_table_model(spec).unwrap()
    }

    #[test]
    fn single_frame_cap_one() {
        let model = two_symbol();
        let enc = EncoderOutput::new("u", 1, vec![0.0]).unwrap();
        let lat = enumerate_lattice(&model, &enc, LatticeCaps::truncate(1)).unwrap();
        assert_eq!(lat.paths().len(), 2);
        let expected = (0.7f64 + 0.3 * 0.6).ln();
        assert!((lat.total_log_prob() - expected).abs() < 1e-6);

        // Mass approaches one as the cap grows under truncation.
        let mut last = lat.total_log_prob();
        for cap in 2..=3 {
            let total = enumerate_lattice(&model, &enc, LatticeCaps::truncate(cap))
                .unwrap()
                .total_log_prob();
            assert!(total > last);
            last = total;
        }
        let forced = enumerate_lattice(&model, &enc, LatticeCaps::force_advance(1)).unwrap();
        assert!(forced.total_log_prob().abs() < 1e-9);
    }

    #[test]
    fn all_blank_model_has_empty_best() {
        let model = all_blank_model(3);
        let enc = EncoderOutput::new("u", 1, vec![0.0; 3]).unwrap();
        let lat = enumerate_lattice(&model, &enc, LatticeCaps::force_advance(2)).unwrap();
        let best = exact_kbest(&lat, 1);
        assert_eq!(best[0].0, Vec::<Token>::new());
    }

    #[test]
    fn kbest_returns_everything_sorted() {
        let model = chain_model();
        let lat =
            enumerate_lattice(&model, &chain_utterance(), LatticeCaps::force_advance(2)).unwrap();
        let all = exact_kbest(&lat, usize::MAX);
        assert_eq!(all.len(), lat.sequences().len());
        assert!(all.windows(2).all(|w| w[0].1 >= w[1].1));
        assert_eq!(all[0].0, vec![0, 1]);
    }

    #[test]
    fn replay_matches_greedy_on_chain() {
        let model = chain_model();
        let enc = chain_utterance();
        let replay = replay_sequential(&model, &enc).unwrap();
        let greedy = decode_sequential(&model, &enc, &GreedyConfig::default()).unwrap();
        assert_eq!(replay.tokens, vec![0, 1]);
        assert_eq!(replay.tokens, greedy.hypothesis.tokens);
        assert_eq!(replay.timestamps, greedy.hypothesis.timestamps);
        let alt = score_alignment(&model, &enc, &replay.tokens, &replay.timestamps, 10).unwrap();
        assert!((alt - replay.score).abs() < 1e-9);
    }

    #[test]
    fn replay_of_empty_utterance() {
        let model = chain_model();
        let enc = EncoderOutput::empty("u", 1).unwrap();
        assert!(replay_sequential(&model, &enc).unwrap().tokens.is_empty());
    }

    #[test]
    fn feasibility_guard() {
        let model = chain_model();
        let enc = EncoderOutput::new("u", 1, vec![0.0; 7]).unwrap();
        assert!(matches!(
            enumerate_lattice(&model, &enc, LatticeCaps::force_advance(1)),
            Err(Error::FeasibilityExceeded(_))
        ));
        assert!(matches!(
            enumerate_lattice(&model, &chain_utterance(), LatticeCaps::force_advance(4)),
            Err(Error::FeasibilityExceeded(_))
        ));
    }

    #[test]
    fn alignment_scores_match_enumerated_paths() {
        let model = chain_model();
        let enc = chain_utterance();
        let lat = enumerate_lattice(&model, &enc, LatticeCaps::force_advance(2)).unwrap();
        for p in lat.paths().iter().take(50) {
            let s = score_alignment(&model, &enc, &p.tokens, &p.timestamps, 2).unwrap();
            assert!((s - p.log_prob).abs() < 1e-9);
        }
    }
}
