//! Single-utterance greedy decoding: frame-by-frame and windowed.
//!
//! Both decoders share one safeguard: after `max_symbols_per_frame` emissions
//! at the same frame the time pointer is pushed forward by one frame without
//! consulting the joiner.

use std::collections::BTreeMap;

use crate::cost::CostReport;
use crate::error::{Error, Result};
use crate::logprob::argmax_with_tiebreak;
use crate::model::TransducerModel;
use crate::types::{EncoderOutput, Hypothesis, Token, Vocabulary, WindowLogits};

pub const DEFAULT_MAX_SYMBOLS_PER_FRAME: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreedyConfig {
    /// Frames evaluated per joiner call; 1 is the classic algorithm.
    pub window_size: usize,
    pub max_symbols_per_frame: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            window_size: 1,
            max_symbols_per_frame: DEFAULT_MAX_SYMBOLS_PER_FRAME,
        }
    }
}

impl GreedyConfig {
    pub fn new(window_size: usize, max_symbols_per_frame: usize) -> Result<Self> {
        let cfg = Self {
            window_size,
            max_symbols_per_frame,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_window(window_size: usize) -> Self {
        Self {
            window_size,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 || self.max_symbols_per_frame == 0 {
            return Err(Error::InvalidConfig(
                "window size and symbol cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult<S> {
    pub hypothesis: Hypothesis<S>,
    pub cost: CostReport,
}

/// What one scan of a window found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum WindowScan {
    AllBlank,
    Emit { offset: usize, token: Token },
}

/// Scans window rows in order for the first non-blank argmax, adding each
/// inspected row's chosen log-probability to `score`.
pub(crate) fn scan_window(
    logits: &WindowLogits,
    vocab: &Vocabulary,
    score: &mut f64,
) -> Result<WindowScan> {
    for (offset, row) in logits.rows().enumerate() {
        let label = argmax_with_tiebreak(row)?;
        *score += row[label];
        if label as Token != vocab.blank() {
            return Ok(WindowScan::Emit {
                offset,
                token: label as Token,
            });
        }
    }
    Ok(WindowScan::AllBlank)
}

/// Frame-by-frame greedy decoding. `cfg.window_size` is ignored.
pub fn decode_sequential<M: TransducerModel>(
    model: &M,
    enc: &EncoderOutput,
    cfg: &GreedyConfig,
) -> Result<GreedyResult<M::State>> {
    cfg.validate()?;
    let vocab = model.vocab();
    let num_frames = enc.num_frames();
    let mut hyp = Hypothesis::empty(model.initial_state());
    let mut cost = CostReport::default();
    let mut t = 0;
    let mut emitted_here = 0;

    while t < num_frames {
        let logits = model
            .joint(enc.window(t, 1), &hyp.state)
            .map_err(Error::at_frame(t))?;
        cost.record_joiner_round(1, logits.float_count());
        match scan_window(&logits, &vocab, &mut hyp.score)? {
            WindowScan::AllBlank => {
                t += 1;
                emitted_here = 0;
                cost.record_jump(1);
            }
            WindowScan::Emit { token, .. } => {
                hyp.tokens.push(token);
                hyp.timestamps.push(t);
                hyp.state = model
                    .advance_state(&hyp.state, token)
                    .map_err(Error::at_frame(t))?;
                cost.decoder_calls += 1;
                emitted_here += 1;
                let mut jump = 0;
                if emitted_here >= cfg.max_symbols_per_frame {
                    t += 1;
                    emitted_here = 0;
                    jump = 1;
                    cost.forced_advances += 1;
                }
                cost.record_jump(jump);
            }
        }
    }
    Ok(GreedyResult {
        hypothesis: hyp,
        cost,
    })
}

/// Windowed greedy decoding: one joiner call covers up to `window_size`
/// frames under the current decoder state, and the time pointer jumps to the
/// first frame whose argmax is not blank (or past the window if none is).
pub fn decode_wind<M: TransducerModel>(
    model: &M,
    enc: &EncoderOutput,
    cfg: &GreedyConfig,
) -> Result<GreedyResult<M::State>> {
    cfg.validate()?;
    let vocab = model.vocab();
    let num_frames = enc.num_frames();
    let mut hyp = Hypothesis::empty(model.initial_state());
    let mut cost = CostReport::default();
    let mut t = 0;
    let mut emitted_here = 0;

    while t < num_frames {
        let n = cfg.window_size.min(num_frames - t);
        let logits = model
            .joint(enc.window(t, n), &hyp.state)
            .map_err(Error::at_frame(t))?;
        cost.record_joiner_round(n, logits.float_count());
        match scan_window(&logits, &vocab, &mut hyp.score)? {
            WindowScan::AllBlank => {
                t += n;
                emitted_here = 0;
                cost.record_jump(n);
            }
            WindowScan::Emit { offset, token } => {
                t += offset;
                if offset > 0 {
                    emitted_here = 0;
                }
                hyp.tokens.push(token);
                hyp.timestamps.push(t);
                hyp.state = model
                    .advance_state(&hyp.state, token)
                    .map_err(Error::at_frame(t))?;
                cost.decoder_calls += 1;
                emitted_here += 1;
                let mut jump = offset;
                if emitted_here >= cfg.max_symbols_per_frame {
                    t += 1;
                    emitted_here = 0;
                    jump += 1;
                    cost.forced_advances += 1;
                }
                cost.record_jump(jump);
            }
        }
    }
    Ok(GreedyResult {
        hypothesis: hyp,
        cost,
    })
}

/// Pools the jump events of several decodes into one histogram.
pub fn record_jump_histogram<S>(results: &[GreedyResult<S>]) -> Result<BTreeMap<usize, u64>> {
    if results.is_empty() {
        return Err(Error::InvalidConfig("no results to histogram".into()));
    }
    let mut hist = BTreeMap::new();
    for result in results {
        for (&jump, &count) in &result.cost.jump_events {
            *hist.entry(jump).or_insert(0) += count;
        }
    }
    Ok(hist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{all_blank_model, chain_model, chain_utterance};

    #[test]
    fn empty_utterance() {
        let model = chain_model();
        let enc = EncoderOutput::empty("u", 1).unwrap();
        for result in [
            decode_sequential(&model, &enc, &GreedyConfig::default()).unwrap(),
            decode_wind(&model, &enc, &GreedyConfig::with_window(4)).unwrap(),
        ] {
            assert!(result.hypothesis.tokens.is_empty());
            assert_eq!(result.hypothesis.score, 0.0);
            assert_eq!(result.cost, CostReport::default());
        }
    }

    #[test]
    fn forced_chain_sequential() {
        let result =
            decode_sequential(&chain_model(), &chain_utterance(), &GreedyConfig::default())
                .unwrap();
        assert_eq!(result.hypothesis.tokens, vec![0, 1]);
        assert_eq!(result.hypothesis.timestamps, vec![0, 1]);
        assert_eq!(result.cost.joiner_calls, 5);
        assert_eq!(result.cost.frames_evaluated, 5);
        assert_eq!(result.cost.decoder_calls, 2);
        assert_eq!(result.cost.loop_iterations(), 5);
    }

    #[test]
    fn forced_chain_windowed() {
        // Hand execution with window 4 on 3 frames:
        //   t=0, state BOS, frames 0..3: row 0 argmax a -> emit a@0, jump 0
        //   t=0, state a,   frames 0..3: rows blank, b -> emit b@1, jump 1
        //   t=1, state b,   frames 1..3: all blank -> t=3, jump 2
        let result = decode_wind(
            &chain_model(),
            &chain_utterance(),
            &GreedyConfig::with_window(4),
        )
        .unwrap();
        assert_eq!(result.hypothesis.tokens, vec![0, 1]);
        assert_eq!(result.hypothesis.timestamps, vec![0, 1]);
        assert_eq!(result.cost.joiner_calls, 3);
        assert_eq!(result.cost.frames_evaluated, 3 + 3 + 2);
        assert_eq!(
            result.cost.jump_events,
            BTreeMap::from([(0, 1), (1, 1), (2, 1)])
        );
        assert_eq!(result.cost.peak_logit_floats, 3 * 3);
    }

    #[test]
    fn all_blank_jumps_whole_windows() {
        let model = all_blank_model(4);
        let enc = EncoderOutput::new("u", 1, vec![0.0; 16]).unwrap();
        let result = decode_wind(&model, &enc, &GreedyConfig::with_window(8)).unwrap();
        assert!(result.hypothesis.tokens.is_empty());
        assert_eq!(result.cost.joiner_calls, 2);
        assert_eq!(result.cost.jump_events, BTreeMap::from([(8, 2)]));
        let hist = record_jump_histogram(&[result]).unwrap();
        assert_eq!(hist, BTreeMap::from([(8, 2)]));
    }

    #[test]
    fn tail_window_shrinks() {
        let model = all_blank_model(4);
        let enc = EncoderOutput::new("u", 1, vec![0.0; 10]).unwrap();
        let result = decode_wind(&model, &enc, &GreedyConfig::with_window(8)).unwrap();
        assert_eq!(result.cost.frames_evaluated, 10);
        assert_eq!(result.cost.jump_events, BTreeMap::from([(2, 1), (8, 1)]));
    }

    #[test]
    fn symbol_cap_forces_advance() {
        // A model that never predicts blank must still terminate.
        let model = crate::testing::never_blank_model();
        let enc = EncoderOutput::new("u", 1, vec![0.0; 3]).unwrap();
        let cfg = GreedyConfig::new(1, 2).unwrap();
        let seq = decode_sequential(&model, &enc, &cfg).unwrap();
        assert_eq!(seq.hypothesis.tokens.len(), 6);
        assert_eq!(seq.hypothesis.timestamps, vec![0, 0, 1, 1, 2, 2]);
        assert_eq!(seq.cost.forced_advances, 3);
        for w in [1, 2, 4] {
            let wind = decode_wind(&model, &enc, &GreedyConfig::new(w, 2).unwrap()).unwrap();
            assert_eq!(wind.hypothesis.tokens, seq.hypothesis.tokens);
            assert_eq!(wind.hypothesis.timestamps, seq.hypothesis.timestamps);
        }
    }

    #[test]
    fn window_one_matches_sequential_exactly() {
        let model = chain_model();
        let enc = chain_utterance();
        let a = decode_sequential(&model, &enc, &GreedyConfig::default()).unwrap();
        let b = decode_wind(&model, &enc, &GreedyConfig::with_window(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(GreedyConfig::new(0, 10).is_err());
        assert!(GreedyConfig::new(1, 0).is_err());
        assert!(record_jump_histogram::<()>(&[]).is_err());
    }
}
