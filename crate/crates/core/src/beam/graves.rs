use std::collections::{HashMap, HashSet};

use super::{rank, shift_emissions, sort_final, BeamConfig, BeamResult, MAX_PREFIX_COMPLETION};
use crate::cost::CostReport;
use crate::error::{Error, Result};
use crate::logprob::{log_add, logsumexp};
use crate::model::TransducerModel;
use crate::types::{EncoderOutput, Hypothesis, Token};

/// Decoder state that has not been computed yet.
#[derive(Debug, Clone)]
enum LazyState<S> {
    Ready(S),
    After(S, Token),
}

impl<S: Clone> LazyState<S> {
    fn resolve<M: TransducerModel<State = S>>(
        self,
        model: &M,
        t: usize,
        cost: &mut CostReport,
    ) -> Result<S> {
        match self {
            LazyState::Ready(s) => Ok(s),
            LazyState::After(parent, tok) => {
                cost.decoder_calls += 1;
                model
                    .advance_state(&parent, tok)
                    .map_err(Error::at_frame(t))
            }
        }
    }
}

/// A hypothesis still able to emit at the current frame, with its mass split
/// by emissions at this frame.
#[derive(Debug, Clone)]
struct Open<S> {
    tokens: Vec<Token>,
    timestamps: Vec<usize>,
    by_emissions: Vec<f64>,
    score: f64,
    state: LazyState<S>,
}

impl<S> Open<S> {
    fn absorb(&mut self, emissions: usize, lp: f64) {
        self.by_emissions[emissions] = log_add(self.by_emissions[emissions], lp);
        self.score = logsumexp(&self.by_emissions);
    }
}

struct ClosedHyp<S> {
    tokens: Vec<Token>,
    timestamps: Vec<usize>,
    score: f64,
    state: LazyState<S>,
}

/// Hypotheses that have consumed the current frame, keyed by tokens.
struct Closed<S> {
    index: HashMap<Vec<Token>, usize>,
    hyps: Vec<ClosedHyp<S>>,
}

impl<S> Closed<S> {
    fn new() -> Self {
        Self {
            index: HashMap::new(),
            hyps: Vec::new(),
        }
    }

    fn add(&mut self, tokens: Vec<Token>, timestamps: Vec<usize>, score: f64, state: LazyState<S>) {
        if score == f64::NEG_INFINITY {
            return;
        }
        match self.index.get(&tokens) {
            Some(&i) => {
                let h = &mut self.hyps[i];
                if score > h.score {
                    h.timestamps = timestamps;
                }
                h.score = log_add(h.score, score);
            }
            None => {
                self.index.insert(tokens.clone(), self.hyps.len());
                self.hyps.push(ClosedHyp {
                    tokens,
                    timestamps,
                    score,
                    state,
                });
            }
        }
    }

    fn count_above(&self, score: f64) -> usize {
        self.hyps.iter().filter(|h| h.score > score).count()
    }
}

/// Classic frame-synchronous transducer beam search.
///
/// At each frame, hypotheses carried over from the previous frame first
/// collect the mass of their prefixes emitting the missing tokens at this
/// frame. Then the most probable open hypothesis is repeatedly expanded: its
/// blank extension closes it for this frame, its label extensions stay open.
/// Expansion stops once `K` closed hypotheses beat every open one.
/// Extensions that land on a hypothesis present at the start of the frame are
/// skipped, since the prefix step already counted that mass. Mass reaching
/// the per-frame symbol cap closes without a blank.
pub fn decode_graves_beam<M: TransducerModel>(
    model: &M,
    enc: &EncoderOutput,
    cfg: &BeamConfig,
) -> Result<BeamResult<M::State>> {
    cfg.validate()?;
    let vocab = model.vocab();
    let cap = cfg.max_expansions_per_timestep;
    let mut cost = CostReport::default();
    let mut beam = vec![Hypothesis::empty(model.initial_state())];

    for t in 0..enc.num_frames() {
        let frame = enc.window(t, 1);
        let carried: HashSet<Vec<Token>> = beam.iter().map(|h| h.tokens.clone()).collect();
        let mut closed = Closed::new();
        let mut open: Vec<Open<M::State>> = beam
            .iter()
            .map(|h| {
                let mut by_emissions = vec![f64::NEG_INFINITY; cap];
                by_emissions[0] = h.score;
                Open {
                    tokens: h.tokens.clone(),
                    timestamps: h.timestamps.clone(),
                    by_emissions,
                    score: h.score,
                    state: LazyState::Ready(h.state.clone()),
                }
            })
            .collect();

        // Prefix step, always against the scores carried into this frame.
        let mut credits: Vec<Vec<(usize, f64)>> = vec![Vec::new(); open.len()];
        for short in beam.iter() {
            for (b, long) in beam.iter().enumerate() {
                if short.tokens.len() >= long.tokens.len()
                    || !long.tokens.starts_with(&short.tokens)
                {
                    continue;
                }
                let completion = &long.tokens[short.tokens.len()..];
                if completion.len() > MAX_PREFIX_COMPLETION {
                    cost.skipped_completions += 1;
                    continue;
                }
                if completion.len() > cap {
                    continue;
                }
                let mut state = short.state.clone();
                let mut score = short.score;
                for (j, &tok) in completion.iter().enumerate() {
                    let logits = model.joint(frame, &state).map_err(Error::at_frame(t))?;
                    cost.record_joiner_round(1, logits.float_count());
                    score += logits.row(0)[tok as usize];
                    if j + 1 < completion.len() {
                        state = model
                            .advance_state(&state, tok)
                            .map_err(Error::at_frame(t))?;
                        cost.decoder_calls += 1;
                    }
                }
                if completion.len() == cap {
                    let mut ts = long.timestamps.clone();
                    ts.truncate(short.tokens.len());
                    ts.extend(std::iter::repeat_n(t, completion.len()));
                    cost.forced_advances += 1;
                    closed.add(
                        long.tokens.clone(),
                        ts,
                        score,
                        LazyState::Ready(long.state.clone()),
                    );
                } else {
                    credits[b].push((completion.len(), score));
                }
            }
        }
        for (h, extra) in open.iter_mut().zip(credits) {
            for (emissions, g) in extra {
                h.absorb(emissions, g);
            }
        }

        while let Some(best) = (0..open.len()).min_by(|&i, &j| {
            rank(
                open[i].score,
                &open[i].tokens,
                open[j].score,
                &open[j].tokens,
            )
        }) {
            if closed.count_above(open[best].score) >= cfg.beam_size {
                break;
            }
            let top = open.swap_remove(best);
            let state = top.state.resolve(model, t, &mut cost)?;
            let logits = model.joint(frame, &state).map_err(Error::at_frame(t))?;
            cost.record_joiner_round(1, logits.float_count());
            let row = logits.row(0);
            for tok in vocab.labels() {
                let lp = row[tok as usize];
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                let mut tokens = top.tokens.clone();
                tokens.push(tok);
                if carried.contains(&tokens) {
                    continue;
                }
                let mut timestamps = top.timestamps.clone();
                timestamps.push(t);
                let (below, over) = shift_emissions(&top.by_emissions, lp);
                let next = LazyState::After(state.clone(), tok);
                if over > f64::NEG_INFINITY {
                    cost.forced_advances += 1;
                    closed.add(tokens.clone(), timestamps.clone(), over, next.clone());
                }
                let score = logsumexp(&below);
                if score > f64::NEG_INFINITY {
                    open.push(Open {
                        tokens,
                        timestamps,
                        by_emissions: below,
                        score,
                        state: next,
                    });
                }
            }
            let blank = row[vocab.blank() as usize];
            closed.add(
                top.tokens,
                top.timestamps,
                top.score + blank,
                LazyState::Ready(state),
            );
        }

        let mut survivors = closed.hyps;
        survivors.sort_by(|a, b| rank(a.score, &a.tokens, b.score, &b.tokens));
        survivors.truncate(cfg.beam_size);
        beam = survivors
            .into_iter()
            .map(|h| {
                Ok(Hypothesis {
                    state: h.state.resolve(model, t, &mut cost)?,
                    tokens: h.tokens,
                    timestamps: h.timestamps,
                    score: h.score,
                })
            })
            .collect::<Result<_>>()?;
    }

    sort_final(&mut beam, cfg.length_normalize_final);
    Ok(BeamResult {
        hypotheses: beam,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{chain_model, chain_utterance, never_blank_model};

    #[test]
    fn chain_fixture_follows_greedy_path() {
        let model = chain_model();
        let out = decode_graves_beam(&model, &chain_utterance(), &BeamConfig::new(1, 1).unwrap())
            .unwrap();
        assert_eq!(out.best().unwrap().tokens, vec![0, 1]);
        assert_eq!(out.best().unwrap().timestamps, vec![0, 1]);
    }

    #[test]
    fn empty_utterance() {
        let model = chain_model();
        let enc = EncoderOutput::empty("u", 1).unwrap();
        let out = decode_graves_beam(&model, &enc, &BeamConfig::default()).unwrap();
        assert_eq!(out.hypotheses.len(), 1);
        assert_eq!(out.hypotheses[0].score, 0.0);
    }

    #[test]
    fn cap_bounds_expansion() {
        let model = never_blank_model();
        let enc = EncoderOutput::new("u", 1, vec![0.0; 3]).unwrap();
        let cfg = BeamConfig {
            max_expansions_per_timestep: 2,
            ..BeamConfig::new(2, 1).unwrap()
        };
        let out = decode_graves_beam(&model, &enc, &cfg).unwrap();
        for h in &out.hypotheses {
            h.check_invariants(&model.vocab(), 3).unwrap();
            assert!(h.tokens.len() <= 6);
        }
    }
}
