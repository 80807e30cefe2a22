use std::collections::BTreeMap;

use super::recombine::{merge_duplicates, recombine};
use super::{
    first_emission_logprobs, shift_emissions, sort_final, BeamConfig, BeamResult, SearchHyp,
};
use crate::cost::CostReport;
use crate::error::{Error, Result};
use crate::model::TransducerModel;
use crate::types::{EncoderOutput, Hypothesis, Token};

/// Windowed beam search.
///
/// Hypotheses are bucketed by the frame they sit at. The lowest bucket is
/// popped, recombined, and every survivor is scored against the next
/// `min(N, T - t)` frames in one batched joiner round. Each survivor then
/// takes its top `K` first emissions over the whole window: a label at
/// offset `j` moves it to bucket `t + j`, a window of blanks to `t + n`.
/// Mass that reaches the per-frame symbol cap moves on one frame further.
pub fn decode_wind_beam<M: TransducerModel>(
    model: &M,
    enc: &EncoderOutput,
    cfg: &BeamConfig,
) -> Result<BeamResult<M::State>> {
    cfg.validate()?;
    let vocab = model.vocab();
    let cap = cfg.max_expansions_per_timestep;
    let num_frames = enc.num_frames();
    let mut cost = CostReport::default();
    let mut buckets: BTreeMap<usize, Vec<SearchHyp<M::State>>> = BTreeMap::new();
    buckets.insert(
        0,
        vec![SearchHyp::new(
            Hypothesis::empty(model.initial_state()),
            0,
            cap,
        )],
    );

    while let Some((&t, _)) = buckets.first_key_value() {
        if t == num_frames {
            break;
        }
        let popped = buckets.remove(&t).expect("key was just observed");
        let recombined = recombine(model, enc, t, popped, cfg, &mut cost)?;
        for forced in recombined.overflow {
            cost.forced_advances += 1;
            insert(&mut buckets, t + 1, num_frames, forced)?;
        }
        let hyps = recombined.survivors;
        if hyps.is_empty() {
            continue;
        }
        let n = cfg.window_size.min(num_frames - t);
        let window = enc.window(t, n);
        let requests: Vec<_> = hyps.iter().map(|h| (window, &h.hyp.state)).collect();
        let logits = model.joint_batched(&requests).map_err(Error::at_frame(t))?;
        let floats = logits.iter().map(|l| l.float_count()).sum();
        cost.record_joiner_round(n * hyps.len(), floats);

        let mut labelled: Vec<(usize, usize, Token, f64)> = Vec::new();
        for (b, (h, block)) in hyps.iter().zip(&logits).enumerate() {
            let fe = first_emission_logprobs(block, &vocab)?;
            let mut options: Vec<(usize, Token, f64)> = fe
                .entries()
                .filter(|&(offset, tok, lp)| {
                    lp > f64::NEG_INFINITY && !(offset == 0 && h.suppressed.contains(&tok))
                })
                .collect();
            options.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
            options.truncate(cfg.beam_size);
            for (offset, tok, lp) in options {
                if vocab.is_blank(tok) {
                    let mut next = h.hyp.clone();
                    next.score += lp;
                    cost.record_jump(n);
                    insert(
                        &mut buckets,
                        t + n,
                        num_frames,
                        SearchHyp::new(next, 0, cap),
                    )?;
                } else {
                    labelled.push((b, offset, tok, lp));
                }
            }
        }
        if labelled.is_empty() {
            continue;
        }

        let advance: Vec<_> = labelled
            .iter()
            .map(|&(b, _, tok, _)| (&hyps[b].hyp.state, tok))
            .collect();
        let states = model
            .advance_batched(&advance)
            .map_err(Error::at_frame(t))?;
        cost.decoder_calls += states.len() as u64;
        for ((b, offset, tok, lp), state) in labelled.into_iter().zip(states) {
            let parent = &hyps[b];
            let frame = t + offset;
            let mut tokens = parent.hyp.tokens.clone();
            tokens.push(tok);
            let mut timestamps = parent.hyp.timestamps.clone();
            timestamps.push(frame);
            let child = Hypothesis {
                tokens,
                timestamps,
                score: parent.hyp.score + lp,
                state,
            };
            // Mass by emissions at `frame` before this token: the parent's own
            // split when staying put, all at zero after a jump.
            let before = if offset == 0 {
                parent.by_emissions.clone()
            } else {
                let mut fresh = vec![f64::NEG_INFINITY; cap];
                fresh[0] = parent.hyp.score;
                fresh
            };
            let (below, over) = shift_emissions(&before, lp);
            if over > f64::NEG_INFINITY {
                let mut forced = child.clone();
                forced.score = over;
                cost.forced_advances += 1;
                cost.record_jump(offset + 1);
                insert(
                    &mut buckets,
                    frame + 1,
                    num_frames,
                    SearchHyp::new(forced, 0, cap),
                )?;
            }
            if let Some(next) = SearchHyp::from_split(child, below) {
                cost.record_jump(offset);
                insert(&mut buckets, frame, num_frames, next)?;
            }
        }
    }

    let finished = buckets.remove(&num_frames).unwrap_or_default();
    let mut finals: Vec<Hypothesis<M::State>> = merge_duplicates(finished)
        .into_iter()
        .map(|h| h.hyp)
        .collect();
    sort_final(&mut finals, cfg.length_normalize_final);
    finals.truncate(cfg.beam_size);
    Ok(BeamResult {
        hypotheses: finals,
        cost,
    })
}

fn insert<S>(
    buckets: &mut BTreeMap<usize, Vec<SearchHyp<S>>>,
    key: usize,
    num_frames: usize,
    hyp: SearchHyp<S>,
) -> Result<()> {
    if key > num_frames {
        return Err(Error::InvalidConfig(format!(
            "hypothesis bucket {key} beyond final frame {num_frames}"
        )));
    }
    buckets.entry(key).or_default().push(hyp);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::{decode_sequential, GreedyConfig};
    use crate::testing::{chain_model, chain_utterance, never_blank_model};

    #[test]
    fn empty_utterance_gives_empty_hypothesis() {
        let model = chain_model();
        let enc = EncoderOutput::empty("u", 1).unwrap();
        let out = decode_wind_beam(&model, &enc, &BeamConfig::new(4, 4).unwrap()).unwrap();
        assert_eq!(out.hypotheses.len(), 1);
        assert!(out.hypotheses[0].tokens.is_empty());
        assert_eq!(out.hypotheses[0].score, 0.0);
    }

    #[test]
    fn degenerate_beam_is_greedy() {
        let model = chain_model();
        let enc = chain_utterance();
        let out = decode_wind_beam(&model, &enc, &BeamConfig::new(1, 1).unwrap()).unwrap();
        let greedy = decode_sequential(&model, &enc, &GreedyConfig::default()).unwrap();
        let best = out.best().unwrap();
        assert_eq!(best.tokens, greedy.hypothesis.tokens);
        assert_eq!(best.timestamps, greedy.hypothesis.timestamps);
        assert_eq!(best.score, greedy.hypothesis.score);
    }

    #[test]
    fn terminates_without_blanks() {
        let model = never_blank_model();
        let enc = EncoderOutput::new("u", 1, vec![0.0; 4]).unwrap();
        let cfg = BeamConfig {
            max_expansions_per_timestep: 2,
            ..BeamConfig::new(3, 2).unwrap()
        };
        let out = decode_wind_beam(&model, &enc, &cfg).unwrap();
        assert!(!out.hypotheses.is_empty());
        assert!(out.cost.forced_advances > 0);
        for h in &out.hypotheses {
            h.check_invariants(&model.vocab(), 4).unwrap();
        }
    }

    #[test]
    fn results_are_sorted_and_bounded() {
        let model = chain_model();
        let enc = chain_utterance();
        let out = decode_wind_beam(&model, &enc, &BeamConfig::new(3, 2).unwrap()).unwrap();
        assert!(out.hypotheses.len() <= 3);
        assert!(out.hypotheses.windows(2).all(|w| w[0].score >= w[1].score));
    }
}
