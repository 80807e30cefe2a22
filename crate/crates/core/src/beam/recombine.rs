use std::collections::HashMap;

use super::{rank, shift_emissions, BeamConfig, PrefixPolicy, SearchHyp, MAX_PREFIX_COMPLETION};
use crate::cost::CostReport;
use crate::error::{Error, Result};
use crate::model::TransducerModel;
use crate::types::{EncoderOutput, Hypothesis, Token};

/// Merges duplicate token sequences, folds prefixes into their extensions at
/// frame `t`, and keeps the best `cfg.beam_size` hypotheses.
///
/// All inputs must sit at frame `t < T` with no emissions there yet. Mass
/// that a prefix fold pushes up to the symbol cap belongs to frame `t + 1`
/// and is not part of the result.
pub fn recombine_prune_prefix_search<M: TransducerModel>(
    model: &M,
    enc: &EncoderOutput,
    t: usize,
    hyps: Vec<Hypothesis<M::State>>,
    cfg: &BeamConfig,
    cost: &mut CostReport,
) -> Result<Vec<Hypothesis<M::State>>> {
    cfg.validate()?;
    let cap = cfg.max_expansions_per_timestep;
    let search = hyps
        .into_iter()
        .map(|h| SearchHyp::new(h, 0, cap))
        .collect();
    Ok(recombine(model, enc, t, search, cfg, cost)?
        .survivors
        .into_iter()
        .map(|s| s.hyp)
        .collect())
}

pub(crate) struct Recombined<S> {
    pub survivors: Vec<SearchHyp<S>>,
    /// Prefix-credited mass that hit the symbol cap; it sits at `t + 1`.
    pub overflow: Vec<SearchHyp<S>>,
}

pub(crate) fn recombine<M: TransducerModel>(
    model: &M,
    enc: &EncoderOutput,
    t: usize,
    hyps: Vec<SearchHyp<M::State>>,
    cfg: &BeamConfig,
    cost: &mut CostReport,
) -> Result<Recombined<M::State>> {
    if hyps.is_empty() {
        return Ok(Recombined {
            survivors: hyps,
            overflow: Vec::new(),
        });
    }
    if t >= enc.num_frames() {
        return Err(Error::InvalidConfig(format!(
            "prefix search at frame {t} of a {}-frame utterance",
            enc.num_frames()
        )));
    }
    let mut merged = merge_duplicates(hyps);
    let overflow = match cfg.prefix_policy {
        PrefixPolicy::Suppress => credit_parents(model, enc, t, &mut merged, cost)?,
        PrefixPolicy::RemovePrefix => {
            merged = transfer_prefixes(model, enc, t, merged, cost)?;
            Vec::new()
        }
    };
    prune(&mut merged, cfg.beam_size);
    Ok(Recombined {
        survivors: merged,
        overflow,
    })
}

/// Sums the probabilities of hypotheses with identical tokens. The survivor
/// keeps the timestamps of the stronger copy.
pub(crate) fn merge_duplicates<S>(hyps: Vec<SearchHyp<S>>) -> Vec<SearchHyp<S>> {
    let mut index: HashMap<Vec<Token>, usize> = HashMap::with_capacity(hyps.len());
    let mut out: Vec<SearchHyp<S>> = Vec::with_capacity(hyps.len());
    for mut h in hyps {
        match index.get(&h.hyp.tokens) {
            Some(&i) => {
                let kept = &mut out[i];
                if h.hyp.score > kept.hyp.score {
                    std::mem::swap(&mut kept.hyp, &mut h.hyp);
                }
                kept.absorb(&h.by_emissions);
                for tok in h.suppressed {
                    if !kept.suppressed.contains(&tok) {
                        kept.suppressed.push(tok);
                    }
                }
            }
            None => {
                index.insert(h.hyp.tokens.clone(), out.len());
                out.push(h);
            }
        }
    }
    out
}

pub(crate) fn prune<S>(hyps: &mut Vec<SearchHyp<S>>, beam: usize) {
    hyps.sort_by(|a, b| rank(a.hyp.score, &a.hyp.tokens, b.hyp.score, &b.hyp.tokens));
    hyps.truncate(beam);
}

fn credit_parents<M: TransducerModel>(
    model: &M,
    enc: &EncoderOutput,
    t: usize,
    hyps: &mut [SearchHyp<M::State>],
    cost: &mut CostReport,
) -> Result<Vec<SearchHyp<M::State>>> {
    let index: HashMap<&[Token], usize> = hyps
        .iter()
        .enumerate()
        .map(|(i, h)| (h.hyp.tokens.as_slice(), i))
        .collect();
    // (child, parent) pairs one token apart.
    let mut links: Vec<(usize, usize)> = hyps
        .iter()
        .enumerate()
        .filter_map(|(c, h)| {
            let (_, head) = h.hyp.tokens.split_last()?;
            index.get(head).map(|&p| (c, p))
        })
        .collect();
    if links.is_empty() {
        return Ok(Vec::new());
    }
    let mut parents: Vec<usize> = links.iter().map(|&(_, p)| p).collect();
    parents.sort_unstable();
    parents.dedup();
    let frame = enc.window(t, 1);
    let requests: Vec<_> = parents
        .iter()
        .map(|&p| (frame, &hyps[p].hyp.state))
        .collect();
    let logits = model.joint_batched(&requests).map_err(Error::at_frame(t))?;
    let floats = logits.iter().map(|l| l.float_count()).sum();
    cost.record_joiner_round(parents.len(), floats);
    let row_of: HashMap<usize, &[f64]> = parents
        .iter()
        .zip(&logits)
        .map(|(&p, l)| (p, l.row(0)))
        .collect();

    // Shorter hypotheses first so chained credits carry their own gains.
    links.sort_by_key(|&(c, _)| hyps[c].hyp.tokens.len());
    let mut overflow = Vec::new();
    for (c, p) in links {
        let token = *hyps[c].hyp.tokens.last().expect("children are non-empty");
        let (below, over) = shift_emissions(&hyps[p].by_emissions, row_of[&p][token as usize]);
        if over > f64::NEG_INFINITY {
            let mut timestamps = hyps[p].hyp.timestamps.clone();
            timestamps.push(t);
            let forced = Hypothesis {
                tokens: hyps[c].hyp.tokens.clone(),
                timestamps,
                score: over,
                state: hyps[c].hyp.state.clone(),
            };
            overflow.push(SearchHyp::new(forced, 0, below.len()));
        }
        hyps[c].absorb(&below);
        hyps[p].suppressed.push(token);
    }
    Ok(overflow)
}

/// Credits every strict prefix's mass to its extensions and drops the prefix.
/// Mass that would cross the symbol cap is not carried.
fn transfer_prefixes<M: TransducerModel>(
    model: &M,
    enc: &EncoderOutput,
    t: usize,
    hyps: Vec<SearchHyp<M::State>>,
    cost: &mut CostReport,
) -> Result<Vec<SearchHyp<M::State>>> {
    let original: Vec<Vec<f64>> = hyps.iter().map(|h| h.by_emissions.clone()).collect();
    let mut gains: Vec<Vec<Vec<f64>>> = vec![Vec::new(); hyps.len()];
    let mut absorbed = vec![false; hyps.len()];
    let frame = enc.window(t, 1);
    for (a, short) in hyps.iter().enumerate() {
        for (b, long) in hyps.iter().enumerate() {
            let (sa, sb) = (&short.hyp.tokens, &long.hyp.tokens);
            if sa.len() >= sb.len() || !sb.starts_with(sa) {
                continue;
            }
            let completion = &sb[sa.len()..];
            if completion.len() > MAX_PREFIX_COMPLETION {
                cost.skipped_completions += 1;
                continue;
            }
            let mut state = short.hyp.state.clone();
            let mut mass = original[a].clone();
            for (j, &tok) in completion.iter().enumerate() {
                let logits = model.joint(frame, &state).map_err(Error::at_frame(t))?;
                cost.record_joiner_round(1, logits.float_count());
                mass = shift_emissions(&mass, logits.row(0)[tok as usize]).0;
                if j + 1 < completion.len() {
                    state = model
                        .advance_state(&state, tok)
                        .map_err(Error::at_frame(t))?;
                    cost.decoder_calls += 1;
                }
            }
            gains[b].push(mass);
            absorbed[a] = true;
        }
    }
    Ok(hyps
        .into_iter()
        .zip(gains)
        .zip(absorbed)
        .filter(|(_, gone)| !gone)
        .map(|((mut h, extra), _)| {
            for g in extra {
                h.absorb(&g);
            }
            h
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logprob::log_add;
    use crate::synth::{build_table_model, ContextState, TableModel, TableSpec};
    use crate::types::Vocabulary;

    /// V = {a=0, b=1, blank=2}, k=1, one key; P(a | BOS) = 0.25.
    fn quarter_model() -> TableModel {
        let vocab = Vocabulary::with_trailing_blank(3).unwrap();
        let mut spec = TableSpec::new(vocab, 1, 1).unwrap();
        let row = |p: [f32; 3]| p.iter().map(|x| x.ln()).collect::<Vec<_>>();
        spec.set_row(&[], 0, row([0.25, 0.25, 0.5])).unwrap();
        spec.set_row(&[0], 0, row([0.1, 0.2, 0.7])).unwrap();
        spec.set_row(&[1], 0, row([0.3, 0.1, 0.6])).unwrap();
        build_table_model(spec).unwrap()
    }

    fn hyp(model: &TableModel, tokens: &[Token], score: f64) -> Hypothesis<ContextState> {
        Hypothesis {
            tokens: tokens.to_vec(),
            timestamps: vec![0; tokens.len()],
            score,
            state: ContextState::from_history(&model.vocab(), 1, tokens),
        }
    }

    fn enc() -> EncoderOutput {
        EncoderOutput::new("u", 1, vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn duplicates_sum() {
        let model = quarter_model();
        let mut cost = CostReport::default();
        let out = recombine_prune_prefix_search(
            &model,
            &enc(),
            0,
            vec![
                hyp(&model, &[1], 0.2f64.ln()),
                hyp(&model, &[1], 0.3f64.ln()),
            ],
            &BeamConfig::new(4, 1).unwrap(),
            &mut cost,
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0].score - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn prefix_mass_moves_to_extension() {
        let model = quarter_model();
        let (s0, s1) = (0.3f64.ln(), 0.1f64.ln());
        let expected = log_add(s1, s0 + 0.25f64.ln());
        for policy in [PrefixPolicy::RemovePrefix, PrefixPolicy::Suppress] {
            let cfg = BeamConfig {
                prefix_policy: policy,
                ..BeamConfig::new(4, 1).unwrap()
            };
            let mut cost = CostReport::default();
            let out = recombine(
                &model,
                &enc(),
                0,
                vec![
                    SearchHyp::new(hyp(&model, &[], s0), 0, 10),
                    SearchHyp::new(hyp(&model, &[0], s1), 0, 10),
                ],
                &cfg,
                &mut cost,
            )
            .unwrap()
            .survivors;
            let a = out.iter().find(|h| h.hyp.tokens == [0]).unwrap();
            assert!((a.hyp.score - expected).abs() < 1e-6, "{policy:?}");
            let prefix = out.iter().find(|h| h.hyp.tokens.is_empty());
            match policy {
                PrefixPolicy::RemovePrefix => assert!(prefix.is_none()),
                PrefixPolicy::Suppress => {
                    let p = prefix.unwrap();
                    assert_eq!(p.hyp.score, s0);
                    assert_eq!(p.suppressed, vec![0]);
                }
            }
        }
    }

    #[test]
    fn chained_credit_uses_augmented_parent() {
        let model = quarter_model();
        let cfg = BeamConfig::new(8, 1).unwrap();
        let mut cost = CostReport::default();
        let (s0, s1, s2) = (0.3f64.ln(), 0.1f64.ln(), 0.05f64.ln());
        let out = recombine(
            &model,
            &enc(),
            0,
            vec![
                SearchHyp::new(hyp(&model, &[0, 1], s2), 0, 10),
                SearchHyp::new(hyp(&model, &[], s0), 0, 10),
                SearchHyp::new(hyp(&model, &[0], s1), 0, 10),
            ],
            &cfg,
            &mut cost,
        )
        .unwrap()
        .survivors;
        let a = log_add(s1, s0 + 0.25f64.ln());
        let ab = log_add(s2, a + 0.2f64.ln());
        let got = out.iter().find(|h| h.hyp.tokens == [0, 1]).unwrap();
        assert!((got.hyp.score - ab).abs() < 1e-6);
        assert_eq!(cost.joiner_calls, 1, "parents share one batched round");
    }

    #[test]
    fn beam_one_keeps_the_best() {
        let model = quarter_model();
        let mut cost = CostReport::default();
        let out = recombine_prune_prefix_search(
            &model,
            &enc(),
            0,
            vec![
                hyp(&model, &[1], -3.0),
                hyp(&model, &[0, 0], -1.0),
                hyp(&model, &[1, 1], -2.0),
            ],
            &BeamConfig::new(1, 1).unwrap(),
            &mut cost,
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].tokens, vec![0, 0]);
    }

    #[test]
    fn empty_in_empty_out() {
        let model = quarter_model();
        let mut cost = CostReport::default();
        let out = recombine_prune_prefix_search(
            &model,
            &enc(),
            0,
            Vec::new(),
            &BeamConfig::default(),
            &mut cost,
        )
        .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn long_completions_are_skipped_and_logged() {
        let model = quarter_model();
        let cfg = BeamConfig {
            prefix_policy: PrefixPolicy::RemovePrefix,
            ..BeamConfig::new(8, 1).unwrap()
        };
        let mut cost = CostReport::default();
        let out = recombine(
            &model,
            &enc(),
            0,
            vec![
                SearchHyp::new(hyp(&model, &[], -1.0), 0, 10),
                SearchHyp::new(hyp(&model, &[0, 1, 0, 1, 0], -4.0), 0, 10),
            ],
            &cfg,
            &mut cost,
        )
        .unwrap()
        .survivors;
        assert_eq!(out.len(), 2);
        assert_eq!(cost.skipped_completions, 1);
    }

    #[test]
    fn credit_reaching_the_cap_moves_to_next_frame() {
        let model = quarter_model();
        let cfg = BeamConfig {
            max_expansions_per_timestep: 1,
            ..BeamConfig::new(4, 1).unwrap()
        };
        let mut cost = CostReport::default();
        let (s0, s1) = (0.3f64.ln(), 0.1f64.ln());
        let out = recombine(
            &model,
            &enc(),
            0,
            vec![
                SearchHyp::new(hyp(&model, &[], s0), 0, 1),
                SearchHyp::new(hyp(&model, &[0], s1), 0, 1),
            ],
            &cfg,
            &mut cost,
        )
        .unwrap();
        let a = out.survivors.iter().find(|h| h.hyp.tokens == [0]).unwrap();
        assert_eq!(a.hyp.score, s1);
        assert_eq!(out.overflow.len(), 1);
        assert_eq!(out.overflow[0].hyp.tokens, vec![0]);
        assert!((out.overflow[0].hyp.score - (s0 + 0.25f64.ln())).abs() < 1e-6);
    }
}
