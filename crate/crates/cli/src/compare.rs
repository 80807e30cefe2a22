//! Token-level diff of two decode runs.

use std::path::Path;

use serde::Serialize;
use wind_decode::{argmax_with_tiebreak, Token, TransducerModel};

use crate::error::{CliError, CliResult};
use crate::report::{read_hyps, HypRecord};
use crate::run::{load_corpus, load_model, RunManifest};

#[derive(Debug, Serialize)]
pub struct Side {
    pub algo: &'static str,
    pub token: Option<Token>,
    pub timestamp: Option<usize>,
    /// Per-frame argmax of the side's joiner window at the divergence frame,
    /// under the decoder state both sides share there.
    pub window_argmax: Vec<Token>,
}

#[derive(Debug, Serialize)]
pub struct Divergence {
    pub utterance_id: String,
    pub token_index: usize,
    pub frame: usize,
    pub a: Side,
    pub b: Side,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Identical { identical: bool, utterances: usize },
    Diverged(Box<Divergence>),
}

pub fn compare_runs(dir_a: &Path, dir_b: &Path) -> CliResult<Outcome> {
    let a = read_hyps(&dir_a.join("hyps.jsonl"))?;
    let b = read_hyps(&dir_b.join("hyps.jsonl"))?;
    let ids = |r: &[HypRecord]| r.iter().map(|h| h.utterance_id.clone()).collect::<Vec<_>>();
    if ids(&a) != ids(&b) {
        return Err(CliError::Config(
            "the two runs cover different utterances".into(),
        ));
    }
    let Some((ra, rb)) = a
        .iter()
        .zip(&b)
        .find(|(x, y)| x.tokens != y.tokens || x.timestamps != y.timestamps)
    else {
        return Ok(Outcome::Identical {
            identical: true,
            utterances: a.len(),
        });
    };

    let pairs = |r: &HypRecord| {
        r.tokens
            .iter()
            .copied()
            .zip(r.timestamps.iter().copied())
            .collect::<Vec<_>>()
    };
    let (pa, pb) = (pairs(ra), pairs(rb));
    let index = pa.iter().zip(&pb).take_while(|(x, y)| x == y).count();
    let (ea, eb) = (pa.get(index).copied(), pb.get(index).copied());
    let frame = match (ea, eb) {
        (Some((_, ta)), Some((_, tb))) => ta.min(tb),
        (Some((_, t)), None) | (None, Some((_, t))) => t,
        (None, None) => unreachable!("records differ"),
    };
    let prefix = &ra.tokens[..index];
    let side = |dir: &Path, entry: Option<(Token, usize)>| -> CliResult<Side> {
        let run = RunManifest::load(&dir.join("run.json"))?;
        let model = load_model(&run.model)?;
        let corpus = load_corpus(&model, &run.corpus)?;
        let utt = corpus
            .iter()
            .find(|u| u.encoder_output.utterance_id == ra.utterance_id)
            .ok_or_else(|| {
                CliError::Config(format!("{} not in the run's corpus", ra.utterance_id))
            })?;
        let mut state = model.initial_state();
        for &tok in prefix {
            state = model.advance_state(&state, tok)?;
        }
        let enc = &utt.encoder_output;
        let width = if run.algo.uses_window() {
            run.window
        } else {
            1
        };
        let n = width.min(enc.num_frames().saturating_sub(frame));
        let logits = model.joint(enc.window(frame, n), &state)?;
        let window_argmax = logits
            .rows()
            .map(|row| argmax_with_tiebreak(row).map(|i| i as Token))
            .collect::<wind_decode::Result<_>>()?;
        Ok(Side {
            algo: run.algo.label(),
            token: entry.map(|e| e.0),
            timestamp: entry.map(|e| e.1),
            window_argmax,
        })
    };
    Ok(Outcome::Diverged(Box::new(Divergence {
        utterance_id: ra.utterance_id.clone(),
        token_index: index,
        frame,
        a: side(dir_a, ea)?,
        b: side(dir_b, eb)?,
    })))
}
