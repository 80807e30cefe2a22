//! Label-looping batched greedy decoding.
//!
//! Each outer step has two phases. In the blank-skipping phase every active
//! utterance without a pending label evaluates its next window, all of them
//! in one `joint_batched` round, until each one has either found a non-blank
//! argmax or run out of frames. In the label phase every utterance holding a
//! pending label emits it, and all decoder states advance in one batched
//! round. Finished utterances are masked out of later rounds.

use crate::cost::CostReport;
use crate::error::{Error, Result};
use crate::greedy::{scan_window, GreedyConfig, GreedyResult, WindowScan};
use crate::model::TransducerModel;
use crate::types::{EncoderOutput, FrameWindow, Hypothesis, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BatchVariant {
    /// One frame per utterance per round.
    Baseline,
    /// `window_size` frames per utterance per round.
    Wind,
}

#[derive(Debug, Clone)]
pub struct BatchOutput<S> {
    /// Per-utterance results in input order. Their cost reports count the
    /// rounds each utterance took part in.
    pub results: Vec<GreedyResult<S>>,
    /// Whole-batch cost: joiner and decoder calls are synchronization rounds.
    pub cost: CostReport,
}

/// Per-utterance slot of the batch.
#[derive(Debug)]
struct Lane<'a, S> {
    enc: &'a EncoderOutput,
    t: usize,
    emitted_here: usize,
    pending: Option<(usize, Token)>,
    hyp: Hypothesis<S>,
    cost: CostReport,
}

impl<S> Lane<'_, S> {
    fn active(&self) -> bool {
        self.t < self.enc.num_frames()
    }

    fn wants_frames(&self) -> bool {
        self.active() && self.pending.is_none()
    }
}

pub fn decode_batch<M: TransducerModel>(
    model: &M,
    batch: &[EncoderOutput],
    cfg: &GreedyConfig,
    variant: BatchVariant,
) -> Result<BatchOutput<M::State>> {
    cfg.validate()?;
    let Some(first) = batch.first() else {
        return Err(Error::InvalidConfig("empty batch".into()));
    };
    if let Some(odd) = batch.iter().find(|e| e.dim() != first.dim()) {
        return Err(Error::BatchMismatch(format!(
            "utterance {} has feature dim {}, batch uses {}",
            odd.utterance_id,
            odd.dim(),
            first.dim()
        )));
    }
    let window = match variant {
        BatchVariant::Baseline => 1,
        BatchVariant::Wind => cfg.window_size,
    };
    let vocab = model.vocab();
    let mut lanes: Vec<Lane<'_, M::State>> = batch
        .iter()
        .map(|enc| Lane {
            enc,
            t: 0,
            emitted_here: 0,
            pending: None,
            hyp: Hypothesis::empty(model.initial_state()),
            cost: CostReport::default(),
        })
        .collect();
    let mut batch_cost = CostReport::default();

    loop {
        // Blank skipping.
        loop {
            let idle: Vec<usize> = (0..lanes.len())
                .filter(|&b| lanes[b].wants_frames())
                .collect();
            if idle.is_empty() {
                break;
            }
            let windows: Vec<FrameWindow<'_>> = idle
                .iter()
                .map(|&b| {
                    let lane = &lanes[b];
                    let n = window.min(lane.enc.num_frames() - lane.t);
                    lane.enc.window(lane.t, n)
                })
                .collect();
            let requests: Vec<_> = idle
                .iter()
                .zip(&windows)
                .map(|(&b, w)| (*w, &lanes[b].hyp.state))
                .collect();
            let outputs = model
                .joint_batched(&requests)
                .map_err(Error::at_frame(lanes[idle[0]].t))?;
            let frames: usize = windows.iter().map(FrameWindow::len).sum();
            let floats: usize = outputs.iter().map(|o| o.float_count()).sum();
            batch_cost.record_joiner_round(frames, floats);

            for ((&b, logits), w) in idle.iter().zip(&outputs).zip(&windows) {
                let lane = &mut lanes[b];
                lane.cost.record_joiner_round(w.len(), logits.float_count());
                match scan_window(logits, &vocab, &mut lane.hyp.score)? {
                    WindowScan::AllBlank => {
                        lane.t += w.len();
                        lane.emitted_here = 0;
                        lane.cost.record_jump(w.len());
                    }
                    WindowScan::Emit { offset, token } => {
                        lane.t += offset;
                        if offset > 0 {
                            lane.emitted_here = 0;
                        }
                        lane.pending = Some((offset, token));
                    }
                }
            }
        }

        // Label advance.
        let ready: Vec<usize> = (0..lanes.len())
            .filter(|&b| lanes[b].pending.is_some())
            .collect();
        if ready.is_empty() {
            break;
        }
        let requests: Vec<_> = ready
            .iter()
            .map(|&b| {
                let lane = &lanes[b];
                (
                    &lane.hyp.state,
                    lane.pending.expect("ready lanes hold a label").1,
                )
            })
            .collect();
        let states = model
            .advance_batched(&requests)
            .map_err(Error::at_frame(lanes[ready[0]].t))?;
        batch_cost.decoder_calls += 1;

        for (&b, state) in ready.iter().zip(states) {
            let lane = &mut lanes[b];
            let (offset, token) = lane.pending.take().expect("ready lanes hold a label");
            lane.hyp.tokens.push(token);
            lane.hyp.timestamps.push(lane.t);
            lane.hyp.state = state;
            lane.cost.decoder_calls += 1;
            lane.emitted_here += 1;
            let mut jump = offset;
            if lane.emitted_here >= cfg.max_symbols_per_frame {
                lane.t += 1;
                lane.emitted_here = 0;
                jump += 1;
                lane.cost.forced_advances += 1;
                batch_cost.forced_advances += 1;
            }
            lane.cost.record_jump(jump);
        }
    }

    for lane in &lanes {
        for (&jump, &count) in &lane.cost.jump_events {
            *batch_cost.jump_events.entry(jump).or_insert(0) += count;
        }
    }
    let results = lanes
        .into_iter()
        .map(|lane| GreedyResult {
            hypothesis: lane.hyp,
            cost: lane.cost,
        })
        .collect();
    Ok(BatchOutput {
        results,
        cost: batch_cost,
    })
}
