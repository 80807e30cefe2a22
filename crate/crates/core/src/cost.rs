//! Decode cost accounting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Counters collected while decoding. Joiner calls count synchronization
/// rounds: one per `joint` or `joint_batched` invocation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub joiner_calls: u64,
    /// Frame x decoder-state pairs pushed through the joiner.
    pub frames_evaluated: u64,
    pub decoder_calls: u64,
    /// Histogram of time-pointer jumps, one entry per decode-loop iteration.
    pub jump_events: BTreeMap<usize, u64>,
    /// Largest logit buffer held at once, in floats.
    pub peak_logit_floats: u64,
    /// Frame advances forced by the per-frame symbol cap.
    pub forced_advances: u64,
    /// Prefix completions skipped for exceeding the completion-length cap.
    pub skipped_completions: u64,
}

impl CostReport {
    pub fn record_jump(&mut self, jump: usize) {
        *self.jump_events.entry(jump).or_insert(0) += 1;
    }

    pub fn observe_logits(&mut self, floats: usize) {
        self.peak_logit_floats = self.peak_logit_floats.max(floats as u64);
    }

    /// One joiner round covering `frames` frame/state pairs and `floats` logits.
    pub fn record_joiner_round(&mut self, frames: usize, floats: usize) {
        self.joiner_calls += 1;
        self.frames_evaluated += frames as u64;
        self.observe_logits(floats);
    }

    pub fn loop_iterations(&self) -> u64 {
        self.jump_events.values().sum()
    }

    /// Adds `other` into `self`. Peak memory combines by max, everything else sums.
    pub fn merge(&mut self, other: &CostReport) {
        self.joiner_calls += other.joiner_calls;
        self.frames_evaluated += other.frames_evaluated;
        self.decoder_calls += other.decoder_calls;
        for (&jump, &count) in &other.jump_events {
            *self.jump_events.entry(jump).or_insert(0) += count;
        }
        self.peak_logit_floats = self.peak_logit_floats.max(other.peak_logit_floats);
        self.forced_advances += other.forced_advances;
        self.skipped_completions += other.skipped_completions;
    }
}

impl<'a> std::iter::Sum<&'a CostReport> for CostReport {
    fn sum<I: Iterator<Item = &'a CostReport>>(iter: I) -> Self {
        iter.fold(CostReport::default(), |mut acc, c| {
            acc.merge(c);
            acc
        })
    }
}
