//! The transducer model contract. Decoders see a model only through this trait.

use std::fmt;

use crate::error::Result;
use crate::types::{FrameWindow, Token, Vocabulary, WindowLogits};

/// Decoder + joiner of an RNN-Transducer.
///
/// Every method is deterministic. Evaluating `joint` on a window must equal
/// stacking single-frame evaluations row by row; windowed decoding relies on
/// it. States are values: advancing one never changes another.
pub trait TransducerModel: Send + Sync {
    type State: Clone + fmt::Debug + Send + Sync;

    fn vocab(&self) -> Vocabulary;

    fn initial_state(&self) -> Self::State;

    fn advance_state(&self, state: &Self::State, token: Token) -> Result<Self::State>;

    /// Normalized log-probabilities for each frame of `window` under `state`.
    fn joint(&self, window: FrameWindow<'_>, state: &Self::State) -> Result<WindowLogits>;

    /// Same as mapping `joint` over `requests`; overridable to fuse work.
    fn joint_batched(
        &self,
        requests: &[(FrameWindow<'_>, &Self::State)],
    ) -> Result<Vec<WindowLogits>> {
        requests
            .iter()
            .map(|(window, state)| self.joint(*window, state))
            .collect()
    }

    /// Same as mapping `advance_state` over `requests`.
    fn advance_batched(&self, requests: &[(&Self::State, Token)]) -> Result<Vec<Self::State>> {
        requests
            .iter()
            .map(|(state, token)| self.advance_state(state, *token))
            .collect()
    }
}

impl<M: TransducerModel + ?Sized> TransducerModel for &M {
    type State = M::State;

    fn vocab(&self) -> Vocabulary {
        (**self).vocab()
    }

    fn initial_state(&self) -> Self::State {
        (**self).initial_state()
    }

    fn advance_state(&self, state: &Self::State, token: Token) -> Result<Self::State> {
        (**self).advance_state(state, token)
    }

    fn joint(&self, window: FrameWindow<'_>, state: &Self::State) -> Result<WindowLogits> {
        (**self).joint(window, state)
    }

    fn joint_batched(
        &self,
        requests: &[(FrameWindow<'_>, &Self::State)],
    ) -> Result<Vec<WindowLogits>> {
        (**self).joint_batched(requests)
    }

    fn advance_batched(&self, requests: &[(&Self::State, Token)]) -> Result<Vec<Self::State>> {
        (**self).advance_batched(requests)
    }
}
