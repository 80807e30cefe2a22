use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::table::check_token;
use super::{mix64, ContextState, SyntheticSource};
use crate::error::{Error, Result};
use crate::logprob::log_normalize;
use crate::model::TransducerModel;
use crate::types::{FrameWindow, Token, Vocabulary, WindowLogits};

pub const MAX_SEEDED_CONTEXT: usize = 4;
pub const DEFAULT_FEATURE_DIM: usize = 8;
const CONTEXT_SCALE: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeededParams {
    pub seed: u64,
    pub vocab: Vocabulary,
    pub context_len: usize,
    /// Added to the blank logit; larger values mean sparser emissions.
    pub blank_bias: f64,
    /// Lag-one correlation of synthesized encoder features, in `[0, 1]`.
    pub smoothness: f64,
    pub feature_dim: usize,
}

impl SeededParams {
    pub fn new(seed: u64, vocab: Vocabulary, context_len: usize) -> Self {
        Self {
            seed,
            vocab,
            context_len,
            blank_bias: 3.0,
            smoothness: 0.5,
            feature_dim: DEFAULT_FEATURE_DIM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.context_len > MAX_SEEDED_CONTEXT {
            return Err(Error::InvalidConfig(format!(
                "context length {} exceeds {MAX_SEEDED_CONTEXT}",
                self.context_len
            )));
        }
        if !self.blank_bias.is_finite() {
            return Err(Error::InvalidConfig("blank bias must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.smoothness) {
            return Err(Error::InvalidConfig(format!(
                "smoothness {} outside [0, 1]",
                self.smoothness
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidConfig(
                "feature dimension must be positive".into(),
            ));
        }
        (self.vocab.size() as u64)
            .checked_pow(self.context_len as u32)
            .filter(|&n| n <= usize::MAX as u64)
            .ok_or_else(|| Error::InvalidConfig("context space overflows".into()))?;
        Ok(())
    }
}

/// Pseudo-random linear joiner with a hashed per-context bias.
///
/// Logits for frame `x` under context `c` are `W x + e(c) + blank_bias * [v = blank]`,
/// where `W` is drawn once from the seed and `e(c)` is re-derived on demand
/// from `(seed, c)`, so arbitrarily large context spaces cost nothing to hold.
#[derive(Debug, Clone)]
pub struct SeededModel {
    params: SeededParams,
    weights: Vec<f64>,
}

pub fn build_seeded_model(
    seed: u64,
    vocab: Vocabulary,
    context_len: usize,
    blank_bias: f64,
    smoothness: f64,
) -> Result<SeededModel> {
    SeededModel::new(SeededParams {
        blank_bias,
        smoothness,
        ..SeededParams::new(seed, vocab, context_len)
    })
}

impl SeededModel {
    pub fn new(params: SeededParams) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix64(params.seed));
        let scale = 1.0 / (params.feature_dim as f64).sqrt();
        let weights = (0..params.vocab.size() * params.feature_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        Ok(Self { params, weights })
    }

    pub fn params(&self) -> &SeededParams {
        &self.params
    }

    fn context_bias(&self, state: &ContextState) -> Vec<f64> {
        let v = self.params.vocab.size();
        let ctx = state.index(v) as u64;
        let mut rng =
            ChaCha8Rng::seed_from_u64(mix64(self.params.seed ^ mix64(ctx.wrapping_add(1))));
        let blank = self.params.vocab.blank() as usize;
        (0..v)
            .map(|tok| {
                let g: f64 = rng.sample(StandardNormal);
                let bias = if tok == blank {
                    self.params.blank_bias
                } else {
                    0.0
                };
                g * CONTEXT_SCALE + bias
            })
            .collect()
    }

    fn frame_logits(&self, row: &[f32], bias: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.params.feature_dim {
            return Err(Error::InvalidEncoder(format!(
                "frame has {} features, model expects {}",
                row.len(),
                self.params.feature_dim
            )));
        }
        let raw: Vec<f64> = self
            .weights
            .chunks_exact(self.params.feature_dim)
            .zip(bias)
            .map(|(w, b)| {
                w.iter()
                    .zip(row)
                    .map(|(wi, &xi)| wi * f64::from(xi))
                    .sum::<f64>()
                    + b
            })
            .collect();
        log_normalize(&raw)
    }
}

impl TransducerModel for SeededModel {
    type State = ContextState;

    fn vocab(&self) -> Vocabulary {
        self.params.vocab
    }

    fn initial_state(&self) -> ContextState {
        ContextState::initial(&self.params.vocab, self.params.context_len)
    }

    fn advance_state(&self, state: &ContextState, token: Token) -> Result<ContextState> {
        check_token(&self.params.vocab, token)?;
        Ok(state.pushed(token))
    }

    fn joint(&self, window: FrameWindow<'_>, state: &ContextState) -> Result<WindowLogits> {
        let bias = self.context_bias(state);
        let mut out = Vec::with_capacity(window.len() * self.params.vocab.size());
        for row in window.rows() {
            out.extend(self.frame_logits(row, &bias)?);
        }
        WindowLogits::new(window.start(), self.params.vocab.size(), out)
    }
}

impl SyntheticSource for SeededModel {
    fn feature_dim(&self) -> usize {
        self.params.feature_dim
    }

    fn sample_frames(&self, rng: &mut dyn RngCore, num_frames: usize) -> Vec<f32> {
        let d = self.params.feature_dim;
        let rho = self.params.smoothness;
        let innovation = (1.0 - rho * rho).sqrt();
        let mut prev = vec![0.0f64; d];
        let mut out = Vec::with_capacity(num_frames * d);
        for t in 0..num_frames {
            for x in prev.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *x = if t == 0 { g } else { rho * *x + innovation * g };
                out.push(*x as f32);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EncoderOutput;

    fn utterance(model: &SeededModel, seed: u64, frames: usize) -> EncoderOutput {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EncoderOutput::new(
            "u",
            model.feature_dim(),
            model.sample_frames(&mut rng, frames),
        )
        .unwrap()
    }

    #[test]
    fn same_seed_same_logits() {
        let vocab = Vocabulary::with_trailing_blank(8).unwrap();
        let a = build_seeded_model(1, vocab, 1, 3.0, 0.5).unwrap();
        let b = build_seeded_model(1, vocab, 1, 3.0, 0.5).unwrap();
        let enc = utterance(&a, 11, 20);
        let s = a.initial_state().pushed(4);
        assert_eq!(
            a.joint(enc.window(0, 20), &s).unwrap(),
            b.joint(enc.window(0, 20), &s).unwrap()
        );
    }

    #[test]
    fn different_seed_different_logits() {
        let vocab = Vocabulary::with_trailing_blank(8).unwrap();
        let a = build_seeded_model(1, vocab, 1, 3.0, 0.5).unwrap();
        let b = build_seeded_model(2, vocab, 1, 3.0, 0.5).unwrap();
        let enc = utterance(&a, 11, 20);
        let la = a.joint(enc.window(0, 20), &a.initial_state()).unwrap();
        let lb = b.joint(enc.window(0, 20), &b.initial_state()).unwrap();
        assert!(la.rows().zip(lb.rows()).any(|(x, y)| x != y));
    }

    #[test]
    fn parameter_validation() {
        let vocab = Vocabulary::with_trailing_blank(8).unwrap();
        assert!(build_seeded_model(1, vocab, 5, 3.0, 0.5).is_err());
        assert!(build_seeded_model(1, vocab, 1, f64::NAN, 0.5).is_err());
        assert!(build_seeded_model(1, vocab, 1, 3.0, 1.5).is_err());
    }

    #[test]
    fn wrong_feature_width_is_rejected() {
        let vocab = Vocabulary::with_trailing_blank(4).unwrap();
        let model = build_seeded_model(1, vocab, 1, 3.0, 0.5).unwrap();
        let enc = EncoderOutput::new("u", 2, vec![0.0; 4]).unwrap();
        assert!(model
            .joint(enc.window(0, 2), &model.initial_state())
            .is_err());
    }

    #[test]
    fn smooth_features_are_correlated() {
        let vocab = Vocabulary::with_trailing_blank(4).unwrap();
        let model = SeededModel::new(SeededParams {
            smoothness: 0.9,
            feature_dim: 1,
            ..SeededParams::new(3, vocab, 0)
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs = model.sample_frames(&mut rng, 4000);
        let lag: f64 = xs.windows(2).map(|w| f64::from(w[0] * w[1])).sum::<f64>() / 3999.0;
        let var: f64 = xs.iter().map(|x| f64::from(x * x)).sum::<f64>() / 4000.0;
        assert!(
            (lag / var - 0.9).abs() < 0.05,
            "lag-1 correlation {}",
            lag / var
        );
    }
}
