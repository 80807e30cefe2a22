use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mix64, SyntheticSource};
use crate::error::{Error, Result};
use crate::greedy::{decode_sequential, GreedyConfig};
use crate::model::TransducerModel;
use crate::types::{EncoderOutput, Token};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticUtterance {
    pub encoder_output: EncoderOutput,
    /// The model's own sequential greedy transcript.
    pub reference_tokens: Vec<Token>,
}

/// Draws `count` utterances with lengths uniform in `frame_range`.
///
/// References are the model's sequential greedy output, so greedy decoding
/// scores zero errors and any beam-search difference comes from the search.
pub fn generate_corpus<M>(
    model: &M,
    count: usize,
    frame_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<Vec<SyntheticUtterance>>
where
    M: TransducerModel + SyntheticSource,
{
    if count == 0 {
        return Err(Error::InvalidConfig(
            "corpus must hold at least one utterance".into(),
        ));
    }
    if frame_range.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "empty frame range {}..={}",
            frame_range.start(),
            frame_range.end()
        )));
    }
    let cfg = GreedyConfig::default();
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed) ^ mix64(i as u64));
            let frames = rng.random_range(frame_range.clone());
            let data = model.sample_frames(&mut rng, frames);
            let enc = EncoderOutput::new(format!("utt-{seed}-{i:05}"), model.feature_dim(), data)?;
            let reference = decode_sequential(model, &enc, &cfg)?.hypothesis.tokens;
            Ok(SyntheticUtterance {
                encoder_output: enc,
                reference_tokens: reference,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::build_seeded_model;
    use crate::types::Vocabulary;

    #[test]
    fn zero_frame_utterance() {
        let vocab = Vocabulary::with_trailing_blank(8).unwrap();
        let model = build_seeded_model(1, vocab, 1, 3.0, 0.5).unwrap();
        let corpus = generate_corpus(&model, 1, 0..=0, 9).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus[0].encoder_output.num_frames(), 0);
        assert!(corpus[0].reference_tokens.is_empty());
    }

    #[test]
    fn rejects_degenerate_requests() {
        let vocab = Vocabulary::with_trailing_blank(8).unwrap();
        let model = build_seeded_model(1, vocab, 1, 3.0, 0.5).unwrap();
        assert!(generate_corpus(&model, 0, 1..=4, 9).is_err());
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 5..=4;
        assert!(generate_corpus(&model, 1, empty, 9).is_err());
    }

    #[test]
    fn regeneration_is_identical() {
        let vocab = Vocabulary::with_trailing_blank(8).unwrap();
        let model = build_seeded_model(1, vocab, 1, 3.0, 0.5).unwrap();
        let a = generate_corpus(&model, 1000, 20..=200, 42).unwrap();
        let b = generate_corpus(&model, 1000, 20..=200, 42).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(a, b);
        assert!(a
            .iter()
            .all(|u| (20..=200).contains(&u.encoder_output.num_frames())));
        assert!(a
            .iter()
            .flat_map(|u| &u.reference_tokens)
            .all(|&t| !vocab.is_blank(t)));
    }
}
