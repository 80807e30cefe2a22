//! Instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wind_decode::synth::{random_table_model, TableModel};
use wind_decode::{EncoderOutput, Vocabulary};

/// A random table model small enough for exhaustive enumeration, with a
/// random utterance over its feature keys.
pub struct TinyInstance {
    pub model: TableModel,
    pub enc: EncoderOutput,
}

pub fn tiny_instance(seed: u64, max_frames: usize, max_vocab: usize) -> TinyInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = rng.random_range(2..=max_vocab);
    let k = rng.random_range(0..=1);
    let keys = rng.random_range(1..=3);
    let frames = rng.random_range(1..=max_frames);
    let blank_bias = rng.random_range(-1.0..2.0);
    let vocab = Vocabulary::with_trailing_blank(v).unwrap();
    let model = random_table_model(vocab, k, keys, rng.random(), blank_bias, 1.5).unwrap();
    let rows: Vec<f32> = (0..frames)
        .map(|_| rng.random_range(0..keys) as f32)
        .collect();
    let enc = EncoderOutput::new(format!("tiny-{seed}"), 1, rows).unwrap();
    TinyInstance { model, enc }
}
