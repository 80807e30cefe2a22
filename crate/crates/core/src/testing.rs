//! Small hand-built models shared by unit tests.

use crate::synth::{build_table_model, TableModel, TableSpec};
use crate::types::{EncoderOutput, Vocabulary};

const HIGH: f32 = 5.0;

fn peaked(v: usize, winner: usize) -> Vec<f32> {
    (0..v)
        .map(|i| if i == winner { HIGH } else { 0.0 })
        .collect()
}

/// V = {a=0, b=1, blank=2}, k=1, three feature keys. Argmax chain:
/// (BOS,f0)=a, (a,f0)=blank, (a,f1)=b, (b,f1)=blank, (b,f2)=blank; every
/// other cell prefers blank.
pub(crate) fn chain_model() -> TableModel {
    let vocab = Vocabulary::with_trailing_blank(3).unwrap();
    let mut spec = TableSpec::new(vocab, 1, 3).unwrap();
    for history in [&[][..], &[0], &[1]] {
        for key in 0..3 {
            spec.set_row(history, key, peaked(3, 2)).unwrap();
        }
    }
    spec.set_row(&[], 0, peaked(3, 0)).unwrap();
    spec.set_row(&[0], 1, peaked(3, 1)).unwrap();
    build_table_model(spec).unwrap()
}

pub(crate) fn chain_utterance() -> EncoderOutput {
    EncoderOutput::new("chain", 1, vec![0.0, 1.0, 2.0]).unwrap()
}

pub(crate) fn all_blank_model(v: usize) -> TableModel {
    let vocab = Vocabulary::with_trailing_blank(v).unwrap();
    let data: Vec<f32> = (0..v).flat_map(|_| peaked(v, v - 1)).collect();
    build_table_model(TableSpec::from_dense(vocab, 1, 1, &data).unwrap()).unwrap()
}

/// Two labels plus blank; blank is never the argmax.
pub(crate) fn never_blank_model() -> TableModel {
    let vocab = Vocabulary::with_trailing_blank(3).unwrap();
    let data: Vec<f32> = (0..3).flat_map(|_| peaked(3, 0)).collect();
    build_table_model(TableSpec::from_dense(vocab, 1, 1, &data).unwrap()).unwrap()
}
