//! Prints the exhaustive-search answers for the tiny-lattice fixture.
//!
//! Usage: `cargo run -p wind-decode --example tiny_lattice_expected > fixtures/tiny-lattice.expected.json`

use std::path::Path;

use serde_json::json;
use wind_decode::synth::{AnyModel, CorpusFile};
use wind_decode::{enumerate_lattice, exact_kbest, LatticeCaps};

const MAX_SYMBOLS: usize = 3;

fn main() -> wind_decode::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let model = AnyModel::load(&root.join("tiny-lattice.json"))?;
    let corpus = CorpusFile::load(&root.join("tiny-lattice.corpus.json"))?;
    let mut rows = Vec::new();
    for entry in &corpus.utterances {
        let enc = entry.encoder_output(1)?;
        let lattice = enumerate_lattice(&model, &enc, LatticeCaps::force_advance(MAX_SYMBOLS))?;
        let (tokens, log_prob) = exact_kbest(&lattice, 1).remove(0);
        rows.push(json!({
            "utterance_id": entry.utterance_id,
            "tokens": tokens,
            "log_prob": log_prob,
        }));
    }
    let doc = json!({
        "format_version": "1.0",
        "max_symbols_per_frame": MAX_SYMBOLS,
        "utterances": rows,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}
