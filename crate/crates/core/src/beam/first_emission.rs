use crate::error::{Error, Result};
use crate::logprob::logsumexp;
use crate::types::{Token, Vocabulary, WindowLogits};

/// Log-probability that token `v` is the first symbol produced in a window,
/// produced at offset `t`.
///
/// A label at offset `t` needs blanks on every earlier frame; blank itself can
/// only be "first" by covering the whole window, so it lives at the last
/// offset only. Entries sum to one over all `(v, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstEmissionDistribution {
    window_start: usize,
    vocab: Vocabulary,
    log_probs: Vec<f64>,
}

pub fn first_emission_logprobs(
    window: &WindowLogits,
    vocab: &Vocabulary,
) -> Result<FirstEmissionDistribution> {
    if window.vocab_size() != vocab.size() {
        return Err(Error::InvalidLogits(format!(
            "window has {} columns, vocabulary has {}",
            window.vocab_size(),
            vocab.size()
        )));
    }
    let n = window.len();
    let blank = vocab.blank() as usize;
    let mut out = Vec::with_capacity(window.float_count());
    let mut blank_prefix = 0.0;
    for (offset, row) in window.rows().enumerate() {
        for (tok, &lp) in row.iter().enumerate() {
            // Blank only "emits" as the all-blank outcome at the window's end.
            out.push(if tok != blank || offset + 1 == n {
                blank_prefix + lp
            } else {
                f64::NEG_INFINITY
            });
        }
        blank_prefix += row[blank];
    }
    Ok(FirstEmissionDistribution {
        window_start: window.window_start(),
        vocab: *vocab,
        log_probs: out,
    })
}

impl FirstEmissionDistribution {
    pub fn window_start(&self) -> usize {
        self.window_start
    }

    pub fn len(&self) -> usize {
        self.log_probs.len() / self.vocab.size()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn get(&self, token: Token, offset: usize) -> f64 {
        self.log_probs[offset * self.vocab.size() + token as usize]
    }

    /// `(offset, token, log P')` for every cell, offset-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, Token, f64)> + '_ {
        let v = self.vocab.size();
        self.log_probs
            .iter()
            .enumerate()
            .map(move |(i, &lp)| (i / v, (i % v) as Token, lp))
    }

    pub fn total_log_mass(&self) -> f64 {
        logsumexp(&self.log_probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(rows: &[&[f64]]) -> WindowLogits {
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().map(|p| p.ln())).collect();
        WindowLogits::new(0, rows[0].len(), flat).unwrap()
    }

    #[test]
    fn single_frame_is_the_frame_distribution() {
        let vocab = Vocabulary::with_trailing_blank(3).unwrap();
        let w = window(&[&[0.2, 0.3, 0.5]]);
        let fe = first_emission_logprobs(&w, &vocab).unwrap();
        for (tok, p) in [0.2f64, 0.3, 0.5].iter().enumerate() {
            assert!((fe.get(tok as Token, 0) - p.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_frame_hand_values() {
        // V = {blank=0, a=1}; P(a|t0)=0.4, P(a|t0+1)=0.5.
        let vocab = Vocabulary::new(2, 0).unwrap();
        let w = window(&[&[0.6, 0.4], &[0.5, 0.5]]);
        let fe = first_emission_logprobs(&w, &vocab).unwrap();
        assert!((fe.get(1, 0).exp() - 0.4).abs() < 1e-12);
        assert!((fe.get(1, 1).exp() - 0.30).abs() < 1e-12);
        assert!((fe.get(0, 1).exp() - 0.30).abs() < 1e-12);
        assert_eq!(fe.get(0, 0), f64::NEG_INFINITY);
        assert!(fe.total_log_mass().abs() < 1e-12);
    }

    #[test]
    fn rejects_vocab_mismatch() {
        let vocab = Vocabulary::with_trailing_blank(4).unwrap();
        let w = window(&[&[0.5, 0.5]]);
        assert!(first_emission_logprobs(&w, &vocab).is_err());
    }
}
