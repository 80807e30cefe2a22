//! Log-space probability helpers shared by every decoder.

use crate::error::{Error, Result};

/// `ln(exp(a) + exp(b))` without overflow. Either side may be `-inf`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Stable log-sum-exp. Empty or all `-inf` input gives `-inf`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Turns raw scores into a normalized log distribution: `raw - logsumexp(raw)`.
pub fn log_normalize(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::InvalidLogits("empty score vector".into()));
    }
    if let Some(pos) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidLogits(format!(
            "non-finite score {} at index {pos}",
            raw[pos]
        )));
    }
    let norm = logsumexp(raw);
    Ok(raw.iter().map(|v| v - norm).collect())
}

/// Index of the maximum entry; ties go to the lowest index.
///
/// Rows that are entirely `-inf`, or contain NaN, are rejected.
pub fn argmax_with_tiebreak(row: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, &value) in row.iter().enumerate() {
        if value.is_nan() {
            return Err(Error::InvalidLogits(format!("NaN at index {idx}")));
        }
        match best {
            Some((_, top)) if value <= top => {}
            _ => best = Some((idx, value)),
        }
    }
    match best {
        Some((idx, value)) if value > f64::NEG_INFINITY => Ok(idx),
        _ => Err(Error::InvalidLogits("row has no finite maximum".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_symmetric_pair() {
        let out = log_normalize(&[0.0, 0.0]).unwrap();
        for v in out {
            assert!((v + std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_identity_on_normalized_input() {
        let input = [0.6f64.ln(), 0.4f64.ln()];
        let out = log_normalize(&input).unwrap();
        for (a, b) in input.iter().zip(&out) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn normalize_one_two_three() {
        // Summation oracle: ln(e^1 + e^2 + e^3) evaluated directly.
        let direct = (1f64.exp() + 2f64.exp() + 3f64.exp()).ln();
        assert!((direct - 3.407_605_964_444_38).abs() < 1e-12);
        assert!((logsumexp(&[1.0, 2.0, 3.0]) - direct).abs() < 1e-12);
        let out = log_normalize(&[1.0, 2.0, 3.0]).unwrap();
        for (raw, v) in [1.0, 2.0, 3.0].iter().zip(&out) {
            assert!((v - (raw - direct)).abs() < 1e-12);
        }
        let total: f64 = out.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(logsumexp(&out).abs() < 1e-6);
    }

    #[test]
    fn normalize_rejects_non_finite() {
        assert!(matches!(
            log_normalize(&[0.0, f64::NAN]),
            Err(Error::InvalidLogits(_))
        ));
        assert!(matches!(
            log_normalize(&[f64::INFINITY, 0.0]),
            Err(Error::InvalidLogits(_))
        ));
        assert!(log_normalize(&[]).is_err());
    }

    #[test]
    fn argmax_ties_to_lowest_index() {
        assert_eq!(argmax_with_tiebreak(&[-1.0, -1.0, -5.0]).unwrap(), 0);
        assert_eq!(argmax_with_tiebreak(&[-3.0, -0.5, -2.0]).unwrap(), 1);
        assert_eq!(
            argmax_with_tiebreak(&[f64::NEG_INFINITY, -2.0, -2.0]).unwrap(),
            1
        );
    }

    #[test]
    fn argmax_rejects_dead_rows() {
        let row = [f64::NEG_INFINITY; 3];
        assert!(matches!(
            argmax_with_tiebreak(&row),
            Err(Error::InvalidLogits(_))
        ));
        assert!(argmax_with_tiebreak(&[]).is_err());
    }

    #[test]
    fn log_add_handles_neg_infinity() {
        assert_eq!(log_add(f64::NEG_INFINITY, -1.5), -1.5);
        assert_eq!(log_add(-1.5, f64::NEG_INFINITY), -1.5);
        let sum = log_add(0.2f64.ln(), 0.3f64.ln());
        assert!((sum - 0.5f64.ln()).abs() < 1e-12);
    }
}
