//! Token error rates and speed/accuracy tables.

use serde::{Deserialize, Serialize};

use crate::cost::CostReport;
use crate::error::{Error, Result};
use crate::types::Token;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WerReport {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_len: usize,
    /// Edits over reference length. An empty reference divides by one.
    pub wer: f64,
}

impl WerReport {
    fn from_counts(
        substitutions: usize,
        insertions: usize,
        deletions: usize,
        reference_len: usize,
    ) -> Self {
        let edits = substitutions + insertions + deletions;
        Self {
            substitutions,
            insertions,
            deletions,
            reference_len,
            wer: edits as f64 / reference_len.max(1) as f64,
        }
    }

    pub fn edits(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

/// Levenshtein alignment with unit costs. Among minimal paths the traceback
/// takes substitution or match first, then insertion, then deletion.
pub fn token_error_rate(reference: &[Token], hypothesis: &[Token]) -> WerReport {
    let (n, m) = (reference.len(), hypothesis.len());
    // dist[i][j]: distance between reference[..i] and hypothesis[..j].
    let mut dist = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in dist.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in dist[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = dist[i - 1][j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            dist[i][j] = sub.min(dist[i][j - 1] + 1).min(dist[i - 1][j] + 1);
        }
    }

    let (mut s, mut ins, mut del) = (0, 0, 0);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let differs = reference[i - 1] != hypothesis[j - 1];
            if dist[i][j] == dist[i - 1][j - 1] + usize::from(differs) {
                s += usize::from(differs);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && dist[i][j] == dist[i][j - 1] + 1 {
            ins += 1;
            j -= 1;
        } else {
            del += 1;
            i -= 1;
        }
    }
    WerReport::from_counts(s, ins, del, n)
}

/// Pooled error rate: total edits over total reference tokens.
pub fn corpus_error_rate(
    references: &[Vec<Token>],
    hypotheses: &[Vec<Token>],
) -> Result<WerReport> {
    if references.len() != hypotheses.len() {
        return Err(Error::ReportMismatch(format!(
            "{} references but {} hypotheses",
            references.len(),
            hypotheses.len()
        )));
    }
    let (mut s, mut i, mut d, mut n) = (0, 0, 0, 0);
    for (r, h) in references.iter().zip(hypotheses) {
        let w = token_error_rate(r, h);
        s += w.substitutions;
        i += w.insertions;
        d += w.deletions;
        n += w.reference_len;
    }
    Ok(WerReport::from_counts(s, i, d, n))
}

pub fn aggregate_costs<'a>(costs: impl IntoIterator<Item = &'a CostReport>) -> CostReport {
    costs.into_iter().sum()
}

/// Window, beam and batch settings of one run; unset fields do not apply.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunConfig {
    pub window: Option<usize>,
    pub beam: Option<usize>,
    pub batch: Option<usize>,
}

/// Everything measured by one decoding run over a corpus.
#[derive(Debug, Clone)]
pub struct TradeoffRun {
    pub corpus_id: String,
    pub algo: String,
    pub config: RunConfig,
    pub references: Vec<Vec<Token>>,
    pub hypotheses: Vec<Vec<Token>>,
    pub costs: Vec<CostReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub algo: String,
    pub config: RunConfig,
    pub wer: WerReport,
    pub cost: CostReport,
}

/// One row per run, sorted by algorithm label and then config. All runs must
/// come from the same corpus.
pub fn build_tradeoff_table(runs: &[TradeoffRun]) -> Result<Vec<TradeoffRow>> {
    if let Some(first) = runs.first() {
        if let Some(other) = runs.iter().find(|r| r.corpus_id != first.corpus_id) {
            return Err(Error::ReportMismatch(format!(
                "runs mix corpora {} and {}",
                first.corpus_id, other.corpus_id
            )));
        }
    }
    let mut rows = runs
        .iter()
        .map(|run| {
            Ok(TradeoffRow {
                algo: run.algo.clone(),
                config: run.config,
                wer: corpus_error_rate(&run.references, &run.hypotheses)?,
                cost: aggregate_costs(&run.costs),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.algo.cmp(&b.algo).then(a.config.cmp(&b.config)));
    Ok(rows)
}
