//! Run manifests: which model, which corpus, which decoder, and how to run it.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wind_decode::synth::{
    check_major, generate_corpus, AnyModel, ContextState, CorpusFile, SyntheticSource,
};
use wind_decode::{
    decode_batch, decode_graves_beam, decode_sequential, decode_wind, decode_wind_beam,
    BatchVariant, BeamConfig, CostReport, EncoderOutput, GreedyConfig, Hypothesis, RunConfig,
    Token, TransducerModel,
};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: &str = "1.0";

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Sequential,
    Wind,
    BatchedBaseline,
    BatchedWind,
    WindBeam,
    GravesBeam,
}

impl Algo {
    pub fn label(self) -> &'static str {
        match self {
            Self::Sequential => "sequential",
            Self::Wind => "wind",
            Self::BatchedBaseline => "batched-baseline",
            Self::BatchedWind => "batched-wind",
            Self::WindBeam => "wind-beam",
            Self::GravesBeam => "graves-beam",
        }
    }

    pub fn uses_window(self) -> bool {
        matches!(self, Self::Wind | Self::BatchedWind | Self::WindBeam)
    }

    pub fn uses_beam(self) -> bool {
        matches!(self, Self::WindBeam | Self::GravesBeam)
    }

    pub fn uses_batch(self) -> bool {
        matches!(self, Self::BatchedBaseline | Self::BatchedWind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSpec {
    Synthetic {
        seed: u64,
        count: usize,
        min_frames: usize,
        max_frames: usize,
    },
    File(PathBuf),
}

/// Everything a decode run depends on. Written next to its outputs as `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: String,
    pub model: PathBuf,
    pub corpus: CorpusSpec,
    pub algo: Algo,
    pub window: usize,
    pub beam: usize,
    pub batch: usize,
    pub max_symbols: usize,
}

impl RunManifest {
    pub fn validate(&self) -> CliResult<()> {
        for (name, value) in [
            ("window", self.window),
            ("beam", self.beam),
            ("batch", self.batch),
            ("max-symbols", self.max_symbols),
        ] {
            if value == 0 {
                return Err(CliError::Config(format!("--{name} must be positive")));
            }
        }
        if let CorpusSpec::Synthetic {
            count,
            min_frames,
            max_frames,
            ..
        } = self.corpus
        {
            if count == 0 {
                return Err(CliError::Config("corpus is empty".into()));
            }
            if min_frames > max_frames {
                return Err(CliError::Config(format!(
                    "frame range {min_frames}:{max_frames} is empty"
                )));
            }
        }
        Ok(())
    }

    /// The settings that apply to this algorithm, for tables.
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            window: self.algo.uses_window().then_some(self.window),
            beam: self.algo.uses_beam().then_some(self.beam),
            batch: self.algo.uses_batch().then_some(self.batch),
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let manifest: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        check_major(&manifest.format_version).map_err(CliError::loading(path))?;
        Ok(manifest)
    }
}

pub struct Utterance {
    pub encoder_output: EncoderOutput,
    pub reference: Vec<Token>,
}

pub fn load_model(path: &Path) -> CliResult<AnyModel> {
    AnyModel::load(path).map_err(CliError::loading(path))
}

/// Materializes the corpus. File utterances without a reference get the
/// model's sequential greedy transcript, as synthetic ones do.
pub fn load_corpus(model: &AnyModel, spec: &CorpusSpec) -> CliResult<Vec<Utterance>> {
    let utterances: Vec<Utterance> = match spec {
        CorpusSpec::Synthetic {
            seed,
            count,
            min_frames,
            max_frames,
        } => generate_corpus(model, *count, *min_frames..=*max_frames, *seed)
            .map_err(|e| CliError::Config(e.to_string()))?
            .into_iter()
            .map(|u| Utterance {
                encoder_output: u.encoder_output,
                reference: u.reference_tokens,
            })
            .collect(),
        CorpusSpec::File(path) => {
            let file = CorpusFile::load(path).map_err(CliError::loading(path))?;
            let dim = model.feature_dim();
            file.utterances
                .into_iter()
                .map(|entry| {
                    let enc = entry
                        .encoder_output(dim)
                        .map_err(|e| CliError::Config(format!("{}: {e}", entry.utterance_id)))?;
                    if enc.dim() != dim {
                        return Err(CliError::Config(format!(
                            "{}: frames have {} features, model expects {dim}",
                            entry.utterance_id,
                            enc.dim()
                        )));
                    }
                    let reference = match entry.reference {
                        Some(r) => r,
                        None => {
                            decode_sequential(model, &enc, &GreedyConfig::default())?
                                .hypothesis
                                .tokens
                        }
                    };
                    Ok(Utterance {
                        encoder_output: enc,
                        reference,
                    })
                })
                .collect::<CliResult<_>>()?
        }
    };
    if utterances.is_empty() {
        return Err(CliError::Config("corpus is empty".into()));
    }
    Ok(utterances)
}

pub struct Decoded {
    pub hypotheses: Vec<Hypothesis<ContextState>>,
    /// Whole-run cost. Batched runs count batch rounds, not per-utterance work.
    pub cost: CostReport,
}

/// Decodes the corpus on `workers` threads. Results keep corpus order.
pub fn decode_corpus(
    model: &AnyModel,
    corpus: &[Utterance],
    run: &RunManifest,
    workers: usize,
) -> CliResult<Decoded> {
    run.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    let encs: Vec<&EncoderOutput> = corpus.iter().map(|u| &u.encoder_output).collect();
    let greedy = GreedyConfig::new(run.window, run.max_symbols)?;
    let beam = BeamConfig {
        max_expansions_per_timestep: run.max_symbols,
        ..BeamConfig::new(run.beam, run.window)?
    };

    let parts: Vec<(Vec<Hypothesis<ContextState>>, CostReport)> =
        pool.install(|| match run.algo {
            Algo::BatchedBaseline | Algo::BatchedWind => {
                let variant = if run.algo == Algo::BatchedWind {
                    BatchVariant::Wind
                } else {
                    BatchVariant::Baseline
                };
                let cfg = if variant == BatchVariant::Wind {
                    greedy
                } else {
                    GreedyConfig {
                        window_size: 1,
                        ..greedy
                    }
                };
                encs.par_chunks(run.batch)
                    .map(|chunk| {
                        let owned: Vec<EncoderOutput> =
                            chunk.iter().map(|e| (*e).clone()).collect();
                        let out = decode_batch(model, &owned, &cfg, variant)?;
                        Ok((
                            out.results.into_iter().map(|r| r.hypothesis).collect(),
                            out.cost,
                        ))
                    })
                    .collect::<wind_decode::Result<_>>()
            }
            algo => encs
                .par_iter()
                .map(|enc| {
                    let (hyp, cost) = match algo {
                        Algo::Sequential => {
                            let r = decode_sequential(model, enc, &greedy)?;
                            (r.hypothesis, r.cost)
                        }
                        Algo::Wind => {
                            let r = decode_wind(model, enc, &greedy)?;
                            (r.hypothesis, r.cost)
                        }
                        Algo::WindBeam | Algo::GravesBeam => {
                            let r = if algo == Algo::WindBeam {
                                decode_wind_beam(model, enc, &beam)?
                            } else {
                                decode_graves_beam(model, enc, &beam)?
                            };
                            let best =
                                r.hypotheses
                                    .into_iter()
                                    .next()
                                    .unwrap_or_else(|| Hypothesis {
                                        score: f64::NEG_INFINITY,
                                        ..Hypothesis::empty(model.initial_state())
                                    });
                            (best, r.cost)
                        }
                        Algo::BatchedBaseline | Algo::BatchedWind => unreachable!("handled above"),
                    };
                    Ok((vec![hyp], cost))
                })
                .collect::<wind_decode::Result<_>>(),
        })?;

    let mut hypotheses = Vec::with_capacity(corpus.len());
    let mut cost = CostReport::default();
    for (hyps, c) in parts {
        hypotheses.extend(hyps);
        cost.merge(&c);
    }
    Ok(Decoded { hypotheses, cost })
}
