//! `wind`: decode synthetic corpora, compare runs, and sweep decoder settings.

mod compare;
mod error;
mod report;
mod run;

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use wind_decode::synth::{build_seeded_model, random_table_model, AnyModel};
use wind_decode::{build_tradeoff_table, TradeoffRun, Vocabulary};

use crate::compare::{compare_runs, Outcome};
use crate::error::{CliError, CliResult};
use crate::report::{config_label, write_cost, write_file, write_hyps, HypRecord};
use crate::run::{
    decode_corpus, load_corpus, load_model, Algo, CorpusSpec, RunManifest, FORMAT_VERSION,
};

const DEFAULT_WINDOW: usize = 8;
const DEFAULT_BEAM: usize = 4;
const DEFAULT_BATCH: usize = 8;

/// Exit code of `compare` when the runs differ.
const EXIT_DIVERGED: i32 = 3;

#[derive(Parser)]
#[command(
    name = "wind",
    version,
    about = "Transducer decoding with windowed non-blank detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode a corpus and write hyps.jsonl, cost.json and run.json.
    Decode(DecodeArgs),
    /// Diff two decode output directories; exit 0 iff identical.
    Compare { a: PathBuf, b: PathBuf },
    /// Sweep settings and write tradeoff.csv, jumps.csv and jumps.svg.
    Bench(BenchArgs),
    /// Write a synthetic model manifest.
    Model(ModelArgs),
}

#[derive(Clone, Copy, Debug)]
struct FrameRange(usize, usize);

impl FromStr for FrameRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s.split_once(':').ok_or("expected MIN:MAX")?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
        Ok(Self(parse(lo)?, parse(hi)?))
    }
}

#[derive(Args)]
struct CorpusArgs {
    /// Model manifest (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Corpus file; replaces the synthetic corpus flags.
    #[arg(long, conflicts_with_all = ["corpus_seed", "corpus_count", "frames"])]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    corpus_seed: u64,
    #[arg(long, default_value_t = 100)]
    corpus_count: usize,
    /// Utterance length range in frames.
    #[arg(long, value_name = "MIN:MAX", default_value = "20:200")]
    frames: FrameRange,
}

impl CorpusArgs {
    fn spec(&self) -> CliResult<CorpusSpec> {
        Ok(match &self.corpus {
            Some(path) => CorpusSpec::File(absolute(path)?),
            None => CorpusSpec::Synthetic {
                seed: self.corpus_seed,
                count: self.corpus_count,
                min_frames: self.frames.0,
                max_frames: self.frames.1,
            },
        })
    }
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_enum, default_value = "wind")]
    algo: Algo,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    /// Emissions allowed per frame before the decoder must advance.
    #[arg(long, default_value_t = 10)]
    max_symbols: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "wind")]
    algo: Vec<Algo>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    window: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "4")]
    beam: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "8")]
    batch: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    max_symbols: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Seeded,
    Table,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "seeded")]
    kind: ModelKind,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Vocabulary size including blank, which takes the last id.
    #[arg(long, default_value_t = 8)]
    vocab: usize,
    /// Decoder context length in tokens.
    #[arg(long, default_value_t = 1)]
    context: usize,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    blank_bias: f64,
    /// Feature keys of a table model.
    #[arg(long, default_value_t = 4)]
    keys: usize,
    /// Logit standard deviation of a table model.
    #[arg(long, default_value_t = 1.5)]
    scale: f32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "model")]
    name: String,
}

fn absolute(path: &Path) -> CliResult<PathBuf> {
    std::fs::canonicalize(path).map_err(CliError::io(path))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn check_workers(workers: usize) -> CliResult<()> {
    if workers == 0 {
        return Err(CliError::Config("--workers must be positive".into()));
    }
    Ok(())
}

fn cmd_decode(args: DecodeArgs) -> CliResult<i32> {
    check_workers(args.workers)?;
    let algo = args.algo;
    for (flag, given, used) in [
        ("window", args.window.is_some(), algo.uses_window()),
        ("beam", args.beam.is_some(), algo.uses_beam()),
        ("batch", args.batch.is_some(), algo.uses_batch()),
    ] {
        if given && !used {
            return Err(CliError::Config(format!(
                "--{flag} does not apply to {}",
                algo.label()
            )));
        }
    }
    let run = RunManifest {
        format_version: FORMAT_VERSION.into(),
        model: absolute(&args.corpus.model)?,
        corpus: args.corpus.spec()?,
        algo,
        window: args.window.unwrap_or(if algo.uses_window() {
            DEFAULT_WINDOW
        } else {
            1
        }),
        beam: args
            .beam
            .unwrap_or(if algo.uses_beam() { DEFAULT_BEAM } else { 1 }),
        batch: args
            .batch
            .unwrap_or(if algo.uses_batch() { DEFAULT_BATCH } else { 1 }),
        max_symbols: args.max_symbols,
    };
    run.validate()?;
    let model = load_model(&run.model)?;
    let corpus = load_corpus(&model, &run.corpus)?;
    let decoded = decode_corpus(&model, &corpus, &run, args.workers)?;

    ensure_dir(&args.out)?;
    let records: Vec<HypRecord> = corpus
        .iter()
        .zip(&decoded.hypotheses)
        .map(|(u, h)| HypRecord {
            utterance_id: u.encoder_output.utterance_id.clone(),
            tokens: h.tokens.clone(),
            timestamps: h.timestamps.clone(),
            score: h.score,
            format_version: FORMAT_VERSION.into(),
        })
        .collect();
    write_hyps(&args.out.join("hyps.jsonl"), &records)?;
    write_cost(&args.out.join("cost.json"), &decoded.cost)?;
    let mut manifest = serde_json::to_string_pretty(&run).expect("manifest serializes");
    manifest.push('\n');
    write_file(&args.out.join("run.json"), &manifest)?;
    Ok(0)
}

fn cmd_compare(a: &Path, b: &Path) -> CliResult<i32> {
    let outcome = compare_runs(a, b)?;
    println!(
        "{}",
        serde_json::to_string(&outcome).expect("outcome serializes")
    );
    Ok(match outcome {
        Outcome::Identical { .. } => 0,
        Outcome::Diverged(_) => EXIT_DIVERGED,
    })
}

/// The grid of runs: each algorithm crossed with the settings it uses.
fn sweep(args: &BenchArgs, model: PathBuf, corpus: CorpusSpec) -> Vec<RunManifest> {
    let mut runs = Vec::new();
    let mut algos = args.algo.clone();
    algos.sort();
    algos.dedup();
    for algo in algos {
        let windows = if algo.uses_window() {
            args.window.clone()
        } else {
            vec![1]
        };
        let beams = if algo.uses_beam() {
            args.beam.clone()
        } else {
            vec![1]
        };
        let batches = if algo.uses_batch() {
            args.batch.clone()
        } else {
            vec![1]
        };
        for &window in &windows {
            for &beam in &beams {
                for &batch in &batches {
                    let run = RunManifest {
                        format_version: FORMAT_VERSION.into(),
                        model: model.clone(),
                        corpus: corpus.clone(),
                        algo,
                        window,
                        beam,
                        batch,
                        max_symbols: args.max_symbols,
                    };
                    if !runs.contains(&run) {
                        runs.push(run);
                    }
                }
            }
        }
    }
    runs
}

fn cmd_bench(args: BenchArgs) -> CliResult<i32> {
    check_workers(args.workers)?;
    let runs = sweep(&args, absolute(&args.corpus.model)?, args.corpus.spec()?);
    for run in &runs {
        run.validate()?;
    }
    let model = load_model(&runs[0].model)?;
    let corpus = load_corpus(&model, &runs[0].corpus)?;
    let corpus_id = serde_json::to_string(&runs[0].corpus).expect("corpus spec serializes");
    let references: Vec<_> = corpus.iter().map(|u| u.reference.clone()).collect();

    let mut measured = Vec::with_capacity(runs.len());
    for run in &runs {
        let start = Instant::now();
        let decoded = decode_corpus(&model, &corpus, run, args.workers)?;
        let config = run.run_config();
        // Wall-clock is informational only and stays out of the output files.
        eprintln!(
            "{}",
            json!({
                "info": "timing",
                "run": config_label(run.algo.label(), &config),
                "seconds": start.elapsed().as_secs_f64(),
            })
        );
        measured.push(TradeoffRun {
            corpus_id: corpus_id.clone(),
            algo: run.algo.label().into(),
            config,
            references: references.clone(),
            hypotheses: decoded.hypotheses.into_iter().map(|h| h.tokens).collect(),
            costs: vec![decoded.cost],
        });
    }
    let rows = build_tradeoff_table(&measured)?;

    ensure_dir(&args.out)?;
    report::write_tradeoff_csv(&args.out.join("tradeoff.csv"), &rows)?;
    report::write_jumps_csv(&args.out.join("jumps.csv"), &rows)?;
    write_file(&args.out.join("jumps.svg"), &report::jumps_svg(&rows))?;
    let sidecar = json!({
        "format_version": FORMAT_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "model": runs[0].model,
        "corpus": runs[0].corpus,
        "max_symbols": args.max_symbols,
        "rows": rows,
    });
    let mut text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    text.push('\n');
    write_file(&args.out.join("bench.json"), &text)?;
    Ok(0)
}

fn cmd_model(args: ModelArgs) -> CliResult<i32> {
    let vocab = Vocabulary::with_trailing_blank(args.vocab)?;
    let model = match args.kind {
        ModelKind::Seeded => AnyModel::Seeded(build_seeded_model(
            args.seed,
            vocab,
            args.context,
            args.blank_bias,
            0.5,
        )?),
        ModelKind::Table => AnyModel::Table(random_table_model(
            vocab,
            args.context,
            args.keys,
            args.seed,
            args.blank_bias as f32,
            args.scale,
        )?),
    };
    ensure_dir(&args.out)?;
    model
        .save(&args.out, &args.name)
        .map_err(CliError::loading(&args.out))?;
    Ok(0)
}

fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Decode(args) => cmd_decode(args),
        Command::Compare { a, b } => cmd_compare(&a, &b),
        Command::Bench(args) => cmd_bench(args),
        Command::Model(args) => cmd_model(args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if !err.use_stderr() => err.exit(),
        Err(err) => {
            let message = err.render().to_string();
            eprintln!(
                "{}",
                json!({ "error": "config", "message": message.trim(), "exit_code": 2 })
            );
            std::process::exit(2);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            let code = err.exit_code();
            eprintln!(
                "{}",
                json!({ "error": err.kind(), "message": err.to_string(), "exit_code": code })
            );
            code
        }
    };
    std::process::exit(code);
}
