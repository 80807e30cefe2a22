//! Output files: hypotheses, costs, tradeoff tables and jump histograms.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wind_decode::synth::check_major;
use wind_decode::{CostReport, RunConfig, Token, TradeoffRow};

use crate::error::{CliError, CliResult};
use crate::run::FORMAT_VERSION;

/// One line of `hyps.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypRecord {
    pub utterance_id: String,
    pub tokens: Vec<Token>,
    pub timestamps: Vec<usize>,
    pub score: f64,
    pub format_version: String,
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(CliError::io(path))
}

pub fn write_hyps(path: &Path, records: &[HypRecord]) -> CliResult<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_hyps(path: &Path) -> CliResult<Vec<HypRecord>> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            let bad =
                |msg: String| CliError::Config(format!("{}:{}: {msg}", path.display(), i + 1));
            let record: HypRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            check_major(&record.format_version).map_err(|e| bad(e.to_string()))?;
            Ok(record)
        })
        .collect()
}

#[derive(Serialize)]
struct CostFile<'a> {
    format_version: &'a str,
    #[serde(flatten)]
    cost: &'a CostReport,
}

pub fn write_cost(path: &Path, cost: &CostReport) -> CliResult<()> {
    let file = CostFile {
        format_version: FORMAT_VERSION,
        cost,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("cost serializes");
    text.push('\n');
    write_file(path, &text)
}

#[derive(Serialize)]
struct CsvRow<'a> {
    algo: &'a str,
    window: Option<usize>,
    beam: Option<usize>,
    batch: Option<usize>,
    wer: String,
    joiner_calls: u64,
    frames_evaluated: u64,
    decoder_calls: u64,
    peak_logit_floats: u64,
}

fn csv_error(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Config(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_tradeoff_csv(path: &Path, rows: &[TradeoffRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    for row in rows {
        w.serialize(CsvRow {
            algo: &row.algo,
            window: row.config.window,
            beam: row.config.beam,
            batch: row.config.batch,
            wer: format!("{:.6}", row.wer.wer),
            joiner_calls: row.cost.joiner_calls,
            frames_evaluated: row.cost.frames_evaluated,
            decoder_calls: row.cost.decoder_calls,
            peak_logit_floats: row.cost.peak_logit_floats,
        })
        .map_err(csv_error(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

#[derive(Serialize)]
struct JumpRow<'a> {
    algo: &'a str,
    window: Option<usize>,
    beam: Option<usize>,
    batch: Option<usize>,
    jump: usize,
    count: u64,
}

/// Long format: one line per (config, jump size).
pub fn write_jumps_csv(path: &Path, rows: &[TradeoffRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    for row in rows {
        for (&jump, &count) in &row.cost.jump_events {
            w.serialize(JumpRow {
                algo: &row.algo,
                window: row.config.window,
                beam: row.config.beam,
                batch: row.config.batch,
                jump,
                count,
            })
            .map_err(csv_error(path))?;
        }
    }
    w.flush().map_err(CliError::io(path))
}

pub fn config_label(algo: &str, config: &RunConfig) -> String {
    let mut label = algo.to_string();
    for (name, value) in [
        ("w", config.window),
        ("K", config.beam),
        ("B", config.batch),
    ] {
        if let Some(v) = value {
            let _ = write!(label, " {name}={v}");
        }
    }
    label
}

/// Bar chart of normalized jump histograms, one panel per config, smallest
/// jump on the left.
pub fn jumps_svg(rows: &[TradeoffRow]) -> String {
    const PANEL_W: f64 = 640.0;
    const PANEL_H: f64 = 140.0;
    const MARGIN: f64 = 40.0;
    let max_jump = rows
        .iter()
        .filter_map(|r| r.cost.jump_events.keys().next_back())
        .copied()
        .max()
        .unwrap_or(0);
    let slots = (max_jump + 1) as f64;
    let height = MARGIN + rows.len() as f64 * (PANEL_H + MARGIN);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{height}" font-family="sans-serif" font-size="11">"#,
        w = PANEL_W + 2.0 * MARGIN
    );
    for (i, row) in rows.iter().enumerate() {
        let top = MARGIN + i as f64 * (PANEL_H + MARGIN);
        let base = top + PANEL_H;
        let _ = writeln!(
            svg,
            r#"<text x="{MARGIN}" y="{:.1}">{}</text>"#,
            top - 6.0,
            config_label(&row.algo, &row.config)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN}" y1="{base:.1}" x2="{:.1}" y2="{base:.1}" stroke="#333"/>"##,
            MARGIN + PANEL_W
        );
        let hist: &BTreeMap<usize, u64> = &row.cost.jump_events;
        let total: u64 = hist.values().sum();
        let bar_w = PANEL_W / slots;
        for (&jump, &count) in hist {
            let frac = if total == 0 {
                0.0
            } else {
                count as f64 / total as f64
            };
            let h = frac * PANEL_H;
            let _ = writeln!(
                svg,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="#4a78a8"><title>jump {jump}: {count}</title></rect>"##,
                MARGIN + jump as f64 * bar_w + 1.0,
                base - h,
                (bar_w - 2.0).max(1.0)
            );
        }
        for jump in 0..=max_jump {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{jump}</text>"#,
                MARGIN + (jump as f64 + 0.5) * bar_w,
                base + 13.0
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use wind_decode::WerReport;

    fn row(window: usize, jumps: &[(usize, u64)]) -> TradeoffRow {
        TradeoffRow {
            algo: "wind".into(),
            config: RunConfig {
                window: Some(window),
                ..RunConfig::default()
            },
            wer: WerReport::default(),
            cost: CostReport {
                jump_events: jumps.iter().copied().collect(),
                ..CostReport::default()
            },
        }
    }

    #[test]
    fn svg_puts_small_jumps_left() {
        let svg = jumps_svg(&[row(4, &[(0, 3), (4, 1)])]);
        let xs: Vec<f64> = svg
            .lines()
            .filter(|l| l.starts_with("<rect"))
            .map(|l| l.split('"').nth(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(xs.len(), 2);
        assert!(xs[0] < xs[1]);
        assert!(svg.contains("wind w=4"));
    }

    #[test]
    fn hyps_round_trip_and_reject_future_major() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.jsonl");
        let rec = HypRecord {
            utterance_id: "u".into(),
            tokens: vec![1, 2],
            timestamps: vec![0, 3],
            score: -1.25,
            format_version: FORMAT_VERSION.into(),
        };
        write_hyps(&path, std::slice::from_ref(&rec)).unwrap();
        assert_eq!(read_hyps(&path).unwrap(), vec![rec.clone()]);
        let future = HypRecord {
            format_version: "2.0".into(),
            ..rec
        };
        write_hyps(&path, &[future]).unwrap();
        assert!(matches!(read_hyps(&path), Err(CliError::Config(_))));
    }

    #[test]
    fn config_labels() {
        let cfg = RunConfig {
            window: Some(8),
            beam: Some(4),
            batch: None,
        };
        assert_eq!(config_label("wind-beam", &cfg), "wind-beam w=8 K=4");
    }
}
