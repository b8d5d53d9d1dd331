//! Run directory output: human table, line-delimited machine records and
//! per-stage record files.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ExampleRecord, FailedExample, HarnessError, ModeReport, RunConfig, RunReport};
use crate::metrics::{AggregateReport, MetricReport};
use crate::summarize::Mode;

pub const CONFIG_FILE: &str = "config.json";
pub const DECOMPOSITIONS_FILE: &str = "decompositions.jsonl";
pub const SUMMARIES_FILE: &str = "summaries.jsonl";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const REPORT_FILE: &str = "report.txt";
pub const RECORDS_FILE: &str = "run_report.jsonl";

pub const RUN_FILES: [&str; 7] = [
    CONFIG_FILE,
    DECOMPOSITIONS_FILE,
    SUMMARIES_FILE,
    METRICS_FILE,
    AGGREGATE_FILE,
    REPORT_FILE,
    RECORDS_FILE,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    HumanTable,
    MachineRecords,
}

/// One line of `run_report.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MachineRecord {
    Config {
        config: RunConfig,
    },
    Sample {
        ids: Vec<String>,
    },
    Mode {
        mode: Mode,
        aggregate: Option<AggregateReport>,
        corpus_bleu: Option<f64>,
        fallback_rate: Option<f64>,
        truncation_rate: Option<f64>,
    },
    Example {
        record: ExampleRecord,
    },
    Failure {
        failure: FailedExample,
    },
}

impl RunReport {
    pub fn to_machine_records(&self) -> Vec<MachineRecord> {
        let mut out = vec![
            MachineRecord::Config { config: self.config.clone() },
            MachineRecord::Sample { ids: self.sample_ids.clone() },
        ];
        for m in &self.modes {
            out.push(MachineRecord::Mode {
                mode: m.mode,
                aggregate: m.aggregate,
                corpus_bleu: m.corpus_bleu,
                fallback_rate: m.fallback_rate,
                truncation_rate: m.truncation_rate,
            });
            out.extend(m.records.iter().map(|r| MachineRecord::Example { record: r.clone() }));
            out.extend(m.failures.iter().map(|f| MachineRecord::Failure { failure: f.clone() }));
        }
        out
    }

    pub fn from_machine_records(records: impl IntoIterator<Item = MachineRecord>) -> Result<RunReport, HarnessError> {
        let bad = |line: usize, message: &str| HarnessError::Record { line, message: message.to_string() };
        let mut config = None;
        let mut sample_ids = None;
        let mut modes: Vec<ModeReport> = Vec::new();
        for (i, record) in records.into_iter().enumerate() {
            let line = i + 1;
            match record {
                MachineRecord::Config { config: c } => {
                    if config.replace(c).is_some() {
                        return Err(bad(line, "second config record"));
                    }
                }
                MachineRecord::Sample { ids } => {
                    if sample_ids.replace(ids).is_some() {
                        return Err(bad(line, "second sample record"));
                    }
                }
                MachineRecord::Mode { mode, aggregate, corpus_bleu, fallback_rate, truncation_rate } => {
                    if modes.iter().any(|m| m.mode == mode) {
                        return Err(bad(line, "arm listed twice"));
                    }
                    modes.push(ModeReport {
                        mode,
                        aggregate,
                        corpus_bleu,
                        fallback_rate,
                        truncation_rate,
                        records: Vec::new(),
                        failures: Vec::new(),
                    });
                }
                MachineRecord::Example { record } => {
                    let mode = record.summary.mode;
                    let m = modes.iter_mut().find(|m| m.mode == mode).ok_or_else(|| bad(line, "example before its arm"))?;
                    m.records.push(record);
                }
                MachineRecord::Failure { failure } => {
                    let mode = failure.mode;
                    let m = modes.iter_mut().find(|m| m.mode == mode).ok_or_else(|| bad(line, "failure before its arm"))?;
                    m.failures.push(failure);
                }
            }
        }
        Ok(RunReport {
            config: config.ok_or_else(|| bad(0, "no config record"))?,
            sample_ids: sample_ids.ok_or_else(|| bad(0, "no sample record"))?,
            modes,
        })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn write_lines<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(&item).expect("run records serialize");
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_machine_records(path: &Path) -> Result<RunReport, HarnessError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line).map_err(|e| HarnessError::Record { line: i + 1, message: e.to_string() })?,
        );
    }
    RunReport::from_machine_records(records)
}

/// Writes one report format into `dir` and returns the file written.
pub fn emit_report(report: &RunReport, dir: &Path, format: ReportFormat) -> Result<PathBuf, HarnessError> {
    report.check_accounting()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    match format {
        ReportFormat::HumanTable => {
            let path = dir.join(REPORT_FILE);
            write_text(&path, &render_human_table(report))?;
            Ok(path)
        }
        ReportFormat::MachineRecords => {
            let path = dir.join(RECORDS_FILE);
            write_lines(&path, report.to_machine_records())?;
            Ok(path)
        }
    }
}

/// Writes the complete run directory.
pub fn write_run_dir(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    emit_report(report, dir, ReportFormat::MachineRecords)?;
    emit_report(report, dir, ReportFormat::HumanTable)?;

    let config = serde_json::to_string_pretty(&report.config).expect("config serializes");
    write_text(&dir.join(CONFIG_FILE), &(config + "\n"))?;

    let all = || report.modes.iter().flat_map(|m| m.records.iter());
    write_lines(
        &dir.join(DECOMPOSITIONS_FILE),
        all().filter_map(|r| {
            let d = r.summary.decomposition.as_ref()?;
            Some(json!({ "example_id": r.example_id(), "decomposition": d }))
        }),
    )?;
    write_lines(
        &dir.join(SUMMARIES_FILE),
        all().map(|r| {
            let s = &r.summary;
            json!({
                "example_id": s.example_id,
                "mode": s.mode,
                "summary_text": s.summary_text,
                "truncated_input": s.truncated_input,
                "prompt_estimate": s.prompt_estimate,
                "summary_fingerprint": s.summary_fingerprint,
                "decomposition_fingerprint": s.decomposition_fingerprint(),
            })
        }),
    )?;
    write_lines(
        &dir.join(METRICS_FILE),
        all().map(|r| json!({ "example_id": r.example_id(), "mode": r.summary.mode, "metrics": r.metrics })),
    )?;

    let arms: Vec<_> = report
        .modes
        .iter()
        .map(|m| {
            json!({
                "mode": m.mode,
                "aggregate": m.aggregate,
                "corpus_bleu": m.corpus_bleu,
                "fallback_rate": m.fallback_rate,
                "truncation_rate": m.truncation_rate,
                "successes": m.records.len(),
                "failures": m.failures.len(),
            })
        })
        .collect();
    let aggregate = json!({
        "metrics": report.config.metrics.describe(),
        "arms": arms,
        "comparison": compare(report).ok().map(|c| c.rows),
    });
    write_text(
        &dir.join(AGGREGATE_FILE),
        &(serde_json::to_string_pretty(&aggregate).expect("aggregate serializes") + "\n"),
    )?;
    Ok(RUN_FILES.iter().map(|f| dir.join(f)).collect())
}

/// Column headers and values shown in the human table (F scores).
fn table_columns(m: &MetricReport, with_parent: bool) -> Vec<(&'static str, f64)> {
    let mut cols = vec![
        ("BLEU", m.bleu),
        ("ROUGE-1", m.rouge1.f),
        ("ROUGE-2", m.rouge2.f),
        ("ROUGE-L", m.rouge_l.f),
    ];
    if with_parent {
        cols.push(("PARENT", m.parent.map_or(f64::NAN, |p| p.f)));
    }
    cols
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

pub fn render_human_table(report: &RunReport) -> String {
    let mut out = String::new();
    let cfg = &report.config;
    out.push_str(&format!("summarizer: {}\n", cfg.summarizer.model));
    if let Some(d) = &cfg.decomposer {
        out.push_str(&format!("decomposer: {}\n", d.model));
    }
    out.push_str(&format!(
        "sample: {} examples, seed {}; budget {} tokens\n",
        report.sample_ids.len(),
        cfg.seed,
        cfg.budget.max_tokens()
    ));
    out.push_str(&format!("metrics: {}\n\n", cfg.metrics.describe()));

    let with_parent = report
        .modes
        .iter()
        .any(|m| m.aggregate.is_some_and(|a| a.mean.parent.is_some()));
    let mut header = format!("{:<12}", "mode");
    for (name, _) in table_columns(&MetricReport::default(), with_parent) {
        header.push_str(&format!("{name:>10}"));
    }
    out.push_str(header.trim_end());
    out.push('\n');
    for m in &report.modes {
        let mut line = format!("{:<12}", m.mode.as_str());
        match &m.aggregate {
            Some(a) => {
                for (_, v) in table_columns(&a.mean, with_parent) {
                    if v.is_nan() {
                        line.push_str(&format!("{:>10}", "n/a"));
                    } else {
                        line.push_str(&format!("{v:>10.4}"));
                    }
                }
            }
            None => line.push_str("  no successful examples"),
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out.push_str("(F scores; BLEU is the sentence-level mean)\n\n");

    for m in &report.modes {
        out.push_str(&format!(
            "{}: successes {}, failures: {}, truncation rate {}, fallback rate {}, corpus BLEU {}\n",
            m.mode,
            m.records.len(),
            m.failures.len(),
            fmt_rate(m.truncation_rate),
            fmt_rate(m.fallback_rate),
            fmt_rate(m.corpus_bleu),
        ));
        for f in &m.failures {
            out.push_str(&format!("  failed {} at {:?}: {}\n", f.example_id, f.stage, f.error));
        }
    }
    if let Ok(c) = compare(report) {
        out.push('\n');
        out.push_str(&c.to_string());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub metric: String,
    pub original: f64,
    pub decomposed: f64,
    /// `decomposed - original`.
    pub delta: f64,
}

impl DeltaRow {
    pub fn direction(&self) -> &'static str {
        if self.delta > 0.0 {
            "+"
        } else if self.delta < 0.0 {
            "-"
        } else {
            "="
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<DeltaRow>,
}

impl Comparison {
    pub fn row(&self, metric: &str) -> Option<&DeltaRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10}{:>11}{:>11}{:>10}", "metric", "original", "decomposed", "delta")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<10}{:>11.4}{:>11.4}{:>+10.4} {}",
                r.metric,
                r.original,
                r.decomposed,
                r.delta,
                r.direction()
            )?;
        }
        Ok(())
    }
}

/// Per-metric deltas of the decomposed arm over the original arm.
pub fn compare(report: &RunReport) -> Result<Comparison, HarnessError> {
    let agg = |mode| report.mode(mode).and_then(|m| m.aggregate).map(|a| a.mean);
    let (Some(original), Some(decomposed)) = (agg(Mode::Original), agg(Mode::Decomposed)) else {
        return Err(HarnessError::SingleMode);
    };
    let delta = decomposed.minus(&original);
    let rows = original
        .values()
        .into_iter()
        .zip(decomposed.values())
        .zip(delta.values())
        .filter(|(((a, _), (b, _)), (c, _))| a == b && b == c)
        .map(|(((metric, o), (_, d)), (_, delta))| DeltaRow { metric: metric.to_string(), original: o, decomposed: d, delta })
        .collect();
    Ok(Comparison { rows })
}
