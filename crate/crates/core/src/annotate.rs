//! Human annotation of generated summaries: a shared worklist, a terminal
//! prompt flow with per-rater append-only files, error tallies and
//! inter-rater agreement.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{load_dataset, sample_indices, SchemaMode};
use crate::decompose::DecompositionResult;
use crate::harness::RunReport;
use crate::metrics::{icc, IccForm, MetricError, RatingMatrix};
use crate::serialize::markdown::to_markdown;
use crate::summarize::Mode;
use crate::table::Table;

pub const ANNOTATIONS_DIR: &str = "annotations";
pub const WORKLIST_FILE: &str = "worklist.json";

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("worklist of {size} requested but only {population} successful examples exist")]
    SampleTooLarge { size: usize, population: usize },
    #[error("run has no {0} arm")]
    NoSuchMode(Mode),
    #[error("example {example_id}: missing {what}")]
    MissingArtifact { example_id: String, what: String },
    #[error("existing worklist was drawn with different settings ({0}); remove it to draw a new one")]
    WorklistMismatch(String),
    #[error("incomplete coverage, {} missing (rater, example) pairs: {}", .0.len(), format_pairs(.0))]
    Coverage(Vec<(String, String)>),
    #[error("rater id {0:?} may only use letters, digits, '-', '_' and '.'")]
    InvalidRater(String),
    #[error("agreement needs at least two raters, found {0}")]
    TooFewRaters(usize),
    #[error("no annotation records")]
    NoRecords,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(r, e)| format!("({r}, {e})")).collect::<Vec<_>>().join(", ")
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> AnnotateError + '_ {
    move |source| AnnotateError::Io { path: path.to_path_buf(), source }
}

/// A 1 to 5 rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Likert(u8);

impl Likert {
    pub fn new(value: u8) -> Option<Likert> {
        (1..=5).contains(&value).then_some(Likert(value))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Likert {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        Likert::new(v).ok_or_else(|| format!("score {v} is outside 1..=5"))
    }
}

impl From<Likert> for u8 {
    fn from(l: Likert) -> u8 {
        l.0
    }
}

impl FromStr for Likert {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let v: u8 = s.trim().parse().map_err(|_| format!("{:?} is not a number from 1 to 5", s.trim()))?;
        Likert::try_from(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    FactualIncorrectness,
    IrrelevantInformation,
    Hallucination,
    Repetition,
    Correct,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        ErrorCategory::FactualIncorrectness,
        ErrorCategory::IrrelevantInformation,
        ErrorCategory::Hallucination,
        ErrorCategory::Repetition,
        ErrorCategory::Correct,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ErrorCategory::FactualIncorrectness => "factual incorrectness",
            ErrorCategory::IrrelevantInformation => "irrelevant information",
            ErrorCategory::Hallucination => "hallucination",
            ErrorCategory::Repetition => "repetition",
            ErrorCategory::Correct => "correct",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ErrorCategory {
    type Err = String;
    /// Accepts the menu number, the full name, or its first word.
    fn from_str(s: &str) -> Result<Self, String> {
        let key = s.trim().to_lowercase().replace(['_', '-'], " ");
        if let Ok(n) = key.parse::<usize>() {
            return ErrorCategory::ALL
                .get(n.wrapping_sub(1))
                .copied()
                .ok_or_else(|| format!("choose 1 to {}", ErrorCategory::ALL.len()));
        }
        ErrorCategory::ALL
            .into_iter()
            .find(|c| c.label() == key || c.label().split(' ').next() == Some(key.as_str()))
            .ok_or_else(|| format!("unknown category {:?}", s.trim()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub example_id: String,
    pub rater_id: String,
    pub accuracy: Likert,
    pub relevance: Likert,
    pub clarity: Likert,
    pub error_category: ErrorCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition_quality: Option<Likert>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Accuracy,
    Relevance,
    Clarity,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Accuracy, Criterion::Relevance, Criterion::Clarity];

    pub fn of(self, r: &AnnotationRecord) -> Likert {
        match self {
            Criterion::Accuracy => r.accuracy,
            Criterion::Relevance => r.relevance,
            Criterion::Clarity => r.clarity,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Criterion::Accuracy => "Accuracy",
            Criterion::Relevance => "Relevance",
            Criterion::Clarity => "Clarity",
        }
    }
}

/// Anchors shown when rating how well a decomposition kept the needed columns.
pub const DECOMPOSITION_ANCHORS: [&str; 5] = [
    "1 - most columns needed for the question were dropped",
    "2 - several needed columns were dropped",
    "3 - some needed columns were dropped, or many unneeded ones kept",
    "4 - every needed column is there, plus a few unneeded ones",
    "5 - exactly the columns needed for the question, nothing else",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Worklist {
    pub mode: Mode,
    pub size: usize,
    pub seed: u64,
    pub example_ids: Vec<String>,
}

/// Draws the common worklist from the successful examples of one arm.
///
/// The population is taken in sample order, so the draw depends only on the
/// report, `size` and `seed`.
pub fn sample_for_annotation(report: &RunReport, mode: Mode, size: usize, seed: u64) -> Result<Worklist, AnnotateError> {
    let arm = report.mode(mode).ok_or(AnnotateError::NoSuchMode(mode))?;
    let population: Vec<&str> = arm.records.iter().map(|r| r.example_id()).collect();
    let picked = sample_indices(population.len(), size, seed)
        .map_err(|_| AnnotateError::SampleTooLarge { size, population: population.len() })?;
    Ok(Worklist { mode, size, seed, example_ids: picked.into_iter().map(|i| population[i].to_string()).collect() })
}

/// Loads `annotations/worklist.json`, creating it on first use. An existing
/// worklist drawn with other settings is an error, so every rater sees the same list.
pub fn load_or_create_worklist(
    run_dir: &Path,
    report: &RunReport,
    mode: Mode,
    size: usize,
    seed: u64,
) -> Result<Worklist, AnnotateError> {
    let dir = run_dir.join(ANNOTATIONS_DIR);
    let path = dir.join(WORKLIST_FILE);
    if path.exists() {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let existing: Worklist = serde_json::from_str(&text)
            .map_err(|e| AnnotateError::Malformed { path: path.clone(), line: e.line(), message: e.to_string() })?;
        if (existing.mode, existing.size, existing.seed) != (mode, size, seed) {
            return Err(AnnotateError::WorklistMismatch(format!(
                "{} arm, size {}, seed {}",
                existing.mode, existing.size, existing.seed
            )));
        }
        return Ok(existing);
    }
    let worklist = sample_for_annotation(report, mode, size, seed)?;
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let json = serde_json::to_string_pretty(&worklist).expect("worklist serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(worklist)
}

/// Reads an existing worklist.
pub fn load_worklist(run_dir: &Path) -> Result<Worklist, AnnotateError> {
    let path = run_dir.join(ANNOTATIONS_DIR).join(WORKLIST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| AnnotateError::Malformed { path, line: e.line(), message: e.to_string() })
}

/// Everything a rater sees for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationItem {
    pub example_id: String,
    pub query: String,
    pub table: Table,
    pub summary: String,
    pub reference: String,
    pub decomposition: Option<DecompositionResult>,
}

/// Resolves worklist ids to displayable items. Original-arm tables are read
/// back from the run's dataset.
pub fn build_items(report: &RunReport, worklist: &Worklist) -> Result<Vec<AnnotationItem>, AnnotateError> {
    let arm = report.mode(worklist.mode).ok_or(AnnotateError::NoSuchMode(worklist.mode))?;
    let by_id: HashMap<&str, _> = arm.records.iter().map(|r| (r.example_id(), r)).collect();
    let mut tables: Option<HashMap<String, Table>> = None;
    let mut items = Vec::with_capacity(worklist.example_ids.len());
    for id in &worklist.example_ids {
        let missing = |what: &str| AnnotateError::MissingArtifact { example_id: id.clone(), what: what.to_string() };
        let record = by_id.get(id.as_str()).ok_or_else(|| missing("summary record"))?;
        let table = match &record.summary.decomposition {
            Some(d) => d.decomposed.clone(),
            None => {
                if tables.is_none() {
                    let loaded = load_dataset(&report.config.dataset, SchemaMode::Lenient)
                        .map_err(|e| missing(&format!("source table ({e})")))?;
                    tables = Some(loaded.examples.into_iter().map(|e| (e.example_id, e.table)).collect());
                }
                tables.as_ref().and_then(|t| t.get(id)).cloned().ok_or_else(|| missing("source table"))?
            }
        };
        items.push(AnnotationItem {
            example_id: id.clone(),
            query: record.query.clone(),
            table,
            summary: record.summary.summary_text.clone(),
            reference: record.reference.clone(),
            decomposition: record.summary.decomposition.clone(),
        });
    }
    Ok(items)
}

/// Per-rater append-only record files under `<run>/annotations/`.
#[derive(Debug, Clone)]
pub struct AnnotationStore {
    dir: PathBuf,
}

fn valid_rater_id(rater: &str) -> bool {
    !rater.is_empty() && rater.chars().all(|c| c.is_alphanumeric() || matches!(c, '-' | '_' | '.')) && rater != "." && rater != ".."
}

impl AnnotationStore {
    pub fn open(run_dir: &Path) -> Result<Self, AnnotateError> {
        let dir = run_dir.join(ANNOTATIONS_DIR);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(AnnotationStore { dir })
    }

    pub fn path_for(&self, rater: &str) -> PathBuf {
        self.dir.join(format!("{rater}.jsonl"))
    }

    pub fn load(&self, rater: &str) -> Result<Vec<AnnotationRecord>, AnnotateError> {
        let path = self.path_for(rater);
        if !path.exists() {
            return Ok(Vec::new());
        }
        read_records(&path)
    }

    pub fn append(&self, record: &AnnotationRecord) -> Result<(), AnnotateError> {
        let path = self.path_for(&record.rater_id);
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        let line = serde_json::to_string(record).expect("annotation serializes");
        writeln!(file, "{line}").map_err(io_err(&path))?;
        file.sync_data().map_err(io_err(&path))
    }

    /// All raters' records, keyed by rater id.
    pub fn load_all(&self) -> Result<BTreeMap<String, Vec<AnnotationRecord>>, AnnotateError> {
        let mut out = BTreeMap::new();
        let entries = fs::read_dir(&self.dir).map_err(io_err(&self.dir))?;
        for entry in entries {
            let path = entry.map_err(io_err(&self.dir))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            let Some(rater) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            out.insert(rater.to_string(), read_records(&path)?);
        }
        Ok(out)
    }
}

pub fn read_records(path: &Path) -> Result<Vec<AnnotationRecord>, AnnotateError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| AnnotateError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionOutcome {
    /// Items already annotated before this session.
    pub resumed_from: usize,
    pub recorded: usize,
    pub remaining: usize,
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

struct Prompter<'a, R, W> {
    input: &'a mut R,
    output: &'a mut W,
}

impl<R: BufRead, W: Write> Prompter<'_, R, W> {
    /// Asks until `parse` accepts; `None` at end of input.
    fn ask<T>(&mut self, question: &str, parse: impl Fn(&str) -> Result<T, String>) -> io::Result<Option<T>> {
        loop {
            write!(self.output, "{question} ")?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                writeln!(self.output)?;
                return Ok(None);
            }
            match parse(&line) {
                Ok(v) => return Ok(Some(v)),
                Err(msg) => writeln!(self.output, "  {msg}; try again.")?,
            }
        }
    }
}

fn show_item<W: Write>(out: &mut W, item: &AnnotationItem, position: usize, total: usize) -> io::Result<()> {
    writeln!(out, "\n=== item {position} of {total}: {} ===", item.example_id)?;
    writeln!(out, "Question: {}", item.query)?;
    if !item.table.title().is_empty() {
        writeln!(out, "Title: {}", item.table.title())?;
    }
    writeln!(out, "{}", to_markdown(&item.table))?;
    writeln!(out, "\nGenerated summary:\n{}", item.summary)?;
    writeln!(out, "\nReference summary:\n{}\n", item.reference)
}

/// Runs an interactive session for `rater` over `items`, skipping items the
/// rater already annotated. Each finished item is appended immediately, so
/// stopping (end of input) loses at most the item in progress.
pub fn run_session<R: BufRead, W: Write>(
    items: &[AnnotationItem],
    rater: &str,
    store: &AnnotationStore,
    input: &mut R,
    output: &mut W,
) -> Result<SessionOutcome, AnnotateError> {
    run_session_with_clock(items, rater, store, input, output, now_unix)
}

pub fn run_session_with_clock<R: BufRead, W: Write>(
    items: &[AnnotationItem],
    rater: &str,
    store: &AnnotationStore,
    input: &mut R,
    output: &mut W,
    clock: impl Fn() -> u64,
) -> Result<SessionOutcome, AnnotateError> {
    if !valid_rater_id(rater) {
        return Err(AnnotateError::InvalidRater(rater.to_string()));
    }
    let out_err = |e: io::Error| AnnotateError::Io { path: PathBuf::from("<terminal>"), source: e };
    let done: std::collections::HashSet<String> = store.load(rater)?.into_iter().map(|r| r.example_id).collect();
    let resumed_from = items.iter().filter(|i| done.contains(&i.example_id)).count();
    let mut p = Prompter { input, output };
    let mut recorded = 0;
    let category_menu: String = ErrorCategory::ALL
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{}={}", i + 1, c))
        .collect::<Vec<_>>()
        .join(", ");

    if resumed_from > 0 {
        writeln!(p.output, "resuming: {resumed_from} of {} items already rated", items.len()).map_err(out_err)?;
    }
    for (index, item) in items.iter().enumerate() {
        if done.contains(&item.example_id) {
            continue;
        }
        show_item(p.output, item, index + 1, items.len()).map_err(out_err)?;
        let mut scores = Vec::with_capacity(3);
        for criterion in Criterion::ALL {
            match p.ask(&format!("{} (1-5):", criterion.label()), |s| s.parse::<Likert>()).map_err(out_err)? {
                Some(v) => scores.push(v),
                None => return Ok(SessionOutcome { resumed_from, recorded, remaining: items.len() - resumed_from - recorded }),
            }
        }
        let Some(error_category) = p
            .ask(&format!("Error category ({category_menu}):"), |s| s.parse::<ErrorCategory>())
            .map_err(out_err)?
        else {
            return Ok(SessionOutcome { resumed_from, recorded, remaining: items.len() - resumed_from - recorded });
        };
        let decomposition_quality = if item.decomposition.is_some() {
            writeln!(p.output, "Decomposition quality:").map_err(out_err)?;
            for anchor in DECOMPOSITION_ANCHORS {
                writeln!(p.output, "  {anchor}").map_err(out_err)?;
            }
            match p.ask("Rating (1-5):", |s| s.parse::<Likert>()).map_err(out_err)? {
                Some(v) => Some(v),
                None => return Ok(SessionOutcome { resumed_from, recorded, remaining: items.len() - resumed_from - recorded }),
            }
        } else {
            None
        };
        store.append(&AnnotationRecord {
            example_id: item.example_id.clone(),
            rater_id: rater.to_string(),
            accuracy: scores[0],
            relevance: scores[1],
            clarity: scores[2],
            error_category,
            decomposition_quality,
            timestamp: clock(),
        })?;
        recorded += 1;
    }
    Ok(SessionOutcome { resumed_from, recorded, remaining: items.len() - resumed_from - recorded })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTally {
    pub counts: BTreeMap<ErrorCategory, usize>,
    pub total: usize,
}

impl ErrorTally {
    pub fn count(&self, category: ErrorCategory) -> usize {
        self.counts.get(&category).copied().unwrap_or(0)
    }
}

/// Records per error category; every category appears, zeros included.
pub fn error_tally(records: &[AnnotationRecord]) -> ErrorTally {
    let mut counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|&c| (c, 0)).collect();
    for r in records {
        *counts.entry(r.error_category).or_insert(0) += 1;
    }
    ErrorTally { counts, total: records.len() }
}

impl fmt::Display for ErrorTally {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<24}{:>7}", "error category", "count")?;
        for c in ErrorCategory::ALL {
            writeln!(f, "{:<24}{:>7}", c.label(), self.count(c))?;
        }
        writeln!(f, "{:<24}{:>7}", "total", self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionAgreement {
    pub criterion: Criterion,
    pub mean: f64,
    pub icc_single: Option<f64>,
    pub icc_average: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub model: String,
    pub raters: Vec<String>,
    pub items: usize,
    pub criteria: Vec<CriterionAgreement>,
    /// ICC over (example, criterion) rows, the headline value.
    pub pooled_single: Option<f64>,
    pub pooled_average: Option<f64>,
    pub headline_form: IccForm,
    pub decomposition_quality_mean: Option<f64>,
}

impl AgreementReport {
    pub fn headline(&self) -> Option<f64> {
        match self.headline_form {
            IccForm::TwoWayRandomSingle => self.pooled_single,
            IccForm::TwoWayRandomAverage => self.pooled_average,
        }
    }

    pub fn mean(&self, criterion: Criterion) -> Option<f64> {
        self.criteria.iter().find(|c| c.criterion == criterion).map(|c| c.mean)
    }
}

fn icc_or_none(rows: Vec<Vec<f64>>, form: IccForm) -> Result<Option<f64>, AnnotateError> {
    let matrix = RatingMatrix::new(rows)?;
    match icc(&matrix, form) {
        Ok(v) => Ok(Some(v)),
        Err(MetricError::ZeroVariance) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// ICC per criterion and pooled over all three, plus Table-3-style means.
///
/// Every rater must have rated every worklist item; the first record for an
/// item counts.
pub fn agreement_report(
    records_by_rater: &BTreeMap<String, Vec<AnnotationRecord>>,
    worklist: &[String],
    model: &str,
) -> Result<AgreementReport, AnnotateError> {
    if records_by_rater.len() < 2 {
        return Err(AnnotateError::TooFewRaters(records_by_rater.len()));
    }
    if worklist.is_empty() {
        return Err(AnnotateError::NoRecords);
    }
    let mut lookup: BTreeMap<&str, HashMap<&str, &AnnotationRecord>> = BTreeMap::new();
    for (rater, records) in records_by_rater {
        let mine = lookup.entry(rater.as_str()).or_default();
        for r in records {
            mine.entry(r.example_id.as_str()).or_insert(r);
        }
    }
    let missing: Vec<(String, String)> = lookup
        .iter()
        .flat_map(|(rater, mine)| {
            worklist.iter().filter(|id| !mine.contains_key(id.as_str())).map(move |id| (rater.to_string(), id.clone()))
        })
        .collect();
    if !missing.is_empty() {
        return Err(AnnotateError::Coverage(missing));
    }

    let raters: Vec<&str> = lookup.keys().copied().collect();
    let matrix_for = |criteria: &[Criterion]| -> Vec<Vec<f64>> {
        let mut rows = Vec::new();
        for id in worklist {
            for &c in criteria {
                rows.push(raters.iter().map(|r| f64::from(c.of(lookup[r][id.as_str()]).get())).collect());
            }
        }
        rows
    };

    let mut criteria = Vec::new();
    for c in Criterion::ALL {
        let rows = matrix_for(&[c]);
        let mean = rows.iter().flatten().sum::<f64>() / (rows.len() * raters.len()) as f64;
        let (icc_single, icc_average) = if rows.len() >= 2 {
            (icc_or_none(rows.clone(), IccForm::TwoWayRandomSingle)?, icc_or_none(rows, IccForm::TwoWayRandomAverage)?)
        } else {
            (None, None)
        };
        criteria.push(CriterionAgreement { criterion: c, mean, icc_single, icc_average });
    }
    let pooled = matrix_for(&Criterion::ALL);
    let pooled_single = icc_or_none(pooled.clone(), IccForm::TwoWayRandomSingle)?;
    let pooled_average = icc_or_none(pooled, IccForm::TwoWayRandomAverage)?;

    let dq: Vec<f64> = raters
        .iter()
        .flat_map(|r| worklist.iter().filter_map(|id| lookup[r][id.as_str()].decomposition_quality))
        .map(|l| f64::from(l.get()))
        .collect();
    Ok(AgreementReport {
        model: model.to_string(),
        raters: raters.iter().map(|r| r.to_string()).collect(),
        items: worklist.len(),
        criteria,
        pooled_single,
        pooled_average,
        headline_form: IccForm::default(),
        decomposition_quality_mean: (!dq.is_empty()).then(|| dq.iter().sum::<f64>() / dq.len() as f64),
    })
}

fn fmt_icc(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined (no variance)".to_string(), |v| format!("{v:.4}"))
}

impl fmt::Display for AgreementReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} raters, {} items", self.raters.len(), self.items)?;
        writeln!(f, "{:<20}{:>10}{:>11}{:>9}", "Model", "Accuracy", "Relevance", "Clarity")?;
        let m = |c| self.mean(c).unwrap_or(f64::NAN);
        writeln!(
            f,
            "{:<20}{:>10.2}{:>11.2}{:>9.2}",
            self.model,
            m(Criterion::Accuracy),
            m(Criterion::Relevance),
            m(Criterion::Clarity)
        )?;
        writeln!(f)?;
        writeln!(f, "ICC pooled over the three criteria")?;
        writeln!(f, "  {}: {}", IccForm::TwoWayRandomSingle.label(), fmt_icc(self.pooled_single))?;
        writeln!(f, "  {}: {}", IccForm::TwoWayRandomAverage.label(), fmt_icc(self.pooled_average))?;
        writeln!(f, "  headline form: {}", self.headline_form.label())?;
        for c in &self.criteria {
            writeln!(
                f,
                "{:<10} ICC(2,1) {}  ICC(2,k) {}",
                c.criterion.label(),
                fmt_icc(c.icc_single),
                fmt_icc(c.icc_average)
            )?;
        }
        if let Some(q) = self.decomposition_quality_mean {
            writeln!(f, "decomposition quality mean: {q:.2} / 5")?;
        }
        Ok(())
    }
}
