//! Batch runs over a sampled split: summarize every example in each arm,
//! score it against its reference and collect the results.

mod report;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{
    compare, emit_report, read_machine_records, render_human_table, write_run_dir, Comparison, DeltaRow,
    MachineRecord, ReportFormat, AGGREGATE_FILE, CONFIG_FILE, DECOMPOSITIONS_FILE, METRICS_FILE, RECORDS_FILE,
    REPORT_FILE, RUN_FILES, SUMMARIES_FILE,
};

use crate::dataset::{load_dataset, sample_split, DatasetError, SchemaMode, SplitName};
use crate::decompose::{DecomposeError, DecompositionResult, Decomposer};
use crate::llm::{ClientConfig, Completer, LlmClient, LlmError, ModelEndpoint};
use crate::metrics::{self, corpus_bleu, AggregateReport, MetricConfig, MetricReport};
use crate::serialize::budget::TokenBudget;
use crate::serialize::prompt::{PromptTemplate, TemplateError};
use crate::summarize::{summarize_example, Mode, SummarizeError, SummaryResult, Summarizer};
use crate::table::QtExample;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("could not build client: {0}")]
    Client(#[from] LlmError),
    #[error("could not start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed run record at line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("accounting mismatch in {mode} arm: {detail}")]
    Accounting { mode: Mode, detail: String },
    #[error("comparison needs both the original and the decomposed arm")]
    SingleMode,
}

fn default_max_output_tokens() -> u32 {
    256
}

/// Model settings plus transport settings for one endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    /// Body template file; the built-in template is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_template: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_preamble: Option<String>,
    #[serde(default)]
    pub client: ClientConfig,
}

impl EndpointConfig {
    pub fn new(model: impl Into<String>, client: ClientConfig) -> Self {
        EndpointConfig {
            model: model.into(),
            temperature: 0.0,
            max_output_tokens: default_max_output_tokens(),
            prompt_template: None,
            prompt_preamble: None,
            client,
        }
    }

    fn endpoint(&self, client: Arc<dyn Completer>) -> ModelEndpoint {
        ModelEndpoint {
            client,
            model_name: self.model.clone(),
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    #[serde(default)]
    pub schema: SchemaMode,
    /// Number of examples to draw; the whole file (in file order) when absent.
    #[serde(default)]
    pub sample_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub modes: Vec<Mode>,
    pub budget: TokenBudget,
    pub summarizer: EndpointConfig,
    #[serde(default)]
    pub decomposer: Option<EndpointConfig>,
    pub parallelism: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub metrics: MetricConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.modes.is_empty() {
            return Err(HarnessError::Config("at least one mode is required".into()));
        }
        let mut seen = self.modes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.modes.len() {
            return Err(HarnessError::Config("a mode is listed twice".into()));
        }
        if self.parallelism == 0 {
            return Err(HarnessError::Config("parallelism must be at least 1".into()));
        }
        if self.modes.contains(&Mode::Decomposed) && self.decomposer.is_none() {
            return Err(HarnessError::Config("decomposed mode needs a decomposer endpoint".into()));
        }
        if self.summarizer.model.trim().is_empty() {
            return Err(HarnessError::Config("summarizer model name is empty".into()));
        }
        Ok(())
    }

    /// The configuration as recorded in reports: execution-only switches
    /// (offline replay, credentials) are cleared.
    pub fn snapshot(&self) -> RunConfig {
        let mut out = self.clone();
        for endpoint in std::iter::once(&mut out.summarizer).chain(out.decomposer.as_mut()) {
            endpoint.client.offline = false;
            endpoint.client.api_key = None;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureStage {
    Input,
    Decompose,
    Summarize,
    Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedExample {
    pub example_id: String,
    pub mode: Mode,
    pub stage: FailureStage,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub summary: SummaryResult,
    pub query: String,
    pub reference: String,
    pub metrics: MetricReport,
}

impl ExampleRecord {
    pub fn example_id(&self) -> &str {
        &self.summary.example_id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: Mode,
    /// Mean over successful examples; absent when every example failed.
    pub aggregate: Option<AggregateReport>,
    pub corpus_bleu: Option<f64>,
    /// Share of decompositions that kept every column (decomposed arm only).
    pub fallback_rate: Option<f64>,
    /// Share of successful examples whose table was cut to fit the budget.
    pub truncation_rate: Option<f64>,
    pub records: Vec<ExampleRecord>,
    pub failures: Vec<FailedExample>,
}

impl ModeReport {
    fn from_outcomes(
        mode: Mode,
        outcomes: Vec<Result<ExampleRecord, FailedExample>>,
        config: &MetricConfig,
    ) -> ModeReport {
        let (mut records, mut failures) = (Vec::new(), Vec::new());
        for outcome in outcomes {
            match outcome {
                Ok(r) => records.push(r),
                Err(f) => failures.push(f),
            }
        }
        let mut report = ModeReport {
            mode,
            aggregate: None,
            corpus_bleu: None,
            fallback_rate: None,
            truncation_rate: None,
            records,
            failures,
        };
        report.recompute(config);
        report
    }

    /// Rebuilds the summary statistics from the per-example records.
    pub fn recompute(&mut self, config: &MetricConfig) {
        let metrics: Vec<MetricReport> = self.records.iter().map(|r| r.metrics).collect();
        self.aggregate = metrics::aggregate(&metrics).ok();
        self.corpus_bleu = None;
        self.fallback_rate = None;
        self.truncation_rate = None;
        if self.records.is_empty() {
            return;
        }
        let n = self.records.len() as f64;
        self.truncation_rate = Some(self.records.iter().filter(|r| r.summary.truncated_input).count() as f64 / n);
        if self.mode == Mode::Decomposed {
            let fallbacks = self
                .records
                .iter()
                .filter(|r| r.summary.decomposition.as_ref().is_some_and(|d| d.fallback_used))
                .count();
            self.fallback_rate = Some(fallbacks as f64 / n);
        }
        self.corpus_bleu = self.corpus_bleu_from_texts(config);
    }

    fn corpus_bleu_from_texts(&self, config: &MetricConfig) -> Option<f64> {
        let pairs: Vec<_> = self
            .records
            .iter()
            .filter_map(|r| {
                let cand = config.normalizer.tokenize(&r.summary.summary_text);
                let reference = config.normalizer.tokenize(&r.reference);
                (!cand.is_empty() && !reference.is_empty()).then(|| (cand, vec![reference]))
            })
            .collect();
        corpus_bleu(&pairs, config.bleu_max_n).ok()
    }

    pub fn attempted(&self) -> usize {
        self.records.len() + self.failures.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    /// Sampled example ids in processing order.
    pub sample_ids: Vec<String>,
    pub modes: Vec<ModeReport>,
}

impl RunReport {
    pub fn mode(&self, mode: Mode) -> Option<&ModeReport> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    /// Every arm accounts for every sampled example exactly once.
    pub fn check_accounting(&self) -> Result<(), HarnessError> {
        let mut expected: Vec<&str> = self.sample_ids.iter().map(String::as_str).collect();
        expected.sort_unstable();
        for m in &self.modes {
            let mut seen: Vec<&str> = m
                .records
                .iter()
                .map(ExampleRecord::example_id)
                .chain(m.failures.iter().map(|f| f.example_id.as_str()))
                .collect();
            seen.sort_unstable();
            if seen != expected {
                return Err(HarnessError::Accounting {
                    mode: m.mode,
                    detail: format!(
                        "{} successes + {} failures for {} sampled examples",
                        m.records.len(),
                        m.failures.len(),
                        self.sample_ids.len()
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Summarizer and optional decomposer ready to run.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub summarizer: Summarizer,
    pub decomposer: Option<Decomposer>,
}

fn load_template(
    endpoint: &EndpointConfig,
    default: PromptTemplate,
    load: fn(&Path, Option<&str>) -> Result<PromptTemplate, TemplateError>,
) -> Result<PromptTemplate, TemplateError> {
    match &endpoint.prompt_template {
        Some(path) => load(path, endpoint.prompt_preamble.as_deref()),
        None => Ok(match &endpoint.prompt_preamble {
            Some(p) => PromptTemplate { preamble: p.clone(), ..default },
            None => default,
        }),
    }
}

impl EndpointConfig {
    /// Summarizer around `client`, with this endpoint's template.
    pub fn summarizer(&self, client: Arc<dyn Completer>, budget: TokenBudget) -> Result<Summarizer, TemplateError> {
        let mut s = Summarizer::new(self.endpoint(client), budget);
        s.template = load_template(self, PromptTemplate::default_summarization(), PromptTemplate::load_summarization)?;
        Ok(s)
    }

    /// Decomposer around `client`, with this endpoint's template.
    pub fn decomposer(&self, client: Arc<dyn Completer>) -> Result<Decomposer, TemplateError> {
        let mut d = Decomposer::new(self.endpoint(client));
        d.template = load_template(self, PromptTemplate::default_decomposition(), PromptTemplate::load_decomposition)?;
        Ok(d)
    }
}

impl Pipeline {
    /// Builds the pipeline around caller-supplied clients.
    pub fn with_clients(
        config: &RunConfig,
        summarizer: Arc<dyn Completer>,
        decomposer: Option<Arc<dyn Completer>>,
    ) -> Result<Pipeline, HarnessError> {
        let summarizer = config.summarizer.summarizer(summarizer, config.budget)?;
        let decomposer = match (&config.decomposer, decomposer) {
            (Some(cfg), Some(client)) => {
                let mut d = cfg.decomposer(client)?;
                d.estimator = config.budget.estimator();
                Some(d)
            }
            _ => None,
        };
        Ok(Pipeline { summarizer, decomposer })
    }

    /// Builds HTTP clients from the endpoint configurations.
    pub fn from_config(config: &RunConfig) -> Result<Pipeline, HarnessError> {
        let summarizer: Arc<dyn Completer> = Arc::new(LlmClient::from_config(&config.summarizer.client)?);
        let decomposer = match &config.decomposer {
            Some(cfg) => Some(Arc::new(LlmClient::from_config(&cfg.client)?) as Arc<dyn Completer>),
            None => None,
        };
        Pipeline::with_clients(config, summarizer, decomposer)
    }
}

fn failure(example: &QtExample, mode: Mode, stage: FailureStage, error: impl ToString) -> FailedExample {
    FailedExample { example_id: example.example_id.clone(), mode, stage, error: error.to_string() }
}

/// Summarizes and scores one example in one arm.
pub fn process_example(
    example: &QtExample,
    mode: Mode,
    pipeline: &Pipeline,
    metric_config: &MetricConfig,
) -> Result<ExampleRecord, FailedExample> {
    let Some(reference) = example.reference_summary.as_deref().filter(|r| !r.trim().is_empty()) else {
        return Err(failure(example, mode, FailureStage::Input, "example has no reference summary"));
    };
    let summary = summarize_example(example, mode, &pipeline.summarizer, pipeline.decomposer.as_ref()).map_err(|e| {
        let stage = match e {
            SummarizeError::Decompose(_) => FailureStage::Decompose,
            _ => FailureStage::Summarize,
        };
        failure(example, mode, stage, e)
    })?;
    let metrics = metrics::score(&summary.summary_text, reference, Some(&example.table), metric_config)
        .map_err(|e| failure(example, mode, FailureStage::Score, e))?;
    Ok(ExampleRecord { summary, query: example.query.clone(), reference: reference.to_string(), metrics })
}

/// Loads and samples the dataset named by `config`.
pub fn sample_examples(config: &RunConfig) -> Result<Vec<QtExample>, HarnessError> {
    let loaded = load_dataset(&config.dataset, config.schema)?;
    for skipped in &loaded.skipped {
        log::warn!("skipped dataset record {}: {}", skipped.record, skipped.reason);
    }
    Ok(match config.sample_size {
        None => loaded.examples,
        Some(size) => sample_split(&loaded.examples, SplitName::Test, size, config.seed)?.examples,
    })
}

/// Runs every configured arm with HTTP clients built from the configuration.
pub fn run(config: &RunConfig) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let pipeline = Pipeline::from_config(config)?;
    run_pipeline(config, &pipeline)
}

/// Runs every configured arm with an already-built pipeline.
pub fn run_pipeline(config: &RunConfig, pipeline: &Pipeline) -> Result<RunReport, HarnessError> {
    config.validate()?;
    if config.modes.contains(&Mode::Decomposed) && pipeline.decomposer.is_none() {
        return Err(HarnessError::Config("decomposed mode needs a decomposer endpoint".into()));
    }
    let examples = sample_examples(config)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.parallelism).build()?;
    let mut modes = Vec::with_capacity(config.modes.len());
    for &mode in &config.modes {
        log::info!("{mode} arm: {} examples", examples.len());
        let outcomes: Vec<_> = pool.install(|| {
            examples
                .par_iter()
                .map(|ex| process_example(ex, mode, pipeline, &config.metrics))
                .collect()
        });
        for f in outcomes.iter().filter_map(|o| o.as_ref().err()) {
            log::warn!("{mode} arm: example {} failed at {:?}: {}", f.example_id, f.stage, f.error);
        }
        modes.push(ModeReport::from_outcomes(mode, outcomes, &config.metrics));
    }
    let report = RunReport {
        config: config.snapshot(),
        sample_ids: examples.iter().map(|e| e.example_id.clone()).collect(),
        modes,
    };
    report.check_accounting()?;
    Ok(report)
}

/// Decomposes `examples` on a pool of `parallelism` workers, in input order.
pub fn decompose_examples(
    examples: &[QtExample],
    decomposer: &Decomposer,
    parallelism: usize,
) -> Result<Vec<Result<DecompositionResult, DecomposeError>>, HarnessError> {
    if parallelism == 0 {
        return Err(HarnessError::Config("parallelism must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(parallelism).build()?;
    Ok(pool.install(|| examples.par_iter().map(|ex| decomposer.decompose(ex)).collect()))
}
