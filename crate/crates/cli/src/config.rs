//! Config file schema and flag/env/file merging.
//!
//! Flags win over environment variables (clap reads both), which win over
//! the TOML file, which wins over built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use tabsum_core::dataset::SchemaMode;
use tabsum_core::harness::{EndpointConfig, RunConfig};
use tabsum_core::llm::ClientConfig;
use tabsum_core::metrics::MetricConfig;
use tabsum_core::{Estimator, Mode, TokenBudget};

use crate::{EndpointArgs, RunArgs, SampleArgs};

pub const DEFAULT_PARALLELISM: usize = 4;
pub const DEFAULT_BUDGET: usize = 512;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub schema: Option<SchemaMode>,
    pub sample_size: Option<usize>,
    pub seed: Option<u64>,
    pub modes: Option<Vec<Mode>>,
    pub budget: Option<usize>,
    pub estimator: Option<Estimator>,
    pub parallelism: Option<usize>,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub offline: Option<bool>,
    pub summarizer: Option<FileEndpoint>,
    pub decomposer: Option<FileEndpoint>,
    pub metrics: Option<MetricConfig>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEndpoint {
    pub model: Option<String>,
    pub base_url: Option<String>,
    pub temperature: Option<f64>,
    pub max_output_tokens: Option<u32>,
    pub prompt_template: Option<PathBuf>,
    pub prompt_preamble: Option<String>,
    pub timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
    pub initial_backoff_ms: Option<u64>,
    pub requests_per_minute: Option<u32>,
    pub cache_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

pub struct Resolved {
    pub dataset: PathBuf,
    pub schema: SchemaMode,
    pub sample_size: Option<usize>,
    pub seed: u64,
    pub parallelism: usize,
    pub out: PathBuf,
}

pub fn resolve_sample(args: &SampleArgs, out: Option<&PathBuf>, file: &FileConfig) -> Result<Resolved> {
    let dataset = args
        .dataset
        .clone()
        .or_else(|| file.dataset.clone())
        .context("no dataset given (use --dataset, TABSUM_DATASET or `dataset` in the config file)")?;
    let out = out
        .cloned()
        .or_else(|| file.out.clone())
        .context("no output directory given (use --out, TABSUM_OUT or `out` in the config file)")?;
    let parallelism = args.parallelism.or(file.parallelism).unwrap_or(DEFAULT_PARALLELISM);
    if parallelism == 0 {
        bail!("parallelism must be at least 1");
    }
    Ok(Resolved {
        dataset,
        schema: if args.lenient { SchemaMode::Lenient } else { file.schema.unwrap_or_default() },
        sample_size: args.size.or(file.sample_size),
        seed: args.seed.or(file.seed).unwrap_or(0),
        parallelism,
        out,
    })
}

/// Merges one endpoint. Returns `None` when no model is named anywhere.
fn resolve_endpoint(
    model: Option<&String>,
    url: Option<&String>,
    file: Option<&FileEndpoint>,
    shared: &EndpointArgs,
    file_config: &FileConfig,
    out: &Path,
) -> Option<EndpointConfig> {
    let f = file.cloned().unwrap_or_default();
    let model = model.cloned().or(f.model)?;
    let defaults = ClientConfig::default();
    let client = ClientConfig {
        base_url: url.cloned().or(f.base_url).unwrap_or(defaults.base_url),
        timeout_secs: f.timeout_secs.unwrap_or(defaults.timeout_secs),
        max_retries: shared.max_retries.or(f.max_retries).unwrap_or(defaults.max_retries),
        initial_backoff_ms: f.initial_backoff_ms.unwrap_or(defaults.initial_backoff_ms),
        requests_per_minute: shared.requests_per_minute.or(f.requests_per_minute),
        cache_dir: Some(
            shared
                .cache_dir
                .clone()
                .or(f.cache_dir)
                .or_else(|| file_config.cache_dir.clone())
                .unwrap_or_else(|| out.join("cache")),
        ),
        offline: shared.offline || file_config.offline.unwrap_or(false),
        api_key: None,
    };
    Some(EndpointConfig {
        model,
        temperature: f.temperature.unwrap_or(0.0),
        max_output_tokens: shared.max_output_tokens.or(f.max_output_tokens).unwrap_or(256),
        prompt_template: f.prompt_template,
        prompt_preamble: f.prompt_preamble,
        client,
    })
}

pub fn resolve_decomposer(shared: &EndpointArgs, file: &FileConfig, out: &Path) -> Option<EndpointConfig> {
    resolve_endpoint(
        shared.decomposer_model.as_ref(),
        shared.decomposer_url.as_ref(),
        file.decomposer.as_ref(),
        shared,
        file,
        out,
    )
}

pub fn resolve_run(args: &RunArgs, file: &FileConfig) -> Result<RunConfig> {
    let r = resolve_sample(&args.sample, args.out.as_ref(), file)?;
    let e = &args.endpoints;
    let summarizer = resolve_endpoint(
        e.summarizer_model.as_ref(),
        e.summarizer_url.as_ref(),
        file.summarizer.as_ref(),
        e,
        file,
        &r.out,
    )
    .context("no summarizer model given (use --summarizer-model or [summarizer] model in the config file)")?;
    let decomposer = resolve_decomposer(e, file, &r.out);
    let modes = match &args.modes {
        Some(m) => m.0.clone(),
        None => file.modes.clone().unwrap_or_else(|| vec![Mode::Original, Mode::Decomposed]),
    };
    let estimator = args.estimator.map(Estimator::from).or(file.estimator).unwrap_or_default();
    let max_tokens = args.budget.or(file.budget).unwrap_or(DEFAULT_BUDGET);
    let budget = TokenBudget::new(max_tokens, estimator).context("invalid budget")?;
    let mut metrics = file.metrics.unwrap_or_default();
    if let Some(lambda) = args.parent_lambda {
        metrics.parent_lambda = lambda;
    }
    if !(0.0..=1.0).contains(&metrics.parent_lambda) {
        bail!("PARENT lambda must lie in [0, 1]");
    }
    Ok(RunConfig {
        dataset: r.dataset,
        schema: r.schema,
        sample_size: r.sample_size,
        seed: r.seed,
        modes,
        budget,
        summarizer,
        decomposer,
        parallelism: r.parallelism,
        output_dir: r.out,
        metrics,
    })
}
