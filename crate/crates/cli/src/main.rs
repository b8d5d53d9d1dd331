mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tabsum_core::{Estimator, Mode};

/// Exit status for a run that finished but recorded failed examples.
pub const EXIT_PARTIAL: u8 = 1;
/// Exit status for configuration and input errors.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "tabsum", version, about = "Query-focused table summarization with column decomposition")]
pub struct Cli {
    /// TOML config file; flags and environment variables override it.
    #[arg(long, global = true, env = "TABSUM_CONFIG")]
    pub config: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ask the decomposer for relevant columns and write decomposition records.
    Decompose(DecomposeArgs),
    /// Summarize and score a sample in the original and/or decomposed arm.
    Run(RunArgs),
    /// Score externally produced summaries against references.
    Score(ScoreArgs),
    /// Rate summaries of a finished run interactively.
    Annotate(AnnotateArgs),
    /// Inter-rater agreement, mean ratings and error tally for a run.
    Agreement(AgreementArgs),
    /// Re-render the report of a finished run.
    Report(ReportArgs),
    /// Serve canned completions on an OpenAI-style endpoint for offline testing.
    MockServe(MockServeArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Dataset file (JSONL or JSON array).
    #[arg(long, env = "TABSUM_DATASET")]
    pub dataset: Option<PathBuf>,
    /// Number of examples to draw; all examples when omitted.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, env = "TABSUM_SEED")]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "TABSUM_PARALLELISM")]
    pub parallelism: Option<usize>,
    /// Skip malformed dataset records instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct EndpointArgs {
    #[arg(long, env = "TABSUM_SUMMARIZER_MODEL")]
    pub summarizer_model: Option<String>,
    /// Base URL of the summarizer, e.g. http://host:port/v1
    #[arg(long, env = "TABSUM_SUMMARIZER_URL")]
    pub summarizer_url: Option<String>,
    #[arg(long, env = "TABSUM_DECOMPOSER_MODEL")]
    pub decomposer_model: Option<String>,
    #[arg(long, env = "TABSUM_DECOMPOSER_URL")]
    pub decomposer_url: Option<String>,
    /// Response cache directory (default: <out>/cache).
    #[arg(long, env = "TABSUM_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Answer only from the cache; a miss fails the example.
    #[arg(long, env = "TABSUM_OFFLINE")]
    pub offline: bool,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub requests_per_minute: Option<u32>,
    #[arg(long)]
    pub max_output_tokens: Option<u32>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub sample: SampleArgs,
    #[command(flatten)]
    pub endpoints: EndpointArgs,
    #[arg(long, env = "TABSUM_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EstimatorArg {
    Words,
    Chars,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Estimator {
        match e {
            EstimatorArg::Words => Estimator::WhitespaceWords,
            EstimatorArg::Chars => Estimator::CharsDiv4,
        }
    }
}

/// Comma-separated list of arms.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeList(pub Vec<Mode>);

fn parse_modes(s: &str) -> Result<ModeList, String> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect::<Result<_, _>>().map(ModeList)
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub sample: SampleArgs,
    #[command(flatten)]
    pub endpoints: EndpointArgs,
    /// Comma-separated arms: original, decomposed.
    #[arg(long, value_parser = parse_modes)]
    pub modes: Option<ModeList>,
    /// Summarizer input budget in tokens (presets: 512, 1024).
    #[arg(long)]
    pub budget: Option<usize>,
    /// How prompt size is estimated.
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorArg>,
    #[arg(long)]
    pub parent_lambda: Option<f64>,
    #[arg(long, env = "TABSUM_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// JSONL with `candidate`, and `reference` and `table` unless supplied by --dataset.
    #[arg(long)]
    pub candidates: PathBuf,
    /// Dataset providing references and tables by example id.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Directory for metrics.jsonl and aggregate.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub parent_lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Run directory produced by `run`.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub rater: String,
    /// Worklist size, shared by every rater.
    #[arg(long, default_value_t = 100)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Arm to annotate (default: decomposed when present).
    #[arg(long)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Model name for the means row (default: the run's summarizer).
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormatArg {
    Human,
    Machine,
    Compare,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormatArg::Human)]
    pub format: ReportFormatArg,
}

#[derive(Debug, Args)]
pub struct MockServeArgs {
    /// Fixture JSON with canned replies; every prompt is echoed when omitted.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_env("TABSUM_LOG").init();
    match commands::dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
