use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use serde::Deserialize;
use serde_json::json;
use tabsum_core::annotate::{
    agreement_report, build_items, error_tally, load_or_create_worklist, load_worklist, run_session, AnnotateError,
    AnnotationStore,
};
use tabsum_core::dataset::{load_dataset, sample_split, SchemaMode, SplitName};
use tabsum_core::harness::{
    compare, decompose_examples, read_machine_records, render_human_table, write_run_dir, HarnessError, Pipeline,
    RunReport, RECORDS_FILE,
};
use tabsum_core::llm::mock::{MockFixture, MockServer};
use tabsum_core::llm::{Completer, LlmClient};
use tabsum_core::metrics::{aggregate, score, MetricConfig, MetricReport};
use tabsum_core::{Mode, QtExample, Table};

use crate::config::{resolve_decomposer, resolve_run, resolve_sample, FileConfig};
use crate::{
    AgreementArgs, AnnotateArgs, Cli, Command, DecomposeArgs, MockServeArgs, ReportArgs, ReportFormatArg, RunArgs,
    ScoreArgs, EXIT_PARTIAL, EXIT_USAGE,
};

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type Outcome = Result<u8, Failure>;

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_USAGE, error: error.into() }
}

fn runtime(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_PARTIAL, error: error.into() }
}

fn harness_failure(e: HarnessError) -> Failure {
    match e {
        HarnessError::Config(_) | HarnessError::Dataset(_) | HarnessError::Template(_) | HarnessError::Client(_) => {
            usage(e)
        }
        other => runtime(other),
    }
}

fn annotate_failure(e: AnnotateError) -> Failure {
    match e {
        AnnotateError::Io { .. } | AnnotateError::Metric(_) => runtime(e),
        other => usage(other),
    }
}

pub fn dispatch(cli: &Cli) -> Outcome {
    let file = || FileConfig::load(cli.config.as_deref()).map_err(usage);
    match &cli.command {
        Command::Decompose(args) => cmd_decompose(args, &file()?),
        Command::Run(args) => cmd_run(args, &file()?),
        Command::Score(args) => cmd_score(args, &file()?),
        Command::Annotate(args) => cmd_annotate(args),
        Command::Agreement(args) => cmd_agreement(args),
        Command::Report(args) => cmd_report(args),
        Command::MockServe(args) => cmd_mock_serve(args),
    }
}

fn write_jsonl(path: &Path, lines: impl IntoIterator<Item = serde_json::Value>) -> anyhow::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for line in lines {
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_decompose(args: &DecomposeArgs, file: &FileConfig) -> Outcome {
    let r = resolve_sample(&args.sample, args.out.as_ref(), file).map_err(usage)?;
    let endpoint = resolve_decomposer(&args.endpoints, file, &r.out).ok_or_else(|| {
        usage(anyhow!("no decomposer model given (use --decomposer-model or [decomposer] model in the config file)"))
    })?;
    let loaded = load_dataset(&r.dataset, r.schema).map_err(usage)?;
    let examples = match r.sample_size {
        Some(size) => sample_split(&loaded.examples, SplitName::Test, size, r.seed).map_err(usage)?.examples,
        None => loaded.examples,
    };
    let client: Arc<dyn Completer> = Arc::new(LlmClient::from_config(&endpoint.client).map_err(usage)?);
    let decomposer = endpoint.decomposer(client).map_err(usage)?;

    let results = decompose_examples(&examples, &decomposer, r.parallelism).map_err(harness_failure)?;
    fs::create_dir_all(&r.out).with_context(|| format!("creating {}", r.out.display())).map_err(usage)?;
    let mut snapshot = endpoint.clone();
    snapshot.client.offline = false;
    let config = json!({
        "dataset": r.dataset,
        "sample_size": r.sample_size,
        "seed": r.seed,
        "decomposer": snapshot,
    });
    fs::write(r.out.join("config.json"), serde_json::to_string_pretty(&config).expect("config serializes") + "\n")
        .map_err(runtime)?;

    let mut lines = Vec::new();
    let (mut failed, mut fallbacks) = (0, 0);
    for (example, result) in examples.iter().zip(results) {
        match result {
            Ok(d) => {
                fallbacks += usize::from(d.fallback_used);
                lines.push(json!({ "example_id": example.example_id, "decomposition": d }));
            }
            Err(e) => {
                failed += 1;
                eprintln!("error: {e}");
            }
        }
    }
    let path = r.out.join("decompositions.jsonl");
    write_jsonl(&path, lines).map_err(runtime)?;
    println!(
        "{} decompositions written to {} ({} used all columns, {} failed)",
        examples.len() - failed,
        path.display(),
        fallbacks,
        failed
    );
    Ok(if failed > 0 { EXIT_PARTIAL } else { 0 })
}

fn cmd_run(args: &RunArgs, file: &FileConfig) -> Outcome {
    let config = resolve_run(args, file).map_err(usage)?;
    config.validate().map_err(usage)?;
    let pipeline = Pipeline::from_config(&config).map_err(harness_failure)?;
    let report = tabsum_core::harness::run_pipeline(&config, &pipeline).map_err(harness_failure)?;
    write_run_dir(&report, &config.output_dir).map_err(runtime)?;
    print!("{}", render_human_table(&report));
    println!("run directory: {}", config.output_dir.display());
    let failed: usize = report.modes.iter().map(|m| m.failures.len()).sum();
    Ok(if failed > 0 { EXIT_PARTIAL } else { 0 })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreLine {
    #[serde(default)]
    example_id: Option<String>,
    candidate: String,
    #[serde(default)]
    reference: Option<String>,
    #[serde(default)]
    table: Option<Table>,
}

fn fmt_metric_row(label: &str, m: &MetricReport) -> String {
    let parent = m.parent.map_or_else(|| format!("{:>9}", "n/a"), |p| format!("{:>9.4}", p.f));
    format!(
        "{label:<24}{:>9.4}{:>9.4}{:>9.4}{:>9.4}{parent}",
        m.bleu, m.rouge1.f, m.rouge2.f, m.rouge_l.f
    )
}

fn cmd_score(args: &ScoreArgs, file: &FileConfig) -> Outcome {
    let mut config: MetricConfig = file.metrics.unwrap_or_default();
    if let Some(l) = args.parent_lambda {
        config.parent_lambda = l;
    }
    let dataset: HashMap<String, QtExample> = match &args.dataset {
        Some(path) => load_dataset(path, SchemaMode::Lenient)
            .map_err(usage)?
            .examples
            .into_iter()
            .map(|e| (e.example_id.clone(), e))
            .collect(),
        None => HashMap::new(),
    };
    let input = fs::File::open(&args.candidates)
        .with_context(|| format!("opening {}", args.candidates.display()))
        .map_err(usage)?;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line.map_err(usage)?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ScoreLine = serde_json::from_str(&line)
            .with_context(|| format!("{} line {}", args.candidates.display(), i + 1))
            .map_err(usage)?;
        lines.push((i + 1, parsed));
    }
    if lines.is_empty() {
        return Err(usage(anyhow!("{} has no candidates", args.candidates.display())));
    }

    println!("metrics: {}", config.describe());
    println!("{:<24}{:>9}{:>9}{:>9}{:>9}{:>9}", "example", "BLEU", "ROUGE-1", "ROUGE-2", "ROUGE-L", "PARENT");
    let mut reports = Vec::new();
    let mut records = Vec::new();
    let mut failed = 0;
    for (line_no, line) in lines {
        let id = line.example_id.clone().unwrap_or_else(|| format!("line{line_no}"));
        let source = dataset.get(&id);
        let reference = line.reference.clone().or_else(|| source.and_then(|e| e.reference_summary.clone()));
        let Some(reference) = reference else {
            eprintln!("error: {id}: no reference summary");
            failed += 1;
            continue;
        };
        let table = line.table.as_ref().or(source.map(|e| &e.table));
        if table.is_none() {
            eprintln!("warning: {id}: no table available, PARENT omitted");
        }
        match score(&line.candidate, &reference, table, &config) {
            Ok(m) => {
                println!("{}", fmt_metric_row(&id, &m));
                records.push(json!({ "example_id": id, "metrics": m }));
                reports.push(m);
            }
            Err(e) => {
                eprintln!("error: {id}: {e}");
                failed += 1;
            }
        }
    }
    if let Ok(agg) = aggregate(&reports) {
        println!("{}", fmt_metric_row(&format!("mean (n={})", agg.count), &agg.mean));
        if let Some(dir) = &args.out {
            fs::create_dir_all(dir).map_err(runtime)?;
            write_jsonl(&dir.join("metrics.jsonl"), records).map_err(runtime)?;
            let text = serde_json::to_string_pretty(&json!({ "metrics": config.describe(), "aggregate": agg }))
                .expect("aggregate serializes");
            fs::write(dir.join("aggregate.json"), text + "\n").map_err(runtime)?;
        }
    }
    Ok(if failed > 0 { EXIT_PARTIAL } else { 0 })
}

fn load_run(run: &Path) -> Result<RunReport, Failure> {
    read_machine_records(&run.join(RECORDS_FILE)).map_err(usage)
}

fn cmd_annotate(args: &AnnotateArgs) -> Outcome {
    let report = load_run(&args.run)?;
    let mode = args.mode.unwrap_or(if report.mode(Mode::Decomposed).is_some() {
        Mode::Decomposed
    } else {
        Mode::Original
    });
    let worklist = load_or_create_worklist(&args.run, &report, mode, args.size, args.seed).map_err(annotate_failure)?;
    let items = build_items(&report, &worklist).map_err(annotate_failure)?;
    let store = AnnotationStore::open(&args.run).map_err(annotate_failure)?;
    let stdin = io::stdin();
    let stdout = io::stdout();
    let outcome =
        run_session(&items, &args.rater, &store, &mut stdin.lock(), &mut stdout.lock()).map_err(annotate_failure)?;
    println!(
        "recorded {} items this session; {} of {} remaining ({})",
        outcome.recorded,
        outcome.remaining,
        items.len(),
        store.path_for(&args.rater).display()
    );
    Ok(0)
}

fn cmd_agreement(args: &AgreementArgs) -> Outcome {
    let report = load_run(&args.run)?;
    let worklist = load_worklist(&args.run).map_err(annotate_failure)?;
    let store = AnnotationStore::open(&args.run).map_err(annotate_failure)?;
    let by_rater = store.load_all().map_err(annotate_failure)?;
    let model = args.model.clone().unwrap_or_else(|| report.config.summarizer.model.clone());
    let agreement = agreement_report(&by_rater, &worklist.example_ids, &model).map_err(annotate_failure)?;
    let in_worklist: std::collections::HashSet<&str> = worklist.example_ids.iter().map(String::as_str).collect();
    let records: Vec<_> = by_rater
        .values()
        .flatten()
        .filter(|r| in_worklist.contains(r.example_id.as_str()))
        .cloned()
        .collect();
    let tally = error_tally(&records);
    let per_rater: BTreeMap<&str, _> = by_rater.iter().map(|(k, v)| (k.as_str(), error_tally(v))).collect();

    let text = format!("{agreement}\n{tally}");
    print!("{text}");
    fs::write(args.run.join("agreement.txt"), &text).map_err(runtime)?;
    let json = json!({ "agreement": agreement, "error_tally": tally, "error_tally_by_rater": per_rater });
    fs::write(args.run.join("agreement.json"), serde_json::to_string_pretty(&json).expect("serializes") + "\n")
        .map_err(runtime)?;
    Ok(0)
}

fn cmd_report(args: &ReportArgs) -> Outcome {
    let report = load_run(&args.run)?;
    match args.format {
        ReportFormatArg::Human => print!("{}", render_human_table(&report)),
        ReportFormatArg::Machine => {
            for record in report.to_machine_records() {
                println!("{}", serde_json::to_string(&record).expect("record serializes"));
            }
        }
        ReportFormatArg::Compare => print!("{}", compare(&report).map_err(usage)?),
    }
    Ok(0)
}

fn cmd_mock_serve(args: &MockServeArgs) -> Outcome {
    let fixture = match &args.fixture {
        Some(path) => MockFixture::load(path).with_context(|| format!("loading {}", path.display())).map_err(usage)?,
        None => MockFixture::default(),
    };
    let server = MockServer::start(fixture, &args.addr).map_err(usage)?;
    println!("listening on {}", server.base_url());
    io::stdout().flush().map_err(runtime)?;
    server.join();
    Ok(0)
}

