mod common;

use std::sync::Arc;

use common::{examples, fixture, run_config, FixtureCompleter};
use tabsum_core::harness::{
    compare, read_machine_records, render_human_table, run, run_pipeline, write_run_dir, HarnessError, Pipeline,
    RunReport, RECORDS_FILE, RUN_FILES,
};
use tabsum_core::llm::mock::{MockFixture, MockReply, MockRule, MockServer};
use tabsum_core::llm::Completer;
use tabsum_core::{Mode, QtExample, Table};

fn run_with(config: &tabsum_core::harness::RunConfig, client: Arc<FixtureCompleter>) -> RunReport {
    let c: Arc<dyn Completer> = client;
    let pipeline = Pipeline::with_clients(config, c.clone(), Some(c)).unwrap();
    run_pipeline(config, &pipeline).unwrap()
}

#[test]
fn ten_examples_both_arms_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let server = MockServer::start(fixture("Year, Score"), "127.0.0.1:0").unwrap();
    let mut config = run_config(dir.path(), &examples(10, 1), &Mode::ALL);
    for e in std::iter::once(&mut config.summarizer).chain(config.decomposer.as_mut()) {
        e.client.base_url = server.base_url();
    }
    let report = run(&config).unwrap();
    report.check_accounting().unwrap();
    for arm in &report.modes {
        assert_eq!(arm.records.len(), 10);
        assert!(arm.failures.is_empty());
    }
    let written = write_run_dir(&report, &config.output_dir).unwrap();
    assert_eq!(written.len(), RUN_FILES.len());
    let table = render_human_table(&report);
    assert!(table.contains("failures: 0"), "{table}");
    for column in ["BLEU", "ROUGE-1", "ROUGE-2", "ROUGE-L", "PARENT"] {
        assert!(table.contains(column), "{column} missing from\n{table}");
    }
}

#[test]
fn machine_records_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = run_config(dir.path(), &examples(6, 2), &Mode::ALL);
    let report = run_with(&config, FixtureCompleter::new(fixture("Score")));
    write_run_dir(&report, &config.output_dir).unwrap();
    let back = read_machine_records(&config.output_dir.join(RECORDS_FILE)).unwrap();
    assert_eq!(back, report);
}

#[test]
fn silent_decomposer_means_full_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let config = run_config(dir.path(), &examples(8, 3), &[Mode::Decomposed]);
    let report = run_with(&config, FixtureCompleter::new(fixture("I cannot tell which ones matter.")));
    let arm = report.mode(Mode::Decomposed).unwrap();
    assert_eq!(arm.fallback_rate, Some(1.0));
    assert!(arm.records.iter().all(|r| r.summary.decomposition.as_ref().unwrap().fallback_used));
}

#[test]
fn rates_are_recounted_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = run_config(dir.path(), &examples(12, 4), &Mode::ALL);
    config.budget = tabsum_core::TokenBudget::new(150, tabsum_core::Estimator::WhitespaceWords).unwrap();
    let report = run_with(&config, FixtureCompleter::new(fixture("Year")));
    let original = report.mode(Mode::Original).unwrap();
    assert!(original.records.iter().any(|r| r.summary.truncated_input));
    for arm in &report.modes {
        assert!(arm.failures.is_empty(), "{:?}", arm.failures);
        let n = arm.records.len() as f64;
        let truncated = arm.records.iter().filter(|r| r.summary.truncated_input).count() as f64;
        assert_eq!(arm.truncation_rate, Some(truncated / n));
        assert!(arm.records.iter().all(|r| r.summary.prompt_estimate <= 150 || !r.summary.truncated_input));
    }
}

#[test]
fn identical_summaries_give_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let config = run_config(dir.path(), &examples(5, 5), &Mode::ALL);
    let fixture = MockFixture {
        rules: vec![
            MockRule { model: Some("decomposer".into()), contains: None, reply: MockReply::Text { text: "Year".into() } },
        ],
        default: MockReply::Text { text: "the same summary every time".into() },
        ..MockFixture::default()
    };
    let report = run_with(&config, FixtureCompleter::new(fixture));
    let cmp = compare(&report).unwrap();
    assert!(cmp.rows.iter().all(|r| r.delta == 0.0), "{cmp}");
}

/// Tables whose "Notes" column only appears in the original arm's prompt.
fn notes_examples() -> Vec<QtExample> {
    (0..6)
        .map(|i| QtExample {
            example_id: format!("n{i}"),
            table: Table::new(
                format!("t{i}"),
                "Results",
                vec!["Year".into(), "Score".into(), "Notes".into()],
                vec![vec![format!("{}", 2000 + i), format!("{i}-0"), "rain delay".into()]],
            )
            .unwrap(),
            query: "When was the best score?".into(),
            reference_summary: Some("the best score came in the final year".into()),
        })
        .collect()
}

#[test]
fn better_decomposed_summaries_give_positive_rouge_l_delta() {
    let dir = tempfile::tempdir().unwrap();
    let config = run_config(dir.path(), &notes_examples(), &Mode::ALL);
    let fixture = MockFixture {
        rules: vec![
            MockRule { model: Some("decomposer".into()), contains: None, reply: MockReply::Text { text: "Year, Score".into() } },
            MockRule {
                model: Some("summarizer".into()),
                contains: Some("Notes:".into()),
                reply: MockReply::Text { text: "there was a rain delay".into() },
            },
        ],
        default: MockReply::Text { text: "the best score came in the final year".into() },
        ..MockFixture::default()
    };
    let report = run_with(&config, FixtureCompleter::new(fixture));
    let cmp = compare(&report).unwrap();

    // Recompute from the per-example records.
    let mean = |mode| {
        let arm = report.mode(mode).unwrap();
        arm.records.iter().map(|r| r.metrics.rouge_l.f).sum::<f64>() / arm.records.len() as f64
    };
    let expected = mean(Mode::Decomposed) - mean(Mode::Original);
    let row = cmp.row("rougeL.f").unwrap();
    assert!(expected > 0.0);
    assert!((row.delta - expected).abs() < 1e-12, "{} vs {expected}", row.delta);
    assert_eq!(row.direction(), "+");
}

#[test]
fn deltas_are_componentwise_aggregate_differences() {
    let dir = tempfile::tempdir().unwrap();
    let config = run_config(dir.path(), &examples(7, 6), &Mode::ALL);
    let report = run_with(&config, FixtureCompleter::new(fixture("Team, Result")));
    let cmp = compare(&report).unwrap();
    let o = report.mode(Mode::Original).unwrap().aggregate.unwrap().mean;
    let d = report.mode(Mode::Decomposed).unwrap().aggregate.unwrap().mean;
    for ((label, a), (_, b)) in o.values().into_iter().zip(d.values()) {
        assert_eq!(cmp.row(label).unwrap().delta, b - a, "{label}");
    }
}

#[test]
fn single_arm_cannot_be_compared() {
    let dir = tempfile::tempdir().unwrap();
    let config = run_config(dir.path(), &examples(3, 7), &[Mode::Original]);
    let report = run_with(&config, FixtureCompleter::new(fixture("Year")));
    assert!(matches!(compare(&report), Err(HarnessError::SingleMode)));
}

#[test]
fn decomposed_arm_without_decomposer_is_rejected_before_any_call() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = run_config(dir.path(), &examples(3, 8), &Mode::ALL);
    config.decomposer = None;
    assert!(matches!(run(&config), Err(HarnessError::Config(_))));
}

#[test]
fn parallelism_does_not_change_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = run_config(dir.path(), &examples(20, 9), &Mode::ALL);
    config.parallelism = 1;
    let serial = run_with(&config, FixtureCompleter::new(fixture("Year, Venue")));
    config.parallelism = 8;
    let parallel = run_with(&config, FixtureCompleter::new(fixture("Year, Venue")));
    assert_eq!(serial.sample_ids, parallel.sample_ids);
    assert_eq!(serial.modes, parallel.modes);
}

#[test]
fn failed_examples_are_counted_not_aggregated() {
    let dir = tempfile::tempdir().unwrap();
    let config = run_config(dir.path(), &examples(6, 10), &[Mode::Original]);
    let fixture = MockFixture {
        rules: vec![MockRule { model: None, contains: Some("season 2?".into()), reply: MockReply::Status { status: 500 } }],
        ..MockFixture::default()
    };
    let report = run_with(&config, FixtureCompleter::new(fixture));
    report.check_accounting().unwrap();
    let arm = report.mode(Mode::Original).unwrap();
    assert_eq!(arm.failures.len(), 1);
    assert_eq!(arm.failures[0].example_id, "ex002");
    assert_eq!(arm.aggregate.unwrap().count, 5);
    assert!(render_human_table(&report).contains("failures: 1"));
}
