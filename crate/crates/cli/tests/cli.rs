use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use serde_json::json;
use tabsum_core::dataset::write_dataset;
use tabsum_core::{QtExample, Table};

const SUBCOMMANDS: [&str; 7] = ["decompose", "run", "score", "annotate", "agreement", "report", "mock-serve"];

fn tabsum() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tabsum"));
    for (key, _) in std::env::vars() {
        if key.starts_with("TABSUM_") {
            cmd.env_remove(key);
        }
    }
    cmd
}

fn run(args: &[&str]) -> Output {
    tabsum().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A `tabsum mock-serve` child killed on drop.
struct Served {
    child: Child,
    url: String,
}

impl Served {
    fn start(fixture: Option<&Path>) -> Served {
        let mut cmd = tabsum();
        cmd.args(["mock-serve", "--addr", "127.0.0.1:0"]).stdout(Stdio::piped()).stderr(Stdio::null());
        if let Some(f) = fixture {
            cmd.args(["--fixture", p(f)]);
        }
        let mut child = cmd.spawn().unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let url = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("{line:?}")).to_string();
        Served { child, url }
    }
}

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn dataset(dir: &Path, n: usize) -> PathBuf {
    let examples: Vec<QtExample> = (0..n)
        .map(|i| QtExample {
            example_id: format!("e{i}"),
            table: Table::new(
                format!("t{i}"),
                "Medals",
                vec!["Nation".into(), "Gold".into(), "Notes".into()],
                vec![vec!["Norway".into(), format!("{i}"), "host".into()], vec!["Chile".into(), "1".into(), "".into()]],
            )
            .unwrap(),
            query: format!("How many golds did Norway win in event {i}?"),
            reference_summary: Some(format!("Norway won {i} gold medals.")),
        })
        .collect();
    let path = dir.join("data.jsonl");
    write_dataset(&path, &examples).unwrap();
    path
}

fn decomposer_fixture(dir: &Path) -> PathBuf {
    let path = dir.join("fixture.json");
    let fixture = json!({
        "rules": [
            { "model": "dec", "text": "Nation, Gold" },
            { "model": "sum", "echo": true }
        ]
    });
    fs::write(&path, fixture.to_string()).unwrap();
    path
}

#[test]
fn every_subcommand_has_help() {
    for sub in SUBCOMMANDS {
        let o = run(&[sub, "--help"]);
        assert!(o.status.success(), "{sub}: {}", stderr(&o));
        assert!(stdout(&o).contains("Usage:"), "{sub}");
    }
    assert!(run(&["--help"]).status.success());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    for sub in SUBCOMMANDS {
        let o = run(&[sub, "--no-such-flag"]);
        assert_eq!(o.status.code(), Some(2), "{sub}");
    }
}

fn render_latex(s: &str) -> String {
    s.replace("``", "\u{201C}").replace("''", "\u{201D}").replace("\\&", "&").trim().to_string()
}

/// First worked example of the published appendix: (expected, returned, ROUGE-L).
fn appendix_example() -> (String, String, f64) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../paper.md");
    let text = fs::read_to_string(path).unwrap();
    let field = |label: &str| {
        let line = text.lines().find(|l| l.contains(label)).unwrap();
        render_latex(line.split_once(label).unwrap().1.trim_start().trim_start_matches('-'))
    };
    let score_line = text.lines().find(|l| l.contains("ROUGE-L Score") && l.trim_start().starts_with("\\textbf")).unwrap();
    let score = score_line
        .rsplit(|c: char| !(c.is_ascii_digit() || c == '.'))
        .find(|s| s.contains('.'))
        .unwrap()
        .parse()
        .unwrap();
    (field("\\textbf{Expected Summary}"), field("\\textbf{Returned Summary (BART)}"), score)
}

fn rouge_l_column(row: &str) -> f64 {
    row.split_whitespace().rev().nth(1).unwrap().parse().unwrap()
}

#[test]
fn score_reproduces_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let (expected, returned, published) = appendix_example();
    let table = json!({ "id": "t", "title": "", "header": ["x"], "rows": [["y"]] });
    let lines = [
        json!({ "example_id": "worked", "candidate": returned, "reference": expected, "table": table }),
        json!({ "example_id": "self", "candidate": expected, "reference": expected, "table": table }),
    ];
    let input = dir.path().join("c.jsonl");
    fs::write(&input, lines.iter().map(|l| l.to_string() + "\n").collect::<String>()).unwrap();
    let out = dir.path().join("scores");
    let o = run(&["score", "--candidates", p(&input), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);

    let worked = text.lines().find(|l| l.starts_with("worked")).unwrap();
    let got = rouge_l_column(worked);
    assert!((got - published).abs() <= 0.03, "ROUGE-L {got} vs {published}");

    let same = text.lines().find(|l| l.starts_with("self")).unwrap();
    let values: Vec<&str> = same.split_whitespace().skip(1).take(4).collect();
    assert_eq!(values, ["1.0000"; 4], "{same}");

    assert!(out.join("metrics.jsonl").exists());
    assert!(out.join("aggregate.json").exists());
}

#[test]
fn score_without_table_omits_parent() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.jsonl");
    fs::write(&input, json!({ "candidate": "a b c", "reference": "a b d" }).to_string()).unwrap();
    let o = run(&["score", "--candidates", p(&input)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("PARENT omitted"));
    let row = stdout(&o).lines().find(|l| l.starts_with("line1")).unwrap().to_string();
    assert!(row.ends_with("n/a"), "{row}");
}

#[test]
fn score_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.jsonl");
    fs::write(&input, json!({ "candidate": "a", "reference": "a", "cand": 1 }).to_string()).unwrap();
    assert_eq!(run(&["score", "--candidates", p(&input)]).status.code(), Some(2));
}

#[test]
fn run_report_and_offline_replay_through_mock_serve() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 6);
    let fixture = decomposer_fixture(dir.path());
    let out = dir.path().join("run");
    let cache = dir.path().join("cache");
    let server = Served::start(Some(&fixture));
    let base = [
        "--dataset", p(&data), "--summarizer-model", "sum", "--decomposer-model", "dec", "--cache-dir", p(&cache),
    ];

    let mut args = vec!["run"];
    args.extend(base);
    args.extend(["--summarizer-url", &server.url, "--decomposer-url", &server.url, "--out", p(&out)]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("ROUGE-L") && table.contains("failures: 0"), "{table}");

    let o = run(&["report", "--run", p(&out), "--format", "compare"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("rougeL"), "{}", stdout(&o));
    let o = run(&["report", "--run", p(&out), "--format", "machine"]);
    assert!(o.status.success());
    for line in stdout(&o).lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    drop(server);

    let replay = dir.path().join("replay");
    let mut args = vec!["run"];
    args.extend(base);
    args.extend(["--offline", "--out", p(&replay)]);
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for file in ["decompositions.jsonl", "summaries.jsonl", "metrics.jsonl", "aggregate.json"] {
        let a = fs::read(out.join(file)).unwrap();
        let b = fs::read(replay.join(file)).unwrap();
        assert!(a == b, "{file} differs between live and offline runs");
    }
}

#[test]
fn decomposed_run_without_decomposer_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 2);
    let out = dir.path().join("run");
    let o = run(&["run", "--dataset", p(&data), "--summarizer-model", "sum", "--modes", "decomposed", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("decomposer"), "{}", stderr(&o));
}

#[test]
fn missing_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let out = dir.path().join("run");
    let o = run(&["run", "--dataset", p(&missing), "--summarizer-model", "s", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn decompose_against_unreachable_endpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 2);
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}/v1");
    let out = dir.path().join("dec");
    let o = run(&[
        "decompose", "--dataset", p(&data), "--decomposer-model", "dec", "--decomposer-url", &url, "--max-retries", "0",
        "--out", p(&out),
    ]);
    assert_ne!(o.status.code(), Some(0));
    assert!(!stderr(&o).is_empty());
}

#[test]
fn decompose_writes_records() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 3);
    let fixture = decomposer_fixture(dir.path());
    let server = Served::start(Some(&fixture));
    let out = dir.path().join("dec");
    let o = run(&[
        "decompose", "--dataset", p(&data), "--decomposer-model", "dec", "--decomposer-url", &server.url, "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("decompositions.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("Nation"));
}

#[test]
fn annotate_then_agreement_reports_missing_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path(), 4);
    let fixture = decomposer_fixture(dir.path());
    let server = Served::start(Some(&fixture));
    let out = dir.path().join("run");
    let o = run(&[
        "run", "--dataset", p(&data), "--summarizer-model", "sum", "--decomposer-model", "dec", "--summarizer-url",
        &server.url, "--decomposer-url", &server.url, "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let annotate = |rater: &str, input: &str| {
        use std::io::Write;
        let mut child = tabsum()
            .args(["annotate", "--run", p(&out), "--rater", rater, "--size", "2"])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
        child.wait_with_output().unwrap()
    };
    let both = "4\n4\n4\ncorrect\n4\n3\n3\n3\nhallucination\n3\n";
    assert!(annotate("ann", both).status.success());
    let partial = annotate("bob", "5\n4\n4\ncorrect\n5\n");
    assert!(partial.status.success(), "{}", stderr(&partial));

    let o = run(&["agreement", "--run", p(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stderr(&o).contains("bob"), "{}", stderr(&o));

    let finish = annotate("bob", "2\n3\n3\nhallucination\n2\n");
    assert!(stdout(&finish).contains("resuming"), "{}", stdout(&finish));
    let o = run(&["agreement", "--run", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("agreement.json").exists());
}
