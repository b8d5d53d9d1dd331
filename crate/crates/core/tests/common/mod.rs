#![allow(dead_code)]

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabsum_core::dataset::{write_dataset, SchemaMode};
use tabsum_core::harness::{EndpointConfig, RunConfig};
use tabsum_core::llm::mock::{MockFixture, MockReply, MockRule};
use tabsum_core::llm::{fingerprint, ClientConfig, Completer, LlmError, LlmRequest, LlmResponse};
use tabsum_core::metrics::MetricConfig;
use tabsum_core::{Mode, QtExample, Table, TokenBudget};

pub const HEADERS: [&str; 8] = ["Year", "Team", "Score", "Venue", "Opponent", "Result", "Attendance", "Notes"];

/// `n` small sports tables; every header set is a shuffled subset of [`HEADERS`].
pub fn examples(n: usize, seed: u64) -> Vec<QtExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut header: Vec<String> = HEADERS.iter().map(|s| s.to_string()).collect();
            header.shuffle(&mut rng);
            header.truncate(rng.gen_range(3..=HEADERS.len()));
            let rows = (0..rng.gen_range(2..=8))
                .map(|r| header.iter().map(|h| format!("{} {r} {}", h.to_lowercase(), rng.gen_range(0..100))).collect())
                .collect();
            QtExample {
                example_id: format!("ex{i:03}"),
                table: Table::new(format!("tbl{i}"), format!("Season {i}"), header, rows).unwrap(),
                query: format!("Which year had the best score in season {i}?"),
                reference_summary: Some(format!("In season {i} the best score came in year {}.", 1990 + i)),
            }
        })
        .collect()
}

pub fn fixture(decomposer_reply: &str) -> MockFixture {
    MockFixture {
        rules: vec![
            MockRule {
                model: Some("decomposer".into()),
                contains: None,
                reply: MockReply::Text { text: decomposer_reply.into() },
            },
            MockRule { model: Some("summarizer".into()), contains: None, reply: MockReply::Echo { echo: true } },
        ],
        ..MockFixture::default()
    }
}

/// Answers from a [`MockFixture`] without HTTP and keeps every request.
pub struct FixtureCompleter {
    pub fixture: MockFixture,
    pub requests: Mutex<Vec<LlmRequest>>,
    pub calls: AtomicUsize,
}

impl FixtureCompleter {
    pub fn new(fixture: MockFixture) -> Arc<Self> {
        Arc::new(FixtureCompleter { fixture, requests: Mutex::new(Vec::new()), calls: AtomicUsize::new(0) })
    }
}

impl Completer for FixtureCompleter {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.requests.lock().unwrap().push(request.clone());
        let text = self
            .fixture
            .reply_for(&request.model_name, &request.prompt)
            .map_err(|status| LlmError::Http { status, body: String::new() })?;
        Ok(LlmResponse {
            text,
            cached: false,
            latency_ms: 0,
            request_fingerprint: fingerprint(request),
            attempts: 1,
        })
    }
}

/// Run config over `examples` written to `root/dataset.jsonl`.
pub fn run_config(root: &Path, examples: &[QtExample], modes: &[Mode]) -> RunConfig {
    let dataset = root.join("dataset.jsonl");
    write_dataset(&dataset, examples).unwrap();
    let client = ClientConfig { cache_dir: None, max_retries: 0, ..ClientConfig::default() };
    RunConfig {
        dataset,
        schema: SchemaMode::Strict,
        sample_size: None,
        seed: 0,
        modes: modes.to_vec(),
        budget: TokenBudget::preset_512(),
        summarizer: EndpointConfig::new("summarizer", client.clone()),
        decomposer: Some(EndpointConfig::new("decomposer", client)),
        parallelism: 4,
        output_dir: root.join("run"),
        metrics: MetricConfig::default(),
    }
}
