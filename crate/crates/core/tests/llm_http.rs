use std::sync::Arc;
use std::thread;

use tabsum_core::llm::mock::{MockFixture, MockServer};
use tabsum_core::llm::{ClientConfig, Completer, LlmClient, LlmError, LlmRequest, Purpose};

fn request(prompt: &str) -> LlmRequest {
    LlmRequest::new("summarizer", prompt, 0.0, 64, Purpose::Summarize).unwrap()
}

fn client_for(server: &MockServer, cache: Option<&std::path::Path>, max_retries: u32) -> LlmClient {
    LlmClient::from_config(&ClientConfig {
        base_url: server.base_url(),
        max_retries,
        initial_backoff_ms: 1,
        cache_dir: cache.map(Into::into),
        ..ClientConfig::default()
    })
    .unwrap()
}

#[test]
fn two_rate_limits_then_success() {
    let fixture = MockFixture { fail_first: 2, fail_status: Some(429), ..MockFixture::default() };
    let server = MockServer::start(fixture, "127.0.0.1:0").unwrap();
    let client = client_for(&server, None, 3);
    let response = client.complete(&request("hello there")).unwrap();
    assert_eq!(response.text, "hello there");
    assert_eq!(response.attempts, 3);
    assert_eq!(server.request_count(), 3);
}

#[test]
fn server_errors_exhaust_retries() {
    let fixture = MockFixture { fail_first: 10, fail_status: Some(503), ..MockFixture::default() };
    let server = MockServer::start(fixture, "127.0.0.1:0").unwrap();
    let client = client_for(&server, None, 1);
    match client.complete(&request("x")) {
        Err(LlmError::RetriesExhausted { attempts, .. }) => assert_eq!(attempts, 2),
        other => panic!("expected exhausted retries, got {other:?}"),
    }
    assert_eq!(server.request_count(), 2);
}

#[test]
fn unauthorized_is_not_retried() {
    let fixture = MockFixture { fail_first: 10, fail_status: Some(401), ..MockFixture::default() };
    let server = MockServer::start(fixture, "127.0.0.1:0").unwrap();
    let client = client_for(&server, None, 3);
    assert!(matches!(client.complete(&request("x")), Err(LlmError::Auth { status: 401 })));
    assert_eq!(server.request_count(), 1);
}

#[test]
fn unreachable_endpoint_is_a_readable_error() {
    // Bind then drop to get a port nobody listens on.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let client = LlmClient::from_config(&ClientConfig {
        base_url: format!("http://127.0.0.1:{port}/v1"),
        max_retries: 0,
        timeout_secs: 2,
        ..ClientConfig::default()
    })
    .unwrap();
    let err = client.complete(&request("x")).unwrap_err();
    assert!(!err.to_string().is_empty());
}

#[test]
fn concurrent_calls_keep_the_cache_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let server = MockServer::start(MockFixture::default(), "127.0.0.1:0").unwrap();
    let client = Arc::new(client_for(&server, Some(dir.path()), 0));
    let prompts: Vec<String> = (0..10).map(|i| format!("prompt number {i}")).collect();

    let handles: Vec<_> = (0..16)
        .map(|t| {
            let client = client.clone();
            let prompts = prompts.clone();
            thread::spawn(move || {
                for i in 0..50 {
                    let prompt = &prompts[(t * 7 + i) % prompts.len()];
                    let response = client.complete(&request(prompt)).unwrap();
                    assert_eq!(&response.text, prompt);
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }

    let cache = client.cache().unwrap();
    assert_eq!(cache.len(), prompts.len());
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        serde_json::from_str::<serde_json::Value>(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
    // Racing threads may fetch the same prompt twice, never more than once per thread.
    assert!(server.request_count() >= prompts.len() && server.request_count() <= 16 * prompts.len());
    drop(server);

    let offline = LlmClient::from_config(&ClientConfig {
        base_url: "http://127.0.0.1:9/v1".into(),
        cache_dir: Some(dir.path().into()),
        offline: true,
        ..ClientConfig::default()
    })
    .unwrap();
    for prompt in &prompts {
        let r = offline.complete(&request(prompt)).unwrap();
        assert!(r.cached);
        assert_eq!(&r.text, prompt);
    }
    assert!(matches!(offline.complete(&request("never asked")), Err(LlmError::OfflineCacheMiss { .. })));
}
