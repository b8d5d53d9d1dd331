//! Deterministic chat-completion endpoint for offline testing and CI.
//!
//! Responses come from a [`MockFixture`]: the first rule whose `model` and
//! `contains` filters match the request answers it, otherwise the default
//! reply applies. `fail_first` makes the first N requests fail with
//! `fail_status` to exercise client retries.
//!
//! ```json
//! {
//!   "rules": [
//!     {"model": "decomposer", "contains": "Who won", "text": "Date, Score"},
//!     {"model": "summarizer", "echo": true}
//!   ],
//!   "default": {"text": "no answer"},
//!   "fail_first": 0
//! }
//! ```

use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tiny_http::{Header, Response, Server};

use super::transport::{ChatChoice, ChatReply, ChatResponse};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    /// Reply with the prompt itself (the last message's content).
    Echo { echo: bool },
    Text { text: String },
    /// Reply with an HTTP error status.
    Status { status: u16 },
}

impl Default for MockReply {
    fn default() -> Self {
        MockReply::Echo { echo: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    #[serde(flatten)]
    pub reply: MockReply,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MockFixture {
    pub rules: Vec<MockRule>,
    pub default: MockReply,
    pub fail_first: usize,
    pub fail_status: Option<u16>,
}

impl MockFixture {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Chooses the reply for a model/prompt pair.
    pub fn reply_for(&self, model: &str, prompt: &str) -> Result<String, u16> {
        let reply = self
            .rules
            .iter()
            .find(|rule| {
                rule.model.as_deref().is_none_or(|m| m == model)
                    && rule.contains.as_deref().is_none_or(|c| prompt.contains(c))
            })
            .map(|rule| &rule.reply)
            .unwrap_or(&self.default);
        match reply {
            MockReply::Echo { .. } => Ok(prompt.to_string()),
            MockReply::Text { text } => Ok(text.clone()),
            MockReply::Status { status } => Err(*status),
        }
    }
}

/// A running mock endpoint; shuts down when dropped.
pub struct MockServer {
    server: Arc<Server>,
    addr: SocketAddr,
    requests: Arc<AtomicUsize>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and serves in a background thread.
    pub fn start(fixture: MockFixture, addr: &str) -> std::io::Result<Self> {
        let server = Server::http(addr).map_err(|e| std::io::Error::other(e.to_string()))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("mock server is not on an IP socket"))?;
        let server = Arc::new(server);
        let requests = Arc::new(AtomicUsize::new(0));
        let handle = {
            let server = server.clone();
            let requests = requests.clone();
            std::thread::spawn(move || serve(&server, &fixture, &requests))
        };
        Ok(MockServer { server, addr, requests, handle: Some(handle) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL to put in a client config.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Serves until the process is killed.
    pub fn join(mut self) {
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn serve(server: &Server, fixture: &MockFixture, requests: &AtomicUsize) {
    let json = Header::from_bytes("Content-Type", "application/json").expect("static header");
    for mut request in server.incoming_requests() {
        let n = requests.fetch_add(1, Ordering::SeqCst);
        let mut body = String::new();
        let _ = request.as_reader().read_to_string(&mut body);

        let (status, payload) = if !request.url().ends_with("/chat/completions") {
            (404, r#"{"error":"not found"}"#.to_string())
        } else if n < fixture.fail_first {
            (fixture.fail_status.unwrap_or(429), r#"{"error":"injected failure"}"#.to_string())
        } else {
            match answer(fixture, &body) {
                Ok(text) => {
                    let reply = ChatResponse {
                        choices: vec![ChatChoice {
                            message: ChatReply { role: "assistant".into(), content: Some(text) },
                        }],
                    };
                    (200, serde_json::to_string(&reply).expect("reply serializes"))
                }
                Err(code) => (code, format!(r#"{{"error":"status {code}"}}"#)),
            }
        };
        let response = Response::from_string(payload)
            .with_status_code(status)
            .with_header(json.clone());
        let _ = request.respond(response);
    }
}

fn answer(fixture: &MockFixture, body: &str) -> Result<String, u16> {
    let value: Value = serde_json::from_str(body).map_err(|_| 400u16)?;
    let model = value.get("model").and_then(Value::as_str).unwrap_or_default();
    let prompt = value
        .get("messages")
        .and_then(Value::as_array)
        .and_then(|m| m.last())
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .ok_or(400u16)?;
    fixture.reply_for(model, prompt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_json_shapes() {
        let fixture: MockFixture = serde_json::from_str(
            r#"{"rules":[{"model":"d","contains":"Who","text":"Date"},{"echo":true},{"status":401}],
                "default":{"text":"none"},"fail_first":2}"#,
        )
        .unwrap();
        assert_eq!(fixture.rules.len(), 3);
        assert_eq!(fixture.reply_for("d", "Who won"), Ok("Date".into()));
        assert_eq!(fixture.reply_for("s", "hello"), Ok("hello".into()));
        assert_eq!(fixture.fail_first, 2);
    }

    #[test]
    fn default_applies_when_nothing_matches() {
        let fixture = MockFixture {
            rules: vec![MockRule { model: Some("x".into()), contains: None, reply: MockReply::Status { status: 500 } }],
            default: MockReply::Text { text: "fallback".into() },
            ..MockFixture::default()
        };
        assert_eq!(fixture.reply_for("y", "p"), Ok("fallback".into()));
        assert_eq!(fixture.reply_for("x", "p"), Err(500));
    }
}
