use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::LlmRequest;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("malformed response: {0}")]
    Protocol(String),
}

impl TransportError {
    /// Rate limiting, server errors and network faults are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Status { code, .. } => *code == 429 || *code >= 500,
            TransportError::Network(_) => true,
            TransportError::Protocol(_) => false,
        }
    }
}

/// Sends one request and returns the completion text.
pub trait Transport: Send + Sync {
    fn send(&self, request: &LlmRequest) -> Result<String, TransportError>;
}

#[derive(Serialize)]
pub(crate) struct ChatMessage<'a> {
    pub role: &'a str,
    pub content: &'a str,
}

#[derive(Serialize)]
pub(crate) struct ChatRequest<'a> {
    pub model: &'a str,
    pub messages: Vec<ChatMessage<'a>>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Deserialize, Serialize)]
pub(crate) struct ChatResponse {
    pub choices: Vec<ChatChoice>,
}

#[derive(Deserialize, Serialize)]
pub(crate) struct ChatChoice {
    pub message: ChatReply,
}

#[derive(Deserialize, Serialize)]
pub(crate) struct ChatReply {
    #[serde(default)]
    pub role: String,
    #[serde(default)]
    pub content: Option<String>,
}

/// Chat-completion over HTTP+JSON: `POST {base_url}/chat/completions`.
pub struct HttpTransport {
    endpoint: String,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, TransportError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(HttpTransport {
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
            http,
        })
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &LlmRequest) -> Result<String, TransportError> {
        let body = ChatRequest {
            model: &request.model_name,
            messages: vec![ChatMessage { role: "user", content: &request.prompt }],
            temperature: request.temperature,
            max_tokens: request.max_output_tokens,
        };
        let payload = serde_json::to_vec(&body).map_err(|e| TransportError::Protocol(e.to_string()))?;
        let mut builder = self
            .http
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .body(payload);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| TransportError::Network(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| TransportError::Network(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status { code: status, body: text });
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| TransportError::Protocol(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| TransportError::Protocol("no choices[0].message.content".into()))
    }
}
