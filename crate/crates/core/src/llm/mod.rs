//! Chat-completion client shared by the decomposer and the summarizer.
//!
//! [`LlmClient`] wraps a [`Transport`] (HTTP by default) with a content-keyed
//! disk cache, exponential-backoff retries and a dispatch rate limiter.
//! Anything that implements [`Completer`] can stand in for it, which is how the
//! pipeline is tested against in-process fakes.

mod cache;
mod client;
pub mod mock;
mod ratelimit;
mod transport;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheEntry, ResponseCache};
pub use client::{ClientConfig, LlmClient, API_KEY_ENV};
pub use ratelimit::RateLimiter;
pub use transport::{HttpTransport, Transport, TransportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Decompose,
    Summarize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model_name: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub purpose: Purpose,
}

impl LlmRequest {
    pub fn new(
        model_name: impl Into<String>,
        prompt: impl Into<String>,
        temperature: f64,
        max_output_tokens: u32,
        purpose: Purpose,
    ) -> Result<Self, LlmError> {
        let request = LlmRequest {
            model_name: model_name.into(),
            prompt: prompt.into(),
            temperature,
            max_output_tokens,
            purpose,
        };
        request.validate()?;
        Ok(request)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.prompt.is_empty() {
            return Err(LlmError::InvalidRequest("empty prompt".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub cached: bool,
    pub latency_ms: u64,
    pub request_fingerprint: String,
    /// Transport attempts made for this call; 0 for a cache hit.
    pub attempts: u32,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("cache miss in offline mode (fingerprint {fingerprint})")]
    OfflineCacheMiss { fingerprint: String },
    #[error("authentication failed (HTTP {status})")]
    Auth { status: u16 },
    #[error("request failed after {attempts} attempts: {last_error}")]
    RetriesExhausted { attempts: u32, last_error: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("cache i/o: {0}")]
    Cache(#[from] std::io::Error),
}

/// Anything that can answer an [`LlmRequest`].
pub trait Completer: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

/// A client plus the model settings used for one purpose.
#[derive(Clone)]
pub struct ModelEndpoint {
    pub client: std::sync::Arc<dyn Completer>,
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl std::fmt::Debug for ModelEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelEndpoint")
            .field("model_name", &self.model_name)
            .field("temperature", &self.temperature)
            .field("max_output_tokens", &self.max_output_tokens)
            .finish_non_exhaustive()
    }
}

impl ModelEndpoint {
    pub fn new(client: std::sync::Arc<dyn Completer>, model_name: impl Into<String>) -> Self {
        ModelEndpoint {
            client,
            model_name: model_name.into(),
            temperature: 0.0,
            max_output_tokens: 256,
        }
    }

    pub fn call(&self, prompt: String, purpose: Purpose) -> Result<LlmResponse, LlmError> {
        let request = LlmRequest::new(
            self.model_name.clone(),
            prompt,
            self.temperature,
            self.max_output_tokens,
            purpose,
        )?;
        self.client.complete(&request)
    }
}

#[derive(Serialize)]
struct FingerprintKey<'a> {
    model_name: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_output_tokens: u32,
}

/// SHA-256 (hex) of the request's model, prompt, temperature and output limit.
pub fn fingerprint(request: &LlmRequest) -> String {
    let key = FingerprintKey {
        model_name: &request.model_name,
        prompt: &request.prompt,
        temperature: request.temperature,
        max_output_tokens: request.max_output_tokens,
    };
    let bytes = serde_json::to_vec(&key).expect("fingerprint key serializes");
    hex::encode(Sha256::digest(&bytes))
}
