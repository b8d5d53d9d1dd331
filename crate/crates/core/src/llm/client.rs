use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::cache::ResponseCache;
use super::ratelimit::RateLimiter;
use super::transport::{HttpTransport, Transport, TransportError};
use super::{fingerprint, Completer, LlmError, LlmRequest, LlmResponse};

/// Environment variable holding the endpoint credential.
pub const API_KEY_ENV: &str = "TABSUM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    pub base_url: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub requests_per_minute: Option<u32>,
    pub cache_dir: Option<PathBuf>,
    /// Execution flag, not part of a run's identity.
    #[serde(skip_serializing)]
    pub offline: bool,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            base_url: "http://127.0.0.1:8080/v1".into(),
            timeout_secs: 60,
            max_retries: 3,
            initial_backoff_ms: 500,
            requests_per_minute: None,
            cache_dir: None,
            offline: false,
            api_key: None,
        }
    }
}

pub struct LlmClient {
    transport: Box<dyn Transport>,
    cache: Option<ResponseCache>,
    limiter: Option<RateLimiter>,
    max_retries: u32,
    initial_backoff: Duration,
    offline: bool,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient")
            .field("cache", &self.cache)
            .field("max_retries", &self.max_retries)
            .field("offline", &self.offline)
            .finish_non_exhaustive()
    }
}

impl LlmClient {
    /// HTTP client for `config`. The credential falls back to [`API_KEY_ENV`].
    pub fn from_config(config: &ClientConfig) -> Result<Self, LlmError> {
        let api_key = config
            .api_key
            .clone()
            .or_else(|| std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()));
        let transport = HttpTransport::new(&config.base_url, api_key, Duration::from_secs(config.timeout_secs))
            .map_err(|e| LlmError::InvalidRequest(e.to_string()))?;
        Self::with_transport(Box::new(transport), config)
    }

    pub fn with_transport(transport: Box<dyn Transport>, config: &ClientConfig) -> Result<Self, LlmError> {
        let cache = match &config.cache_dir {
            Some(dir) => Some(ResponseCache::open(dir)?),
            None => None,
        };
        Ok(LlmClient {
            transport,
            cache,
            limiter: config.requests_per_minute.map(RateLimiter::per_minute),
            max_retries: config.max_retries,
            initial_backoff: Duration::from_millis(config.initial_backoff_ms),
            offline: config.offline,
        })
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }
}

impl Completer for LlmClient {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        request.validate()?;
        let started = Instant::now();
        let fp = fingerprint(request);
        if let Some(entry) = self.cache.as_ref().and_then(|c| c.get(&fp)) {
            return Ok(LlmResponse {
                text: entry.response_text,
                cached: true,
                latency_ms: started.elapsed().as_millis() as u64,
                request_fingerprint: fp,
                attempts: 0,
            });
        }
        if self.offline {
            return Err(LlmError::OfflineCacheMiss { fingerprint: fp });
        }

        let max_attempts = self.max_retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            if let Some(limiter) = &self.limiter {
                limiter.acquire();
            }
            match self.transport.send(request) {
                Ok(text) => {
                    log::info!("{:?} request {} succeeded on attempt {attempt}", request.purpose, &fp[..12]);
                    if let Some(cache) = &self.cache {
                        cache.put(&fp, request, &text)?;
                    }
                    return Ok(LlmResponse {
                        text,
                        cached: false,
                        latency_ms: started.elapsed().as_millis() as u64,
                        request_fingerprint: fp,
                        attempts: attempt,
                    });
                }
                Err(TransportError::Status { code, .. }) if code == 401 || code == 403 => {
                    return Err(LlmError::Auth { status: code });
                }
                Err(e) if e.is_retryable() => {
                    log::warn!("attempt {attempt}/{max_attempts} for {} failed: {e}", &fp[..12]);
                    if attempt >= max_attempts {
                        return Err(LlmError::RetriesExhausted {
                            attempts: attempt,
                            last_error: e.to_string(),
                        });
                    }
                    std::thread::sleep(self.initial_backoff * 2u32.saturating_pow(attempt - 1));
                }
                Err(TransportError::Status { code, body }) => {
                    return Err(LlmError::Http { status: code, body });
                }
                Err(e) => return Err(LlmError::Protocol(e.to_string())),
            }
        }
    }
}
