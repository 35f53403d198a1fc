//! Chat-completion HTTP backend with bounded exponential backoff.

use super::{BackendConfig, GatewayError};
use serde_json::json;
use std::time::Duration;

const MAX_BACKOFF_MS: u64 = 10_000;

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    temperature: f64,
    api_key: Option<String>,
    max_retries: u32,
    backoff_base_ms: u64,
}

impl HttpBackend {
    /// Builds the client and resolves the credential. The key is read from
    /// the environment variable named in the config and held only in memory.
    pub fn new(cfg: &BackendConfig) -> Result<HttpBackend, GatewayError> {
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| GatewayError::MissingCredential(var.clone()))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.request_timeout_ms))
            .build()
            .map_err(|e| GatewayError::BackendUnavailable {
                attempts: 0,
                reason: format!("client construction failed: {e}"),
            })?;
        Ok(HttpBackend {
            client,
            url: cfg.base_url.clone(),
            model: cfg.model.clone(),
            temperature: cfg.temperature,
            api_key,
            max_retries: cfg.max_retries,
            backoff_base_ms: cfg.backoff_base_ms,
        })
    }

    /// Sends the prompt as a single user message and returns the first
    /// choice's content. Transport failures, 429s, and 5xx responses are
    /// retried up to `max_retries` times (so at most `max_retries + 1`
    /// requests go out); other statuses fail immediately.
    pub fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        });
        let mut attempts = 0u32;
        let mut last_reason = String::new();
        while attempts <= self.max_retries {
            attempts += 1;
            let mut request = self.client.post(&self.url).json(&body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            match request.send() {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        let value: serde_json::Value = response.json().map_err(|e| {
                            GatewayError::BackendUnavailable {
                                attempts,
                                reason: format!("response is not JSON: {e}"),
                            }
                        })?;
                        return extract_content(&value).ok_or_else(|| {
                            GatewayError::BackendUnavailable {
                                attempts,
                                reason: "response carries no choices[0].message.content"
                                    .to_string(),
                            }
                        });
                    }
                    let retryable = status.as_u16() == 429 || status.is_server_error();
                    last_reason = format!("http status {status}");
                    if !retryable {
                        return Err(GatewayError::BackendUnavailable {
                            attempts,
                            reason: last_reason,
                        });
                    }
                }
                Err(e) => {
                    last_reason = format!("transport error: {e}");
                }
            }
            if attempts <= self.max_retries {
                let delay = self
                    .backoff_base_ms
                    .saturating_mul(1 << (attempts - 1).min(16))
                    .min(MAX_BACKOFF_MS);
                std::thread::sleep(Duration::from_millis(delay));
            }
        }
        Err(GatewayError::BackendUnavailable {
            attempts,
            reason: last_reason,
        })
    }
}

fn extract_content(value: &serde_json::Value) -> Option<String> {
    value
        .get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}
