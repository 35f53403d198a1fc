//! Completion backends and the shapes they exchange.
//!
//! Three backends share one interface: `mock-echo` replays the ground truth
//! (closing the loop for pipeline tests), `mock-canned` serves fixed
//! responses keyed by sample id, and `http` talks to a chat-completion
//! endpoint. Credentials are only ever read from the environment variable
//! named in the config; no artifact or config file carries a key.

mod http;
pub mod parse;

pub use http::HttpBackend;
pub use parse::{
    decompose_statement, normalize_expr, parse_generation, DecomposedStatement,
    MalformedStatement, ParseFailure, ParsedGeneration,
};

use crate::level::Level;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    MockEcho,
    MockCanned,
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Full chat-completion endpoint URL, e.g. `http://host:port/v1/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Environment variable that holds the bearer token. `None` sends no
    /// Authorization header (local endpoints).
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub max_retries: u32,
    pub request_timeout_ms: u64,
    pub max_concurrent_requests: usize,
    /// First backoff delay; doubles per retry, capped at ten seconds.
    pub backoff_base_ms: u64,
    /// Responses for `mock-canned`, JSON map of sample id to response text.
    pub canned_path: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::MockEcho,
            base_url: String::new(),
            model: String::new(),
            api_key_env: None,
            temperature: 0.0,
            max_retries: 3,
            request_timeout_ms: 60_000,
            max_concurrent_requests: 4,
            backoff_base_ms: 250,
            canned_path: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("backend unavailable after {attempts} attempt(s): {reason}")]
    BackendUnavailable { attempts: u32, reason: String },
    #[error("no canned response for sample {0}")]
    MissingCannedResponse(String),
    #[error("cannot read canned responses from {path}: {reason}")]
    BadCannedFile { path: PathBuf, reason: String },
}

/// One completion call. Mock backends need the ground truth; the http
/// backend only reads the prompt.
#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub sample_id: String,
    pub prompt: String,
    /// Ground-truth insertion line and statement, present when the caller
    /// has them (pipeline runs); used by `mock-echo` only.
    pub echo: Option<(u32, String)>,
}

pub enum Backend {
    MockEcho,
    MockCanned(BTreeMap<String, String>),
    Http(HttpBackend),
}

impl Backend {
    pub fn from_config(cfg: &BackendConfig) -> Result<Backend, GatewayError> {
        match cfg.kind {
            BackendKind::MockEcho => Ok(Backend::MockEcho),
            BackendKind::MockCanned => {
                let path = cfg.canned_path.clone().ok_or_else(|| {
                    GatewayError::BadCannedFile {
                        path: PathBuf::new(),
                        reason: "mock-canned requires a canned response file".to_string(),
                    }
                })?;
                let raw = std::fs::read_to_string(&path).map_err(|e| {
                    GatewayError::BadCannedFile {
                        path: path.clone(),
                        reason: e.to_string(),
                    }
                })?;
                let map = serde_json::from_str(&raw).map_err(|e| GatewayError::BadCannedFile {
                    path,
                    reason: e.to_string(),
                })?;
                Ok(Backend::MockCanned(map))
            }
            BackendKind::Http => Ok(Backend::Http(HttpBackend::new(cfg)?)),
        }
    }

    /// Runs one completion. Deterministic for both mocks; the http backend
    /// retries transient failures with exponential backoff.
    pub fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        match self {
            Backend::MockEcho => {
                let (line, statement) = request.echo.as_ref().ok_or_else(|| {
                    GatewayError::BackendUnavailable {
                        attempts: 0,
                        reason: "mock-echo needs ground truth on the request".to_string(),
                    }
                })?;
                Ok(format!("{line} {}", single_line(statement)))
            }
            Backend::MockCanned(map) => map
                .get(&request.sample_id)
                .cloned()
                .ok_or_else(|| GatewayError::MissingCannedResponse(request.sample_id.clone())),
            Backend::Http(backend) => backend.complete(&request.prompt),
        }
    }
}

/// Collapses whitespace runs so multi-line statements fit the single-line
/// `<line> <statement>` response contract.
pub fn single_line(statement: &str) -> String {
    statement.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Tentative,
    Refined,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Tentative => f.write_str("tentative"),
            Stage::Refined => f.write_str("refined"),
        }
    }
}

/// A parsed completion, decomposed for scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratedLog {
    pub sample_id: String,
    pub stage: Stage,
    /// 1-based line within the target method.
    pub line: u32,
    pub statement: String,
    /// Severity when the statement decomposed to an on-scale level.
    pub level: Option<Level>,
    /// Invoked method name as written; empty when decomposition failed.
    pub level_name: String,
    pub variable_exprs: Vec<String>,
    pub text: String,
    /// False when the statement was not a clean logging call; the variable
    /// and text fields are empty in that case.
    pub decompose_ok: bool,
}

impl GeneratedLog {
    /// Builds the record from a parsed completion, decomposing the statement.
    /// Decomposition failures are recorded, not fatal: position is still
    /// scoreable even when the statement is not a clean logging call.
    pub fn from_parsed(sample_id: &str, stage: Stage, parsed: &ParsedGeneration) -> GeneratedLog {
        match decompose_statement(&parsed.statement) {
            Ok(d) => GeneratedLog {
                sample_id: sample_id.to_string(),
                stage,
                line: parsed.line,
                statement: parsed.statement.clone(),
                level: d.level,
                level_name: d.level_name.clone(),
                variable_exprs: d.variable_exprs.clone(),
                text: d.text(),
                decompose_ok: true,
            },
            Err(_) => GeneratedLog {
                sample_id: sample_id.to_string(),
                stage,
                line: parsed.line,
                statement: parsed.statement.clone(),
                level: None,
                level_name: String::new(),
                variable_exprs: Vec::new(),
                text: String::new(),
                decompose_ok: false,
            },
        }
    }
}
