//! Model access: one `Gateway` type that answers chat requests either from a
//! live chat-completions endpoint or from a deterministic scripted backend,
//! with retry, bounded concurrency, and resumable checkpointing on top.
//!
//! Retry covers only faults that can heal on their own — rate limits, 5xx
//! responses, and transport errors. Authentication failures and malformed
//! requests fail immediately: retrying them would only hide a config bug.

mod checkpoint;
mod http;
mod mock;

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use futures::stream::{self, StreamExt};
use rand::Rng;
use thiserror::Error;

use crate::prompts::MessagePair;

pub use checkpoint::{load as load_checkpoint, CheckpointEntry, CheckpointWriter};
use http::HttpBackend;
pub use http::HttpConfig;
use mock::MockBackend;
pub use mock::{ExactResponse, MockScript, ResponseRule};

/// One chat turn: a system framing, a user message, and sampling settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(
        model: impl Into<String>,
        system: impl Into<String>,
        user: impl Into<String>,
        temperature: f64,
    ) -> ChatRequest {
        ChatRequest {
            model: model.into(),
            system: system.into(),
            user: user.into(),
            temperature,
        }
    }

    /// Builds a request from a prepared system/user message pair.
    pub fn from_pair(model: impl Into<String>, pair: &MessagePair, temperature: f64) -> ChatRequest {
        ChatRequest::new(model, pair.system.clone(), pair.user.clone(), temperature)
    }
}

/// A model role: which model answers and at what temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleSpec {
    pub model: String,
    pub temperature: f64,
}

impl RoleSpec {
    pub fn new(model: impl Into<String>, temperature: f64) -> RoleSpec {
        RoleSpec {
            model: model.into(),
            temperature,
        }
    }

    /// Builds the chat request that sends `pair` under this role.
    pub fn request(&self, pair: &MessagePair) -> ChatRequest {
        ChatRequest::from_pair(self.model.clone(), pair, self.temperature)
    }
}

/// A completed chat turn. `latency_ms` is zero for checkpoint replays.
#[derive(Debug, Clone)]
pub struct ChatResponse {
    pub content: String,
    pub model: String,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimit { attempts: u32 },
    #[error("authentication rejected (HTTP {status}); not retried")]
    Auth { status: u16 },
    #[error("endpoint rejected the request: {0}")]
    BadRequest(String),
    #[error("empty completion: {0}")]
    EmptyResponse(String),
    #[error("mock script has no response for model {model:?} (user message starts: {user_preview:?})")]
    ScriptMiss { model: String, user_preview: String },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error("parallelism must be at least 1")]
    InvalidParallelism,
    #[error("{0}")]
    Script(String),
}

/// Internal per-attempt failure; `retryable()` decides whether the retry
/// loop may try again.
#[derive(Debug)]
pub(crate) enum CallError {
    /// Network failure, timeout, or 5xx — worth another attempt.
    Transport(String),
    /// HTTP 429 — worth another attempt after backing off.
    RateLimited,
    /// HTTP 401/403 — the credential is wrong, retries cannot help.
    Auth(u16),
    /// Any other non-success status — the request itself is at fault.
    Fatal(String),
    /// A success response that carries no usable message content.
    Empty(String),
    /// The mock script has no entry for this request.
    ScriptMiss { model: String, user_preview: String },
}

impl CallError {
    fn retryable(&self) -> bool {
        matches!(self, CallError::Transport(_) | CallError::RateLimited)
    }

    fn into_gateway(self, attempts: u32) -> GatewayError {
        match self {
            CallError::Transport(message) => GatewayError::Transport { attempts, message },
            CallError::RateLimited => GatewayError::RateLimit { attempts },
            CallError::Auth(status) => GatewayError::Auth { status },
            CallError::Fatal(message) => GatewayError::BadRequest(message),
            CallError::Empty(message) => GatewayError::EmptyResponse(message),
            CallError::ScriptMiss {
                model,
                user_preview,
            } => GatewayError::ScriptMiss {
                model,
                user_preview,
            },
        }
    }
}

/// Exponential backoff: `base_delay_ms` doubled per attempt, with full
/// jitter (a uniform draw from zero up to the computed delay) when enabled.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay_ms: u64,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> RetryPolicy {
        RetryPolicy {
            attempts: 5,
            base_delay_ms: 250,
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// A policy with no waiting, for tests that exercise retry counting.
    pub fn immediate(attempts: u32) -> RetryPolicy {
        RetryPolicy {
            attempts,
            base_delay_ms: 0,
            jitter: false,
        }
    }
}

/// The delay before retry number `attempt + 1` (attempts count from 1).
fn backoff_delay_ms(policy: &RetryPolicy, attempt: u32, rng: &mut impl Rng) -> u64 {
    let doublings = attempt.saturating_sub(1).min(20);
    let cap = policy.base_delay_ms.saturating_mul(1u64 << doublings);
    if policy.jitter && cap > 0 {
        rng.random_range(0..=cap)
    } else {
        cap
    }
}

#[derive(Debug, Clone)]
enum Backend {
    Http(HttpBackend),
    Mock(MockBackend),
}

/// A retrying chat client over either backend.
#[derive(Debug, Clone)]
pub struct Gateway {
    backend: Backend,
    policy: RetryPolicy,
}

impl Gateway {
    pub fn http(config: HttpConfig, policy: RetryPolicy) -> Result<Gateway, GatewayError> {
        let backend = HttpBackend::new(config).map_err(|e| e.into_gateway(1))?;
        Ok(Gateway {
            backend: Backend::Http(backend),
            policy,
        })
    }

    pub fn mock(script: MockScript) -> Gateway {
        Gateway {
            backend: Backend::Mock(MockBackend::new(script)),
            policy: RetryPolicy::immediate(1),
        }
    }

    pub fn mock_from_path(path: &Path) -> Result<Gateway, GatewayError> {
        Ok(Gateway::mock(
            MockScript::from_path(path).map_err(GatewayError::Script)?,
        ))
    }

    pub fn with_policy(mut self, policy: RetryPolicy) -> Gateway {
        self.policy = policy;
        self
    }

    /// Issues one request, retrying transient faults per the policy.
    pub async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let attempts = self.policy.attempts.max(1);
        for attempt in 1..=attempts {
            let started = Instant::now();
            let outcome = match &self.backend {
                Backend::Http(backend) => backend.call(request).await,
                Backend::Mock(backend) => backend.call(request).map(|content| (content, None)),
            };
            match outcome {
                Ok((content, model)) => {
                    if content.is_empty() {
                        return Err(GatewayError::EmptyResponse(format!(
                            "model {:?} returned no text",
                            request.model
                        )));
                    }
                    return Ok(ChatResponse {
                        content,
                        model: model.unwrap_or_else(|| request.model.clone()),
                        latency_ms: started.elapsed().as_millis() as u64,
                    });
                }
                Err(err) if err.retryable() && attempt < attempts => {
                    let delay = backoff_delay_ms(&self.policy, attempt, &mut rand::rng());
                    tokio::time::sleep(Duration::from_millis(delay)).await;
                }
                Err(err) => return Err(err.into_gateway(attempt)),
            }
        }
        unreachable!("the retry loop returns on every path");
    }

    /// Issues many requests with at most `parallelism` in flight, yielding
    /// results in input order. With a checkpoint path, completed responses
    /// are appended as they arrive and replayed (without any call) on rerun;
    /// failed items are not checkpointed, so a rerun retries exactly those.
    ///
    /// Per-item failures land in the item's slot; the outer error is
    /// reserved for setup and checkpoint faults.
    pub async fn complete_batch(
        &self,
        requests: &[ChatRequest],
        parallelism: usize,
        checkpoint_path: Option<&Path>,
    ) -> Result<Vec<Result<ChatResponse, GatewayError>>, GatewayError> {
        if parallelism == 0 {
            return Err(GatewayError::InvalidParallelism);
        }
        let replayed: HashMap<u64, String> = match checkpoint_path {
            Some(path) => checkpoint::load(path)?,
            None => HashMap::new(),
        };
        let mut writer = checkpoint_path.map(CheckpointWriter::open).transpose()?;

        let mut completions = stream::iter(requests.iter().enumerate().map(|(i, request)| {
            let cached = replayed.get(&(i as u64)).cloned();
            async move {
                match cached {
                    Some(content) => {
                        let response = ChatResponse {
                            content,
                            model: request.model.clone(),
                            latency_ms: 0,
                        };
                        (i as u64, true, Ok(response))
                    }
                    None => (i as u64, false, self.complete(request).await),
                }
            }
        }))
        .buffered(parallelism);

        let mut results = Vec::with_capacity(requests.len());
        while let Some((index, was_replay, result)) = completions.next().await {
            if !was_replay {
                if let (Some(writer), Ok(response)) = (writer.as_mut(), &result) {
                    writer.append(index, &response.content)?;
                }
            }
            results.push(result);
        }
        Ok(results)
    }
}
