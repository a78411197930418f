//! The chat-completions HTTP backend: `POST {base_url}/chat/completions`
//! with a system+user message pair, reading `choices[0].message.content`.

use std::time::Duration;

use serde::Deserialize;

use super::{CallError, ChatRequest};

/// Connection settings for a chat-completions endpoint.
#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    /// Bearer token, if the endpoint wants one.
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> HttpConfig {
        HttpConfig {
            base_url: base_url.into(),
            api_key: None,
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone)]
pub(super) struct HttpBackend {
    client: reqwest::Client,
    base_url: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

impl HttpBackend {
    pub(super) fn new(config: HttpConfig) -> Result<HttpBackend, CallError> {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| CallError::Transport(e.to_string()))?;
        Ok(HttpBackend {
            client,
            base_url: config.base_url.trim_end_matches('/').to_owned(),
            api_key: config.api_key,
        })
    }

    pub(super) async fn call(&self, req: &ChatRequest) -> Result<(String, Option<String>), CallError> {
        let url = format!("{}/chat/completions", self.base_url);
        let mut messages = Vec::with_capacity(2);
        if !req.system.is_empty() {
            messages.push(serde_json::json!({"role": "system", "content": req.system}));
        }
        messages.push(serde_json::json!({"role": "user", "content": req.user}));
        let body = serde_json::json!({
            "model": req.model,
            "messages": messages,
            "temperature": req.temperature,
        });

        let mut request = self.client.post(&url).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .await
            .map_err(|e| CallError::Transport(e.to_string()))?;

        let status = response.status();
        match status.as_u16() {
            200..=299 => {}
            401 | 403 => return Err(CallError::Auth(status.as_u16())),
            429 => return Err(CallError::RateLimited),
            500..=599 => {
                return Err(CallError::Transport(format!("HTTP {status} from {url}")))
            }
            _ => {
                let snippet: String = response
                    .text()
                    .await
                    .unwrap_or_default()
                    .chars()
                    .take(200)
                    .collect();
                return Err(CallError::Fatal(format!("HTTP {status}: {snippet}")));
            }
        }

        let wire: WireResponse = response
            .json()
            .await
            .map_err(|e| CallError::Empty(format!("unparseable response body: {e}")))?;
        let content = wire
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| CallError::Empty("response carries no message content".into()))?;
        Ok((content, wire.model))
    }
}
