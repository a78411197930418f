//! A deterministic scripted backend so every pipeline is runnable and
//! bit-reproducible with no network at all.
//!
//! A script has three layers, consulted in order:
//!
//! 1. `exact` — responses keyed by the exact (system, user) message pair;
//! 2. `rules` — ordered substring rules (all listed fragments must occur,
//!    and a rule may be restricted to one model name);
//! 3. `default` — a catch-all response.
//!
//! A request matching none of them is an error: scripts are supposed to be
//! complete, and a silent fallback would hide fixture gaps.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::{CallError, ChatRequest};

#[derive(Debug, Clone, Deserialize)]
pub struct ExactResponse {
    pub system: String,
    pub user: String,
    pub response: String,
}

/// A substring rule: fires when every `user_contains` fragment occurs in the
/// user message, every `system_contains` fragment occurs in the system
/// message, and the model name matches (when given).
#[derive(Debug, Clone, Deserialize)]
pub struct ResponseRule {
    #[serde(default)]
    pub user_contains: Vec<String>,
    #[serde(default)]
    pub system_contains: Vec<String>,
    #[serde(default)]
    pub model: Option<String>,
    pub response: String,
}

impl ResponseRule {
    fn matches(&self, req: &ChatRequest) -> bool {
        if let Some(model) = &self.model {
            if model != &req.model {
                return false;
            }
        }
        self.user_contains.iter().all(|s| req.user.contains(s))
            && self.system_contains.iter().all(|s| req.system.contains(s))
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub exact: Vec<ExactResponse>,
    #[serde(default)]
    pub rules: Vec<ResponseRule>,
    #[serde(default)]
    pub default: Option<String>,
}

impl MockScript {
    /// Loads a script from a JSON file. Unknown top-level keys are ignored,
    /// so one file can also carry scripting for other offline services.
    pub fn from_path(path: &Path) -> Result<MockScript, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read mock script {}: {e}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| format!("cannot parse mock script {}: {e}", path.display()))
    }
}

#[derive(Debug, Clone)]
pub(super) struct MockBackend {
    exact: HashMap<(String, String), String>,
    rules: Vec<ResponseRule>,
    default: Option<String>,
}

impl MockBackend {
    pub(super) fn new(script: MockScript) -> MockBackend {
        let exact = script
            .exact
            .into_iter()
            .map(|e| ((e.system, e.user), e.response))
            .collect();
        MockBackend {
            exact,
            rules: script.rules,
            default: script.default,
        }
    }

    pub(super) fn call(&self, req: &ChatRequest) -> Result<String, CallError> {
        let key = (req.system.clone(), req.user.clone());
        if let Some(response) = self.exact.get(&key) {
            return Ok(response.clone());
        }
        if let Some(rule) = self.rules.iter().find(|rule| rule.matches(req)) {
            return Ok(rule.response.clone());
        }
        if let Some(default) = &self.default {
            return Ok(default.clone());
        }
        let preview: String = req.user.chars().take(120).collect();
        Err(CallError::ScriptMiss {
            model: req.model.clone(),
            user_preview: preview,
        })
    }
}
