//! Run configuration: a TOML file with layered defaults so an empty file is
//! a valid config. Secrets never live in the file — the gateway section
//! names an environment variable instead, which is read only when an HTTP
//! gateway is actually built.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::gateway::{HttpConfig, RetryPolicy, RoleSpec};

/// Configuration errors always name the field (or file) at fault.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse config: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("environment variable {name} (named by `gateway.api_key_env`) is not set")]
    MissingSecret { name: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Raw TOML shape (every field optional so defaults can layer underneath)
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    k: Option<usize>,
    workdir: Option<PathBuf>,
    #[serde(default)]
    paths: RawPaths,
    #[serde(default)]
    bootstrap: RawBootstrap,
    #[serde(default)]
    gateway: RawGateway,
    #[serde(default)]
    roles: RawRoles,
    #[serde(default)]
    embedding: RawEmbedding,
    #[serde(default)]
    matcher: RawService,
    #[serde(default)]
    idconv: RawService,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPaths {
    articles: Option<PathBuf>,
    embeddings: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBootstrap {
    iterations: Option<u32>,
    level: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGateway {
    base_url: Option<String>,
    api_key_env: Option<String>,
    timeout_secs: Option<u64>,
    max_retries: Option<u32>,
    retry_base_ms: Option<u64>,
    parallelism: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoles {
    claimgen: Option<RawRole>,
    screener: Option<RawRole>,
    extractor: Option<RawRole>,
    filter: Option<RawRole>,
    verifier: Option<RawRole>,
    panel: Option<Vec<RawRole>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRole {
    model: Option<String>,
    temperature: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmbedding {
    backend: Option<String>,
    dim: Option<u32>,
    base_url: Option<String>,
    model: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawService {
    base_url: Option<String>,
}

// ---------------------------------------------------------------------------
// Resolved configuration
// ---------------------------------------------------------------------------

/// Gateway connection settings (validated, defaults applied).
#[derive(Debug, Clone)]
pub struct GatewaySettings {
    pub base_url: String,
    /// Name of the env var holding the API key, if auth is needed.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub retry_base_ms: u64,
    pub parallelism: usize,
}

impl GatewaySettings {
    /// Resolves the secret (if any) and builds the HTTP connection config.
    /// Fails only here — not at parse time — when the named env var is
    /// absent, so mock runs never require a key.
    pub fn http_config(&self) -> Result<HttpConfig, ConfigError> {
        let api_key = match &self.api_key_env {
            Some(name) => Some(std::env::var(name).map_err(|_| ConfigError::MissingSecret {
                name: name.clone(),
            })?),
            None => None,
        };
        Ok(HttpConfig {
            base_url: self.base_url.clone(),
            api_key,
            timeout: std::time::Duration::from_secs(self.timeout_secs),
        })
    }

    /// Retry schedule implied by these settings (full jitter stays on).
    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            attempts: self.max_retries,
            base_delay_ms: self.retry_base_ms,
            jitter: true,
        }
    }
}

/// Model/temperature assignments for every pipeline role.
#[derive(Debug, Clone)]
pub struct RoleSettings {
    pub claimgen: RoleSpec,
    pub screener: RoleSpec,
    pub extractor: RoleSpec,
    pub filter: RoleSpec,
    pub verifier: RoleSpec,
    /// Always exactly three members.
    pub panel: [RoleSpec; 3],
}

/// How claim/article embeddings are produced for retrieval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbeddingBackend {
    /// Deterministic hashed bag-of-words (offline; used by `build-index`).
    Fallback,
    /// Remote embeddings endpoint.
    Remote { base_url: String, model: String },
}

/// Embedding settings: backend plus vector dimensionality.
#[derive(Debug, Clone)]
pub struct EmbeddingSettings {
    pub backend: EmbeddingBackend,
    pub dim: u32,
}

/// Percentile-bootstrap settings for confidence intervals.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapConfig {
    pub iterations: u32,
    pub level: f64,
}

/// Fully validated run configuration with all defaults applied.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Retrieval depth per claim.
    pub k: usize,
    pub workdir: PathBuf,
    pub articles: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub bootstrap: BootstrapConfig,
    pub gateway: GatewaySettings,
    pub roles: RoleSettings,
    pub embedding: EmbeddingSettings,
    /// Base URL of the free-text citation matcher service, if configured.
    pub matcher_url: Option<String>,
    /// Base URL of the DOI→PMID converter service, if configured.
    pub idconv_url: Option<String>,
    /// The raw file text, for config hashing in run manifests.
    raw_text: String,
}

impl PipelineConfig {
    /// The exact file text this config was parsed from ("" for defaults).
    pub fn raw_text(&self) -> &str {
        &self.raw_text
    }

    /// A config with every default and no file behind it.
    pub fn default_config() -> PipelineConfig {
        parse_config("").expect("empty config must be valid")
    }
}

fn role(raw: Option<RawRole>) -> RoleSpec {
    match raw {
        Some(raw) => RoleSpec::new(
            raw.model.unwrap_or_else(|| "default".to_string()),
            raw.temperature.unwrap_or(0.0),
        ),
        None => RoleSpec::new("default", 0.0),
    }
}

/// Parses config text and applies defaults + invariant checks.
pub fn parse_config(text: &str) -> Result<PipelineConfig, ConfigError> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|err| ConfigError::Parse(err.to_string()))?;

    let k = raw.k.unwrap_or(10);
    if k < 1 {
        return Err(invalid("k", "retrieval depth must be at least 1"));
    }

    let panel = match raw.roles.panel {
        None => [
            RoleSpec::new("default", 0.0),
            RoleSpec::new("default", 0.0),
            RoleSpec::new("default", 0.0),
        ],
        Some(raw_panel) => {
            if raw_panel.len() != 3 {
                return Err(invalid(
                    "panel",
                    format!("the panel needs exactly 3 roles, found {}", raw_panel.len()),
                ));
            }
            let mut members = raw_panel.into_iter().map(|r| role(Some(r)));
            [
                members.next().unwrap(),
                members.next().unwrap(),
                members.next().unwrap(),
            ]
        }
    };

    let bootstrap = BootstrapConfig {
        iterations: raw.bootstrap.iterations.unwrap_or(2000),
        level: raw.bootstrap.level.unwrap_or(0.95),
    };
    if bootstrap.iterations == 0 {
        return Err(invalid("bootstrap.iterations", "must be at least 1"));
    }
    if !(bootstrap.level > 0.0 && bootstrap.level < 1.0) {
        return Err(invalid(
            "bootstrap.level",
            "must lie strictly between 0 and 1",
        ));
    }

    let gateway = GatewaySettings {
        base_url: raw
            .gateway
            .base_url
            .unwrap_or_else(|| "http://localhost:8080/v1".to_string()),
        api_key_env: raw.gateway.api_key_env,
        timeout_secs: raw.gateway.timeout_secs.unwrap_or(60),
        max_retries: raw.gateway.max_retries.unwrap_or(5),
        retry_base_ms: raw.gateway.retry_base_ms.unwrap_or(250),
        parallelism: raw.gateway.parallelism.unwrap_or(8),
    };
    if gateway.max_retries == 0 {
        return Err(invalid("gateway.max_retries", "must be at least 1"));
    }
    if gateway.parallelism == 0 {
        return Err(invalid("gateway.parallelism", "must be at least 1"));
    }

    let dim = raw.embedding.dim.unwrap_or(256);
    if dim == 0 {
        return Err(invalid("embedding.dim", "must be at least 1"));
    }
    let backend = match raw.embedding.backend.as_deref() {
        None | Some("fallback") => EmbeddingBackend::Fallback,
        Some("remote") => {
            let base_url = raw.embedding.base_url.ok_or_else(|| {
                invalid(
                    "embedding.base_url",
                    "required when embedding.backend = \"remote\"",
                )
            })?;
            let model = raw.embedding.model.ok_or_else(|| {
                invalid(
                    "embedding.model",
                    "required when embedding.backend = \"remote\"",
                )
            })?;
            EmbeddingBackend::Remote { base_url, model }
        }
        Some(other) => {
            return Err(invalid(
                "embedding.backend",
                format!("unknown backend {other:?}; expected \"fallback\" or \"remote\""),
            ))
        }
    };

    Ok(PipelineConfig {
        seed: raw.seed.unwrap_or(0),
        k,
        workdir: raw.workdir.unwrap_or_else(|| PathBuf::from("workdir")),
        articles: raw.paths.articles,
        embeddings: raw.paths.embeddings,
        bootstrap,
        gateway,
        roles: RoleSettings {
            claimgen: role(raw.roles.claimgen),
            screener: role(raw.roles.screener),
            extractor: role(raw.roles.extractor),
            filter: role(raw.roles.filter),
            verifier: role(raw.roles.verifier),
            panel,
        },
        embedding: EmbeddingSettings { backend, dim },
        matcher_url: raw.matcher.base_url,
        idconv_url: raw.idconv.base_url,
        raw_text: text.to_string(),
    })
}

/// Reads and validates a config file.
pub fn validate_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}
