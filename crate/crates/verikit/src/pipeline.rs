//! Pipeline orchestration for the synthetic-dataset stages:
//! claims → retrieve → screen → panel → assemble.
//!
//! Every stage reads and writes headered JSONL files inside the configured
//! workdir, records its unit accounting in the run manifest (conservation:
//! `outputs + dropped + errors == inputs`), and is skipped when its output
//! file already exists — so re-running a completed workdir issues zero
//! gateway calls. Gateway batches checkpoint under `workdir/checkpoints/`,
//! making interrupted stages resumable mid-flight as well.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, EmbeddingBackend, EmbeddingSettings, PipelineConfig};
use crate::corpus::{
    top_k, ArticleStore, CorpusError, Embedder, EmbeddingIndex, RemoteEmbedder,
};
use crate::gateway::{ChatRequest, Gateway, GatewayError};
use crate::jsonl::{read_jsonl, write_jsonl, JsonlError};
use crate::manifest::{ManifestError, RunManifest, StageCounts};
use crate::synthgen::{
    assemble_instance, claim_from_response, claim_id, claim_request, dataset_stats,
    instance_from_screener, screen_controversial, verdict_from_response, verification_request,
    DatasetStats, PanelOutcome, PanelVerdict, SynthError, TrainingInstance, VerdictOutcome,
};
use crate::types::{Claim, Polarity};
use crate::verdict::{LikertScore, VerificationReport};

pub const CLAIMS_SCHEMA: &str = "claims";
pub const PAIRS_SCHEMA: &str = "pairs";
pub const VERDICTS_SCHEMA: &str = "verdicts";
pub const PANEL_SCHEMA: &str = "panel";
pub const INSTANCES_SCHEMA: &str = "instances";
pub const DROPPED_SCHEMA: &str = "dropped";
pub const ERRORS_SCHEMA: &str = "errors";

/// Anything that can stop a pipeline run.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage `{stage}` is missing its input: {path}")]
    StageInputMissing { stage: String, path: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("stage file {path} is inconsistent: {message}")]
    Corrupt { path: String, message: String },
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Stage file records
// ---------------------------------------------------------------------------

/// One retrieved (claim, article) pair with its similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub claim_id: String,
    pub pmid: u64,
    pub cosine: f64,
    pub is_source_article: bool,
}

/// Whether a verification call produced a usable report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Scored,
    Unscorable,
}

/// One screening verdict for a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub claim_id: String,
    pub pmid: u64,
    pub outcome: OutcomeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<LikertScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One panel member's verdict for a controversial pair. `role` is the
/// member's position (0..3) in the configured panel, which also fixes the
/// rationale-donor input order during assembly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRecord {
    pub claim_id: String,
    pub pmid: u64,
    pub role: u8,
    pub model_id: String,
    pub outcome: OutcomeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<LikertScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A pair excluded during assembly, with the rule that excluded it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRecord {
    pub claim_id: String,
    pub pmid: u64,
    pub reason: String,
}

/// One operational failure, keyed by the unit it lost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub unit: String,
    pub message: String,
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// The synthesis stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Claims,
    Retrieve,
    Screen,
    Panel,
    Assemble,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Claims,
        Stage::Retrieve,
        Stage::Screen,
        Stage::Panel,
        Stage::Assemble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Claims => "claims",
            Stage::Retrieve => "retrieve",
            Stage::Screen => "screen",
            Stage::Panel => "panel",
            Stage::Assemble => "assemble",
        }
    }

    /// The stage's primary output file inside the workdir; its existence
    /// marks the stage complete.
    pub fn output_file(self) -> &'static str {
        match self {
            Stage::Claims => "claims.jsonl",
            Stage::Retrieve => "pairs.jsonl",
            Stage::Screen => "verdicts.jsonl",
            Stage::Panel => "panel.jsonl",
            Stage::Assemble => "instances.jsonl",
        }
    }
}

/// Builds the embedder a config asks for. The fallback embedder here uses
/// the configured dimension — index builders want that; retrieval instead
/// matches the dimension of the index it queries.
pub fn embedder_for(settings: &EmbeddingSettings) -> Embedder {
    match &settings.backend {
        EmbeddingBackend::Fallback => Embedder::Fallback {
            dim: settings.dim as usize,
        },
        EmbeddingBackend::Remote { base_url, model } => {
            Embedder::Remote(RemoteEmbedder::new(base_url.clone(), model.clone(), None))
        }
    }
}

/// Embeds every stored article (ascending pmid) and writes the binary
/// embedding index to `path`. Returns the number of vectors written.
pub async fn build_index(
    store: &ArticleStore,
    settings: &EmbeddingSettings,
    path: &Path,
) -> Result<usize, PipelineError> {
    let embedder = embedder_for(settings);
    let mut index: Option<EmbeddingIndex> = None;
    for article in store.iter() {
        let vector = embedder.embed(&article.prompt_text()).await?;
        let index = index.get_or_insert_with(|| EmbeddingIndex::new(vector.len()));
        index.insert(article.pmid, vector)?;
    }
    let index = index.unwrap_or_else(|| EmbeddingIndex::new(settings.dim as usize));
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    index.write_mfei(path)?;
    Ok(index.len())
}

/// Derives the per-pair assembly seed from the run seed, the claim, and the
/// evidence article, so rationale draws never depend on batch ordering.
fn assembly_seed(global: u64, claim_id: &str, pmid: u64) -> u64 {
    let per_claim = crate::derive_seed(global, claim_id);
    let per_pair = crate::derive_seed(per_claim, &pmid.to_string());
    crate::derive_seed(per_pair, "assemble")
}

/// Claims whose scored screening verdicts span at least two coarse classes.
fn controversial_claims(verdicts: &[VerdictRecord]) -> BTreeSet<String> {
    let mut scores_by_claim: BTreeMap<&str, Vec<LikertScore>> = BTreeMap::new();
    for record in verdicts {
        if let (OutcomeKind::Scored, Some(score)) = (record.outcome, record.score) {
            scores_by_claim
                .entry(record.claim_id.as_str())
                .or_default()
                .push(score);
        }
    }
    scores_by_claim
        .into_iter()
        .filter(|(_, scores)| screen_controversial(scores).unwrap_or(false))
        .map(|(id, _)| id.to_string())
        .collect()
}

fn report_from_parts(
    path: &Path,
    unit: &str,
    score: Option<LikertScore>,
    rationale: Option<&str>,
) -> Result<VerificationReport, PipelineError> {
    let corrupt = |message: String| PipelineError::Corrupt {
        path: path.display().to_string(),
        message,
    };
    let score = score.ok_or_else(|| corrupt(format!("scored record {unit} has no score")))?;
    let rationale =
        rationale.ok_or_else(|| corrupt(format!("scored record {unit} has no rationale")))?;
    VerificationReport::new(rationale, score)
        .map_err(|err| corrupt(format!("scored record {unit} has an invalid report: {err}")))
}

/// Orchestrates the synthesis stages over one workdir.
pub struct SynthRunner {
    config: PipelineConfig,
    gateway: Gateway,
    store: ArticleStore,
}

impl SynthRunner {
    /// Prepares the workdir (and its checkpoint directory) for a run.
    pub fn new(
        config: PipelineConfig,
        gateway: Gateway,
        store: ArticleStore,
    ) -> Result<SynthRunner, PipelineError> {
        let checkpoints = config.workdir.join("checkpoints");
        std::fs::create_dir_all(&checkpoints).map_err(io_err(&checkpoints))?;
        Ok(SynthRunner {
            config,
            gateway,
            store,
        })
    }

    pub fn workdir(&self) -> &Path {
        &self.config.workdir
    }

    pub fn store(&self) -> &ArticleStore {
        &self.store
    }

    fn stage_path(&self, name: &str) -> PathBuf {
        self.config.workdir.join(name)
    }

    fn checkpoint_path(&self, stage: Stage) -> PathBuf {
        self.config
            .workdir
            .join("checkpoints")
            .join(format!("{}.jsonl", stage.as_str()))
    }

    fn require_input(&self, stage: Stage, name: &str) -> Result<PathBuf, PipelineError> {
        let path = self.stage_path(name);
        if path.exists() {
            Ok(path)
        } else {
            Err(PipelineError::StageInputMissing {
                stage: stage.as_str().to_string(),
                path: path.display().to_string(),
            })
        }
    }

    fn write_errors(&self, stage: Stage, errors: &[ErrorRecord]) -> Result<(), PipelineError> {
        if errors.is_empty() {
            return Ok(());
        }
        let path = self.stage_path(&format!("errors-{}.jsonl", stage.as_str()));
        write_jsonl(&path, ERRORS_SCHEMA, errors)?;
        Ok(())
    }

    /// Loads the workdir's manifest if one exists, stamping it with the
    /// current config hash and seed; otherwise starts a fresh one.
    pub fn load_or_new_manifest(&self) -> RunManifest {
        match RunManifest::read(&self.config.workdir) {
            Ok(mut manifest) => {
                manifest.config_hash = crate::manifest::config_hash(self.config.raw_text());
                manifest.seed = self.config.seed;
                manifest
            }
            Err(_) => RunManifest::new(self.config.raw_text(), self.config.seed),
        }
    }

    /// Runs one stage unless its output already exists. Returns whether the
    /// stage actually executed.
    pub async fn run_stage(
        &self,
        stage: Stage,
        manifest: &mut RunManifest,
    ) -> Result<bool, PipelineError> {
        if self.stage_path(stage.output_file()).exists() {
            return Ok(false);
        }
        let started = Instant::now();
        let mut counts = match stage {
            Stage::Claims => self.stage_claims().await?,
            Stage::Retrieve => self.stage_retrieve().await?,
            Stage::Screen => self.stage_screen().await?,
            Stage::Panel => self.stage_panel().await?,
            Stage::Assemble => self.stage_assemble()?,
        };
        counts.wall_ms = started.elapsed().as_millis() as u64;
        manifest.record_stage(stage.as_str(), counts);
        Ok(true)
    }

    /// Runs every stage in order, then validates and writes the manifest.
    pub async fn run_all(&self) -> Result<RunManifest, PipelineError> {
        let mut manifest = self.load_or_new_manifest();
        for stage in Stage::ALL {
            self.run_stage(stage, &mut manifest).await?;
        }
        manifest.validate()?;
        manifest.write(&self.config.workdir)?;
        Ok(manifest)
    }

    /// Runs a single stage (CLI subcommand path) with manifest bookkeeping.
    pub async fn run_single(&self, stage: Stage) -> Result<RunManifest, PipelineError> {
        let mut manifest = self.load_or_new_manifest();
        self.run_stage(stage, &mut manifest).await?;
        manifest.validate()?;
        manifest.write(&self.config.workdir)?;
        Ok(manifest)
    }

    /// Computes dataset statistics over the assembled instances and writes
    /// `stats.json` next to them.
    pub fn write_stats(&self) -> Result<DatasetStats, PipelineError> {
        let path = self.require_input(Stage::Assemble, Stage::Assemble.output_file())?;
        let instances: Vec<TrainingInstance> = read_jsonl(&path, INSTANCES_SCHEMA)?;
        let stats = dataset_stats(&instances)?;
        let out = self.stage_path("stats.json");
        let json = serde_json::to_string_pretty(&stats).map_err(|err| PipelineError::Corrupt {
            path: out.display().to_string(),
            message: err.to_string(),
        })?;
        std::fs::write(&out, json + "\n").map_err(io_err(&out))?;
        Ok(stats)
    }

    // -- claims --------------------------------------------------------

    /// Generates one supported and one refuted claim per stored article.
    async fn stage_claims(&self) -> Result<StageCounts, PipelineError> {
        let role = &self.config.roles.claimgen;
        let mut units: Vec<(u64, Polarity)> = Vec::with_capacity(self.store.len() * 2);
        let mut requests: Vec<ChatRequest> = Vec::with_capacity(self.store.len() * 2);
        for article in self.store.iter() {
            for polarity in [Polarity::SupportedBy, Polarity::RefutedBy] {
                units.push((article.pmid, polarity));
                requests.push(claim_request(&role.model, role.temperature, article, polarity));
            }
        }

        let checkpoint = self.checkpoint_path(Stage::Claims);
        let results = self
            .gateway
            .complete_batch(&requests, self.config.gateway.parallelism, Some(&checkpoint))
            .await?;

        let mut claims: Vec<Claim> = Vec::new();
        let mut errors: Vec<ErrorRecord> = Vec::new();
        for ((pmid, polarity), result) in units.iter().zip(results) {
            let article = self.store.get(*pmid).expect("unit pmid comes from store");
            let unit = claim_id(*pmid, *polarity);
            match result {
                Ok(response) => match claim_from_response(article, *polarity, &response.content) {
                    Ok(claim) => claims.push(claim),
                    Err(err) => errors.push(ErrorRecord {
                        unit,
                        message: err.to_string(),
                    }),
                },
                Err(err) => errors.push(ErrorRecord {
                    unit,
                    message: err.to_string(),
                }),
            }
        }

        write_jsonl(&self.stage_path("claims.jsonl"), CLAIMS_SCHEMA, &claims)?;
        self.write_errors(Stage::Claims, &errors)?;
        Ok(StageCounts {
            inputs: (self.store.len() * 2) as u64,
            outputs: claims.len() as u64,
            dropped: 0,
            errors: errors.len() as u64,
            ..StageCounts::default()
        })
    }

    // -- retrieve ------------------------------------------------------

    /// Where the article embedding index lives for this run.
    pub fn embeddings_path(&self) -> PathBuf {
        self.config
            .embeddings
            .clone()
            .unwrap_or_else(|| self.config.workdir.join("embeddings.mfei"))
    }

    async fn load_or_build_index(&self) -> Result<EmbeddingIndex, PipelineError> {
        let path = self.embeddings_path();
        if !path.exists() {
            match &self.config.embedding.backend {
                // Without a remote embedder there is nothing to build from:
                // the user must supply or build the index first.
                EmbeddingBackend::Fallback => {
                    return Err(PipelineError::StageInputMissing {
                        stage: Stage::Retrieve.as_str().to_string(),
                        path: path.display().to_string(),
                    })
                }
                EmbeddingBackend::Remote { .. } => {
                    build_index(&self.store, &self.config.embedding, &path).await?;
                }
            }
        }
        let index = EmbeddingIndex::read_mfei(&path)?;
        index.validate_against(&self.store)?;
        Ok(index)
    }

    /// Embeds every claim and retrieves its top-k most similar articles.
    async fn stage_retrieve(&self) -> Result<StageCounts, PipelineError> {
        let claims_path = self.require_input(Stage::Retrieve, Stage::Claims.output_file())?;
        let claims: Vec<Claim> = read_jsonl(&claims_path, CLAIMS_SCHEMA)?;
        let index = self.load_or_build_index().await?;
        // Fallback queries must match the index dimension, whatever the
        // index was built at; remote queries are whatever the service says.
        let query_embedder = match &self.config.embedding.backend {
            EmbeddingBackend::Fallback => Embedder::Fallback { dim: index.dim() },
            EmbeddingBackend::Remote { .. } => embedder_for(&self.config.embedding),
        };

        let mut pairs: Vec<PairRecord> = Vec::new();
        let mut errors: Vec<ErrorRecord> = Vec::new();
        let mut retrieved_claims = 0u64;
        for claim in &claims {
            let query = match query_embedder.embed(&claim.text).await {
                Ok(query) => query,
                Err(err) => {
                    errors.push(ErrorRecord {
                        unit: claim.id.clone(),
                        message: err.to_string(),
                    });
                    continue;
                }
            };
            let neighbors = top_k(&index, &query, self.config.k)?;
            retrieved_claims += 1;
            for (pmid, cosine) in neighbors {
                pairs.push(PairRecord {
                    claim_id: claim.id.clone(),
                    pmid,
                    cosine,
                    is_source_article: pmid == claim.source_pmid,
                });
            }
        }

        write_jsonl(&self.stage_path("pairs.jsonl"), PAIRS_SCHEMA, &pairs)?;
        self.write_errors(Stage::Retrieve, &errors)?;
        let mut extra = BTreeMap::new();
        extra.insert("pairs".to_string(), pairs.len() as u64);
        Ok(StageCounts {
            inputs: claims.len() as u64,
            outputs: retrieved_claims,
            dropped: 0,
            errors: errors.len() as u64,
            extra,
            ..StageCounts::default()
        })
    }

    // -- screen --------------------------------------------------------

    /// Runs the screening verifier over every retrieved pair.
    async fn stage_screen(&self) -> Result<StageCounts, PipelineError> {
        let claims_path = self.require_input(Stage::Screen, Stage::Claims.output_file())?;
        let pairs_path = self.require_input(Stage::Screen, Stage::Retrieve.output_file())?;
        let claims: Vec<Claim> = read_jsonl(&claims_path, CLAIMS_SCHEMA)?;
        let pairs: Vec<PairRecord> = read_jsonl(&pairs_path, PAIRS_SCHEMA)?;
        let claim_by_id: HashMap<&str, &Claim> =
            claims.iter().map(|c| (c.id.as_str(), c)).collect();
        let role = &self.config.roles.screener;

        let mut requests = Vec::with_capacity(pairs.len());
        for pair in &pairs {
            let claim = claim_by_id.get(pair.claim_id.as_str()).ok_or_else(|| {
                PipelineError::Corrupt {
                    path: pairs_path.display().to_string(),
                    message: format!("pair references unknown claim {}", pair.claim_id),
                }
            })?;
            let article = self.store.get(pair.pmid).ok_or_else(|| {
                PipelineError::Corrupt {
                    path: pairs_path.display().to_string(),
                    message: format!("pair references article {} absent from the store", pair.pmid),
                }
            })?;
            requests.push(verification_request(
                &role.model,
                role.temperature,
                &claim.text,
                article,
            ));
        }

        let checkpoint = self.checkpoint_path(Stage::Screen);
        let results = self
            .gateway
            .complete_batch(&requests, self.config.gateway.parallelism, Some(&checkpoint))
            .await?;

        let mut records: Vec<VerdictRecord> = Vec::new();
        let mut errors: Vec<ErrorRecord> = Vec::new();
        let mut scored = 0u64;
        let mut unscorable = 0u64;
        for (pair, result) in pairs.iter().zip(results) {
            match result {
                Ok(response) => match verdict_from_response(&response.content) {
                    VerdictOutcome::Scored(report) => {
                        scored += 1;
                        records.push(VerdictRecord {
                            claim_id: pair.claim_id.clone(),
                            pmid: pair.pmid,
                            outcome: OutcomeKind::Scored,
                            score: Some(report.score()),
                            rationale: Some(report.rationale().to_string()),
                            error: None,
                        });
                    }
                    VerdictOutcome::Unscorable { error, .. } => {
                        unscorable += 1;
                        records.push(VerdictRecord {
                            claim_id: pair.claim_id.clone(),
                            pmid: pair.pmid,
                            outcome: OutcomeKind::Unscorable,
                            score: None,
                            rationale: None,
                            error: Some(error.to_string()),
                        });
                    }
                },
                Err(err) => errors.push(ErrorRecord {
                    unit: format!("{}:{}", pair.claim_id, pair.pmid),
                    message: err.to_string(),
                }),
            }
        }

        write_jsonl(&self.stage_path("verdicts.jsonl"), VERDICTS_SCHEMA, &records)?;
        self.write_errors(Stage::Screen, &errors)?;
        Ok(StageCounts {
            inputs: pairs.len() as u64,
            outputs: scored,
            dropped: unscorable,
            errors: errors.len() as u64,
            ..StageCounts::default()
        })
    }

    // -- panel ---------------------------------------------------------

    /// Sends every scored pair of every controversial claim to the full
    /// three-member panel.
    async fn stage_panel(&self) -> Result<StageCounts, PipelineError> {
        let claims_path = self.require_input(Stage::Panel, Stage::Claims.output_file())?;
        let verdicts_path = self.require_input(Stage::Panel, Stage::Screen.output_file())?;
        let claims: Vec<Claim> = read_jsonl(&claims_path, CLAIMS_SCHEMA)?;
        let verdicts: Vec<VerdictRecord> = read_jsonl(&verdicts_path, VERDICTS_SCHEMA)?;
        let claim_by_id: HashMap<&str, &Claim> =
            claims.iter().map(|c| (c.id.as_str(), c)).collect();
        let controversial = controversial_claims(&verdicts);

        // Pair-major, role-minor: each controversial scored pair expands to
        // one request per panel member, in panel order.
        let mut units: Vec<(String, u64, u8)> = Vec::new();
        let mut requests: Vec<ChatRequest> = Vec::new();
        let mut controversial_pairs = 0u64;
        for record in &verdicts {
            if record.outcome != OutcomeKind::Scored || !controversial.contains(&record.claim_id) {
                continue;
            }
            let claim = claim_by_id.get(record.claim_id.as_str()).ok_or_else(|| {
                PipelineError::Corrupt {
                    path: verdicts_path.display().to_string(),
                    message: format!("verdict references unknown claim {}", record.claim_id),
                }
            })?;
            let article = self.store.get(record.pmid).ok_or_else(|| {
                PipelineError::Corrupt {
                    path: verdicts_path.display().to_string(),
                    message: format!(
                        "verdict references article {} absent from the store",
                        record.pmid
                    ),
                }
            })?;
            controversial_pairs += 1;
            for (role_idx, member) in self.config.roles.panel.iter().enumerate() {
                units.push((record.claim_id.clone(), record.pmid, role_idx as u8));
                requests.push(verification_request(
                    &member.model,
                    member.temperature,
                    &claim.text,
                    article,
                ));
            }
        }

        let checkpoint = self.checkpoint_path(Stage::Panel);
        let results = self
            .gateway
            .complete_batch(&requests, self.config.gateway.parallelism, Some(&checkpoint))
            .await?;

        let mut records: Vec<PanelRecord> = Vec::new();
        let mut errors: Vec<ErrorRecord> = Vec::new();
        let mut scored = 0u64;
        let mut unscorable = 0u64;
        for ((claim_id, pmid, role_idx), result) in units.iter().zip(results) {
            let model_id = self.config.roles.panel[*role_idx as usize].model.clone();
            match result {
                Ok(response) => match verdict_from_response(&response.content) {
                    VerdictOutcome::Scored(report) => {
                        scored += 1;
                        records.push(PanelRecord {
                            claim_id: claim_id.clone(),
                            pmid: *pmid,
                            role: *role_idx,
                            model_id,
                            outcome: OutcomeKind::Scored,
                            score: Some(report.score()),
                            rationale: Some(report.rationale().to_string()),
                            error: None,
                        });
                    }
                    VerdictOutcome::Unscorable { error, .. } => {
                        unscorable += 1;
                        records.push(PanelRecord {
                            claim_id: claim_id.clone(),
                            pmid: *pmid,
                            role: *role_idx,
                            model_id,
                            outcome: OutcomeKind::Unscorable,
                            score: None,
                            rationale: None,
                            error: Some(error.to_string()),
                        });
                    }
                },
                Err(err) => errors.push(ErrorRecord {
                    unit: format!("{claim_id}:{pmid}:{role_idx}"),
                    message: err.to_string(),
                }),
            }
        }

        write_jsonl(&self.stage_path("panel.jsonl"), PANEL_SCHEMA, &records)?;
        self.write_errors(Stage::Panel, &errors)?;
        let mut extra = BTreeMap::new();
        extra.insert("controversial_claims".to_string(), controversial.len() as u64);
        extra.insert("controversial_pairs".to_string(), controversial_pairs);
        Ok(StageCounts {
            inputs: units.len() as u64,
            outputs: scored,
            dropped: unscorable,
            errors: errors.len() as u64,
            extra,
            ..StageCounts::default()
        })
    }

    // -- assemble ------------------------------------------------------

    /// Turns scored pairs into training instances: panel consensus for
    /// controversial claims, the screener's verdict for the rest.
    fn stage_assemble(&self) -> Result<StageCounts, PipelineError> {
        let claims_path = self.require_input(Stage::Assemble, Stage::Claims.output_file())?;
        let verdicts_path = self.require_input(Stage::Assemble, Stage::Screen.output_file())?;
        let panel_path = self.require_input(Stage::Assemble, Stage::Panel.output_file())?;
        let claims: Vec<Claim> = read_jsonl(&claims_path, CLAIMS_SCHEMA)?;
        let verdicts: Vec<VerdictRecord> = read_jsonl(&verdicts_path, VERDICTS_SCHEMA)?;
        let panel_records: Vec<PanelRecord> = read_jsonl(&panel_path, PANEL_SCHEMA)?;
        let claim_by_id: HashMap<&str, &Claim> =
            claims.iter().map(|c| (c.id.as_str(), c)).collect();
        let controversial = controversial_claims(&verdicts);

        let mut panel_by_pair: HashMap<(String, u64), [Option<&PanelRecord>; 3]> = HashMap::new();
        for record in &panel_records {
            if record.role > 2 {
                return Err(PipelineError::Corrupt {
                    path: panel_path.display().to_string(),
                    message: format!("panel role {} out of range", record.role),
                });
            }
            panel_by_pair
                .entry((record.claim_id.clone(), record.pmid))
                .or_default()[record.role as usize] = Some(record);
        }

        let mut instances: Vec<TrainingInstance> = Vec::new();
        let mut dropped: Vec<DroppedRecord> = Vec::new();
        let mut scored_pairs = 0u64;
        for record in &verdicts {
            if record.outcome != OutcomeKind::Scored {
                continue;
            }
            scored_pairs += 1;
            let unit = format!("{}:{}", record.claim_id, record.pmid);
            let claim = claim_by_id.get(record.claim_id.as_str()).ok_or_else(|| {
                PipelineError::Corrupt {
                    path: verdicts_path.display().to_string(),
                    message: format!("verdict references unknown claim {}", record.claim_id),
                }
            })?;
            let article = self.store.get(record.pmid).ok_or_else(|| {
                PipelineError::Corrupt {
                    path: verdicts_path.display().to_string(),
                    message: format!(
                        "verdict references article {} absent from the store",
                        record.pmid
                    ),
                }
            })?;

            if !controversial.contains(&record.claim_id) {
                let report = report_from_parts(
                    &verdicts_path,
                    &unit,
                    record.score,
                    record.rationale.as_deref(),
                )?;
                instances.push(instance_from_screener(claim, article, &report));
                continue;
            }

            let slots = panel_by_pair
                .get(&(record.claim_id.clone(), record.pmid))
                .copied()
                .unwrap_or([None, None, None]);
            let mut panel: Vec<PanelOutcome> = Vec::with_capacity(3);
            for (role_idx, slot) in slots.iter().enumerate() {
                let fallback_model = self.config.roles.panel[role_idx].model.clone();
                let outcome = match slot {
                    Some(rec) if rec.outcome == OutcomeKind::Scored => {
                        let report = report_from_parts(
                            &panel_path,
                            &format!("{unit}:{role_idx}"),
                            rec.score,
                            rec.rationale.as_deref(),
                        )?;
                        PanelOutcome::Scored(PanelVerdict {
                            model_id: rec.model_id.clone(),
                            report,
                        })
                    }
                    Some(rec) => PanelOutcome::Unscorable {
                        model_id: rec.model_id.clone(),
                    },
                    // A panel call that never returned (gateway failure)
                    // leaves the pair without three scores.
                    None => PanelOutcome::Unscorable {
                        model_id: fallback_model,
                    },
                };
                panel.push(outcome);
            }
            let panel: [PanelOutcome; 3] = panel.try_into().expect("exactly three roles");
            let seed = assembly_seed(self.config.seed, &record.claim_id, record.pmid);
            match assemble_instance(claim, article, &panel, seed) {
                Ok(instance) => instances.push(instance),
                Err(reason) => dropped.push(DroppedRecord {
                    claim_id: record.claim_id.clone(),
                    pmid: record.pmid,
                    reason: reason.as_str().to_string(),
                }),
            }
        }

        write_jsonl(&self.stage_path("instances.jsonl"), INSTANCES_SCHEMA, &instances)?;
        write_jsonl(&self.stage_path("dropped.jsonl"), DROPPED_SCHEMA, &dropped)?;
        Ok(StageCounts {
            inputs: scored_pairs,
            outputs: instances.len() as u64,
            dropped: dropped.len() as u64,
            errors: 0,
            ..StageCounts::default()
        })
    }
}
