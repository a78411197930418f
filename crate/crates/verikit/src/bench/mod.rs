//! The three-way benchmark: a normalized instance format, QA-to-claim
//! repurposing, answer flattening, accuracy evaluation with unweighted
//! macro averaging, and percentile bootstrap confidence intervals.

pub mod convert;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ArticleStore;
use crate::gateway::{ChatRequest, Gateway, GatewayError};
use crate::jsonl::{self, JsonlError};
use crate::prompts;
use crate::verdict::{coarse_label, parse_verification_output, LikertScore, ThreeWayLabel};

/// Schema name of the normalized benchmark JSONL file.
pub const BENCH_SCHEMA: &str = "bench";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("prediction/instance line counts differ: {predictions} vs {instances}")]
    LengthMismatch { predictions: usize, instances: usize },
    #[error("{location}: {message}")]
    Schema { location: String, message: String },
    #[error("QA answer {0:?} is not one of yes/maybe/no")]
    UnknownAnswer(String),
    #[error("model returned an empty claim for question {0:?}")]
    EmptyClaim(String),
    #[error("bootstrap needs a nonempty sample")]
    EmptySample,
    #[error("bootstrap settings invalid: {0}")]
    BadBootstrap(&'static str),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

fn io_err(path: &Path, source: std::io::Error) -> BenchError {
    BenchError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One benchmark row: a claim, its source text, and a three-way gold label.
/// `pmid` is kept when the source dataset identified the article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchInstance {
    pub dataset: String,
    pub claim: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub gold: ThreeWayLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmid: Option<u64>,
}

/// Closed confidence-interval bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiBounds {
    pub lo: f64,
    pub hi: f64,
}

/// Evaluation result: per-dataset accuracy, the unweighted mean of those
/// accuracies, per-dataset counts, and optional bootstrap intervals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub per_dataset_accuracy: BTreeMap<String, f64>,
    pub macro_average: f64,
    pub n: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_dataset_ci: Option<BTreeMap<String, CiBounds>>,
}

/// Bootstrap configuration for interval estimates.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapSettings {
    pub iterations: u64,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapSettings {
    fn default() -> BootstrapSettings {
        BootstrapSettings {
            iterations: 2000,
            level: 0.95,
            seed: 0,
        }
    }
}

/// Maps a yes/no/maybe QA answer (case-insensitive) onto the three-way
/// scale: yes → support, maybe → NEI, no → contradict.
pub fn map_qa_answer(answer: &str) -> Result<ThreeWayLabel, BenchError> {
    match answer.trim().to_ascii_lowercase().as_str() {
        "yes" => Ok(ThreeWayLabel::Support),
        "maybe" => Ok(ThreeWayLabel::Nei),
        "no" => Ok(ThreeWayLabel::Contradict),
        _ => Err(BenchError::UnknownAnswer(answer.to_owned())),
    }
}

/// The chat request that converts a yes/no question into a claim.
pub fn question_request(model: &str, temperature: f64, question: &str) -> ChatRequest {
    ChatRequest::from_pair(model, &prompts::question_conversion(question), temperature)
}

/// Converts a yes/no question into the declarative claim that is true when
/// the answer is "yes".
pub async fn question_to_claim(
    gateway: &Gateway,
    model: &str,
    temperature: f64,
    question: &str,
) -> Result<String, BenchError> {
    let response = gateway
        .complete(&question_request(model, temperature, question))
        .await?;
    let claim = response.content.trim();
    if claim.is_empty() {
        return Err(BenchError::EmptyClaim(question.to_owned()));
    }
    Ok(claim.to_owned())
}

/// Attempts to read a predicted three-way label from one prediction line.
/// Accepted forms: a bare integer score, a JSON string or raw line holding
/// a full two-block verifier answer (or just an integer), or an object with
/// a `score` integer or `raw` text field. Anything else is unparseable and
/// scored as wrong.
pub fn predicted_label(line: &str) -> Option<ThreeWayLabel> {
    match serde_json::from_str::<serde_json::Value>(line.trim()) {
        Ok(serde_json::Value::Number(n)) => {
            n.as_i64().and_then(LikertScore::new).map(coarse_label)
        }
        Ok(serde_json::Value::String(s)) => label_from_text(&s),
        Ok(serde_json::Value::Object(map)) => {
            if let Some(n) = map.get("score").and_then(|v| v.as_i64()) {
                LikertScore::new(n).map(coarse_label)
            } else if let Some(raw) = map.get("raw").and_then(|v| v.as_str()) {
                label_from_text(raw)
            } else {
                None
            }
        }
        _ => label_from_text(line),
    }
}

fn label_from_text(text: &str) -> Option<ThreeWayLabel> {
    if let Ok(report) = parse_verification_output(text) {
        return Some(coarse_label(report.score()));
    }
    text.trim()
        .parse::<i64>()
        .ok()
        .and_then(LikertScore::new)
        .map(coarse_label)
}

fn data_lines(path: &Path) -> Result<Vec<String>, BenchError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines: Vec<String> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && jsonl::is_header_line(line) {
            continue;
        }
        lines.push(line.to_owned());
    }
    Ok(lines)
}

/// Scores a line-aligned prediction file against a benchmark instance file.
/// Unparseable predictions count as wrong; the macro average is the
/// unweighted mean of the per-dataset accuracies.
pub fn evaluate(
    predictions: &Path,
    instances: &Path,
    bootstrap: Option<BootstrapSettings>,
) -> Result<EvalSummary, BenchError> {
    let pred_lines = data_lines(predictions)?;
    let instance_lines = data_lines(instances)?;
    if pred_lines.len() != instance_lines.len() {
        return Err(BenchError::LengthMismatch {
            predictions: pred_lines.len(),
            instances: instance_lines.len(),
        });
    }

    let mut outcomes: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, (pred, line)) in pred_lines.iter().zip(&instance_lines).enumerate() {
        let instance: BenchInstance =
            serde_json::from_str(line).map_err(|e| BenchError::Schema {
                location: format!("{} line {}", instances.display(), i + 1),
                message: e.to_string(),
            })?;
        let correct = predicted_label(pred) == Some(instance.gold);
        outcomes
            .entry(instance.dataset)
            .or_default()
            .push(if correct { 1.0 } else { 0.0 });
    }

    let mut per_dataset_accuracy = BTreeMap::new();
    let mut n = BTreeMap::new();
    let mut per_dataset_ci = BTreeMap::new();
    for (tag, values) in &outcomes {
        let accuracy = values.iter().sum::<f64>() / values.len() as f64;
        per_dataset_accuracy.insert(tag.clone(), accuracy);
        n.insert(tag.clone(), values.len() as u64);
        if let Some(settings) = bootstrap {
            let (lo, hi) = bootstrap_ci(
                values,
                settings.iterations,
                settings.level,
                crate::derive_seed(settings.seed, tag),
            )?;
            per_dataset_ci.insert(tag.clone(), CiBounds { lo, hi });
        }
    }
    let macro_average = if per_dataset_accuracy.is_empty() {
        0.0
    } else {
        per_dataset_accuracy.values().sum::<f64>() / per_dataset_accuracy.len() as f64
    };
    Ok(EvalSummary {
        per_dataset_accuracy,
        macro_average,
        n,
        per_dataset_ci: bootstrap.map(|_| per_dataset_ci),
    })
}

/// Percentile bootstrap interval for the mean: resample n-with-replacement
/// `iterations` times (seeded), sort the resample means, and take the
/// nearest-rank percentiles at (1−level)/2 and 1−(1−level)/2.
pub fn bootstrap_ci(
    values: &[f64],
    iterations: u64,
    level: f64,
    seed: u64,
) -> Result<(f64, f64), BenchError> {
    if values.is_empty() {
        return Err(BenchError::EmptySample);
    }
    if iterations == 0 {
        return Err(BenchError::BadBootstrap("iterations must be at least 1"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(BenchError::BadBootstrap("level must be inside (0, 1)"));
    }
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(iterations as usize);
    for _ in 0..iterations {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += values[rng.random_range(0..n)];
        }
        means.push(sum / n as f64);
    }
    means.sort_by(|a, b| a.total_cmp(b));
    let lo_q = (1.0 - level) / 2.0;
    Ok((nearest_rank(&means, lo_q), nearest_rank(&means, 1.0 - lo_q)))
}

/// Nearest-rank percentile: the value at 1-based rank ⌈q·N⌉, clamped.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = (q * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Writes instances to the normalized benchmark JSONL file.
pub fn write_instances(path: &Path, instances: &[BenchInstance]) -> Result<(), BenchError> {
    jsonl::write_jsonl(path, BENCH_SCHEMA, instances).map_err(BenchError::from)
}

/// Reads a normalized benchmark JSONL file (header required).
pub fn read_instances(path: &Path) -> Result<Vec<BenchInstance>, BenchError> {
    jsonl::read_jsonl(path, BENCH_SCHEMA).map_err(BenchError::from)
}

/// Flattens one answer record into per-(statement, PMID) instances.
///
/// The record shape is frozen as
/// `{"answer_id": …, "statements": [{"statement": …, "citations":
/// [{"pmid": …, "label": …}]}]}` with labels supporting / contradicting /
/// neutral / not relevant. Bracketed citation markers such as `[3]` or
/// `[1, 2]` are stripped from statement text; citations whose PMID is
/// missing from the store are dropped and counted.
pub fn flatten_medaesqa(
    record: &MedAesQaRecord,
    store: &ArticleStore,
) -> Result<(Vec<BenchInstance>, u64), BenchError> {
    let mut instances = Vec::new();
    let mut dropped = 0;
    for statement in &record.statements {
        let claim = strip_citation_markers(&statement.statement);
        for citation in &statement.citations {
            let gold = medaesqa_label(&citation.label).ok_or_else(|| BenchError::Schema {
                location: format!("answer {}", record.answer_id),
                message: format!("unknown citation label {:?}", citation.label),
            })?;
            let Some(article) = store.get(citation.pmid) else {
                dropped += 1;
                continue;
            };
            instances.push(BenchInstance {
                dataset: "medaesqa".to_owned(),
                claim: claim.clone(),
                title: article.title.clone(),
                abstract_text: article.abstract_text.clone(),
                gold,
                pmid: Some(citation.pmid),
            });
        }
    }
    Ok((instances, dropped))
}

fn medaesqa_label(label: &str) -> Option<ThreeWayLabel> {
    match label.trim().to_ascii_lowercase().as_str() {
        "supporting" => Some(ThreeWayLabel::Support),
        "contradicting" => Some(ThreeWayLabel::Contradict),
        "neutral" | "not relevant" | "not_relevant" => Some(ThreeWayLabel::Nei),
        _ => None,
    }
}

/// Removes bracketed citation markers (`[3]`, `[1, 2]`) and the whitespace
/// that preceded them.
pub fn strip_citation_markers(text: &str) -> String {
    static MARKER: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    let marker = MARKER.get_or_init(|| {
        regex::Regex::new(r"\s*\[[0-9]+(?:\s*,\s*[0-9]+)*\]").expect("marker pattern compiles")
    });
    marker.replace_all(text, "").into_owned()
}

/// One answer in the flattening input: statements with per-citation labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MedAesQaRecord {
    pub answer_id: String,
    pub statements: Vec<MedAesQaStatement>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MedAesQaStatement {
    pub statement: String,
    pub citations: Vec<MedAesQaCitation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MedAesQaCitation {
    pub pmid: u64,
    pub label: String,
}
