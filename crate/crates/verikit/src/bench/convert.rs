//! Thin adapters from upstream dataset files to the normalized benchmark
//! format. Each adapter documents the exact field mapping it freezes; the
//! evaluator itself never sees upstream formats.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{flatten_medaesqa, map_qa_answer, question_to_claim, BenchError, BenchInstance, MedAesQaRecord};
use crate::corpus::ArticleStore;
use crate::gateway::Gateway;
use crate::verdict::ThreeWayLabel;

/// A converted dataset plus the number of upstream records it had to drop
/// (and why, keyed by a short reason tag).
#[derive(Debug, Clone, Default)]
pub struct ConvertOutcome {
    pub instances: Vec<BenchInstance>,
    pub dropped: BTreeMap<String, u64>,
}

impl ConvertOutcome {
    fn drop_one(&mut self, reason: &str) {
        *self.dropped.entry(reason.to_owned()).or_insert(0) += 1;
    }

    pub fn dropped_total(&self) -> u64 {
        self.dropped.values().sum()
    }
}

fn read_text(path: &Path) -> Result<String, BenchError> {
    fs::read_to_string(path).map_err(|e| BenchError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn schema_err(path: &Path, message: impl std::fmt::Display) -> BenchError {
    BenchError::Schema {
        location: path.display().to_string(),
        message: message.to_string(),
    }
}

// --- scientific-claim files: claims JSONL + corpus JSONL ---------------

/// Claim line: `{"id", "claim", "evidence": {doc_id: [{"label": "SUPPORT" |
/// "CONTRADICT", …}]}, "cited_doc_ids": [doc_id]}`.
#[derive(Deserialize)]
struct SciFactClaim {
    claim: String,
    #[serde(default)]
    evidence: BTreeMap<String, Vec<SciFactEvidence>>,
    #[serde(default)]
    cited_doc_ids: Vec<u64>,
}

#[derive(Deserialize)]
struct SciFactEvidence {
    label: String,
}

/// Corpus line: `{"doc_id", "title", "abstract": [sentence, …]}`.
#[derive(Deserialize)]
struct SciFactDoc {
    doc_id: u64,
    title: String,
    #[serde(rename = "abstract")]
    abstract_sentences: Vec<String>,
}

/// Converts a claims file + corpus file. One instance per cited document:
/// gold is SUPPORT/CONTRADICT from that document's first evidence label,
/// or NEI when the document carries no evidence for the claim. Cited
/// documents missing from the corpus are dropped.
pub fn convert_scifact(claims_path: &Path, corpus_path: &Path) -> Result<ConvertOutcome, BenchError> {
    let mut docs: BTreeMap<u64, SciFactDoc> = BTreeMap::new();
    for (i, line) in read_text(corpus_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: SciFactDoc = serde_json::from_str(line)
            .map_err(|e| schema_err(corpus_path, format!("line {}: {e}", i + 1)))?;
        docs.insert(doc.doc_id, doc);
    }

    let mut out = ConvertOutcome::default();
    for (i, line) in read_text(claims_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let claim: SciFactClaim = serde_json::from_str(line)
            .map_err(|e| schema_err(claims_path, format!("line {}: {e}", i + 1)))?;
        for doc_id in &claim.cited_doc_ids {
            let Some(doc) = docs.get(doc_id) else {
                out.drop_one("missing-doc");
                continue;
            };
            let gold = match claim.evidence.get(&doc_id.to_string()).and_then(|e| e.first()) {
                Some(ev) if ev.label.eq_ignore_ascii_case("SUPPORT") => ThreeWayLabel::Support,
                Some(ev) if ev.label.eq_ignore_ascii_case("CONTRADICT") => {
                    ThreeWayLabel::Contradict
                }
                Some(ev) => {
                    return Err(schema_err(
                        claims_path,
                        format!("line {}: unknown evidence label {:?}", i + 1, ev.label),
                    ))
                }
                None => ThreeWayLabel::Nei,
            };
            out.instances.push(BenchInstance {
                dataset: "scifact".to_owned(),
                claim: claim.claim.clone(),
                title: doc.title.clone(),
                abstract_text: doc.abstract_sentences.join(" "),
                gold,
                pmid: Some(doc.doc_id),
            });
        }
    }
    Ok(out)
}

// --- claim/evidence CSV ------------------------------------------------

/// Converts a CSV with headered columns `claim`, `evidence`, `label`
/// (labels Supports / Refutes / Neutral, case-insensitive). The evidence
/// text becomes the source abstract; these rows carry no title or PMID.
pub fn convert_healthver(csv_path: &Path) -> Result<ConvertOutcome, BenchError> {
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| schema_err(csv_path, e))?;
    let headers = reader.headers().map_err(|e| schema_err(csv_path, e))?.clone();
    let column = |name: &str| -> Result<usize, BenchError> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| schema_err(csv_path, format!("missing column {name:?}")))
    };
    let claim_col = column("claim")?;
    let evidence_col = column("evidence")?;
    let label_col = column("label")?;

    let mut out = ConvertOutcome::default();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| schema_err(csv_path, format!("row {}: {e}", i + 1)))?;
        let field = |col: usize| record.get(col).unwrap_or("").trim().to_owned();
        let label = field(label_col);
        let gold = match label.to_ascii_lowercase().as_str() {
            "supports" => ThreeWayLabel::Support,
            "refutes" => ThreeWayLabel::Contradict,
            "neutral" => ThreeWayLabel::Nei,
            _ => {
                return Err(schema_err(
                    csv_path,
                    format!("row {}: unknown label {label:?}", i + 1),
                ))
            }
        };
        out.instances.push(BenchInstance {
            dataset: "healthver".to_owned(),
            claim: field(claim_col),
            title: String::new(),
            abstract_text: field(evidence_col),
            gold,
            pmid: None,
        });
    }
    Ok(out)
}

// --- QA with sectioned contexts ----------------------------------------

/// Record shape: a JSON object keyed by record id, each value
/// `{"QUESTION", "CONTEXTS": [text, …], "LABELS": [section, …],
/// "final_decision": "yes"|"no"|"maybe"}`.
#[derive(Deserialize)]
struct PubMedQaRecord {
    #[serde(rename = "QUESTION")]
    question: String,
    #[serde(rename = "CONTEXTS")]
    contexts: Vec<String>,
    #[serde(rename = "LABELS")]
    labels: Vec<String>,
    final_decision: String,
}

/// Converts sectioned QA records: the claim is the question converted to a
/// declarative statement (model-backed), the source is the abstract with
/// its conclusion sections removed, and gold follows yes → support,
/// maybe → NEI, no → contradict. Records without any CONCLUSIONS-labeled
/// section are dropped and counted — there is no conclusion to hide.
pub async fn convert_pubmedqa(
    gateway: &Gateway,
    model: &str,
    temperature: f64,
    path: &Path,
) -> Result<ConvertOutcome, BenchError> {
    let records: BTreeMap<String, PubMedQaRecord> =
        serde_json::from_str(&read_text(path)?).map_err(|e| schema_err(path, e))?;

    let mut out = ConvertOutcome::default();
    for (id, record) in records {
        if record.contexts.len() != record.labels.len() {
            return Err(schema_err(
                path,
                format!("record {id}: CONTEXTS and LABELS lengths differ"),
            ));
        }
        let has_conclusion = record
            .labels
            .iter()
            .any(|l| l.eq_ignore_ascii_case("CONCLUSIONS"));
        if !has_conclusion {
            out.drop_one("no-conclusion-section");
            continue;
        }
        let body: Vec<&str> = record
            .contexts
            .iter()
            .zip(&record.labels)
            .filter(|(_, label)| !label.eq_ignore_ascii_case("CONCLUSIONS"))
            .map(|(text, _)| text.as_str())
            .collect();
        let gold = map_qa_answer(&record.final_decision)?;
        let claim = question_to_claim(gateway, model, temperature, &record.question).await?;
        out.instances.push(BenchInstance {
            dataset: "pubmedqa".to_owned(),
            claim,
            title: String::new(),
            abstract_text: body.join("\n"),
            gold,
            pmid: id.parse().ok(),
        });
    }
    Ok(out)
}

// --- yes/no QA with document links --------------------------------------

/// File shape: `{"questions": [{"type", "body", "exact_answer",
/// "documents": ["…/pubmed/123", …]}]}`; only `type == "yesno"` records
/// are used.
#[derive(Deserialize)]
struct BioAsqFile {
    questions: Vec<BioAsqQuestion>,
}

#[derive(Deserialize)]
struct BioAsqQuestion {
    #[serde(rename = "type")]
    kind: String,
    body: String,
    #[serde(default)]
    exact_answer: Option<serde_json::Value>,
    #[serde(default)]
    documents: Vec<String>,
}

fn trailing_pmid(url: &str) -> Option<u64> {
    url.trim_end_matches('/').rsplit('/').next()?.parse().ok()
}

/// Converts yes/no QA records: claim from question conversion, gold from
/// the exact answer, source from the first linked document that resolves
/// in the store. Non-yes/no questions are ignored; yes/no questions whose
/// documents all miss the store are dropped and counted.
pub async fn convert_bioasq(
    gateway: &Gateway,
    model: &str,
    temperature: f64,
    path: &Path,
    store: &ArticleStore,
) -> Result<ConvertOutcome, BenchError> {
    let file: BioAsqFile = serde_json::from_str(&read_text(path)?).map_err(|e| schema_err(path, e))?;

    let mut out = ConvertOutcome::default();
    for question in file.questions {
        if !question.kind.eq_ignore_ascii_case("yesno") {
            continue;
        }
        let answer = match &question.exact_answer {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(other) => other.to_string(),
            None => {
                out.drop_one("missing-answer");
                continue;
            }
        };
        let gold = map_qa_answer(&answer)?;
        let Some((pmid, article)) = question
            .documents
            .iter()
            .filter_map(|url| trailing_pmid(url))
            .find_map(|pmid| store.get(pmid).map(|a| (pmid, a)))
        else {
            out.drop_one("no-resolvable-document");
            continue;
        };
        let claim = question_to_claim(gateway, model, temperature, &question.body).await?;
        out.instances.push(BenchInstance {
            dataset: "bioasq".to_owned(),
            claim,
            title: article.title.clone(),
            abstract_text: article.abstract_text.clone(),
            gold,
            pmid: Some(pmid),
        });
    }
    Ok(out)
}

// --- statement–citation answers ------------------------------------------

/// Converts a JSON array of answer records (see `flatten_medaesqa` for the
/// record shape) against the article store.
pub fn convert_medaesqa(path: &Path, store: &ArticleStore) -> Result<ConvertOutcome, BenchError> {
    let records: Vec<MedAesQaRecord> =
        serde_json::from_str(&read_text(path)?).map_err(|e| schema_err(path, e))?;
    let mut out = ConvertOutcome::default();
    for record in &records {
        let (instances, dropped) = flatten_medaesqa(record, store)?;
        out.instances.extend(instances);
        for _ in 0..dropped {
            out.drop_one("missing-pmid");
        }
    }
    Ok(out)
}
