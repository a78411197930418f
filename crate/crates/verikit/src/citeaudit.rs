//! Citation auditing for generated answers: extract claim–citation pairs
//! from a model's answer, normalize the citation across styles, resolve it
//! to a PMID, verify the claim against the resolved article, and compute
//! per-answer attribution metrics with bootstrap intervals.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{bootstrap_ci, BenchError, BootstrapSettings, CiBounds};
use crate::corpus::ArticleStore;
use crate::gateway::{Gateway, GatewayError, RoleSpec};
use crate::prompts;
use crate::verdict::{is_supported, parse_verification_output, LikertScore};

#[derive(Debug, Error)]
pub enum CiteError {
    #[error("no JSON array of claim objects found in extraction output")]
    JsonMissing,
    #[error("extraction array element {index}: {message}")]
    Schema { index: usize, message: String },
    #[error("no identifier found in citation {0:?}")]
    NoIdentifier(String),
    #[error("cannot compute metrics over an empty audit")]
    EmptySet,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

/// The citation instruction a run was generated under. The hint drives
/// normalization and resolution; it is configuration, not detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CitationStyle {
    Nlm,
    Ama,
    Vancouver,
    Apa,
    Mla,
    Pmid,
    Doi,
    Unknown,
}

impl CitationStyle {
    pub const ALL: [CitationStyle; 8] = [
        CitationStyle::Nlm,
        CitationStyle::Ama,
        CitationStyle::Vancouver,
        CitationStyle::Apa,
        CitationStyle::Mla,
        CitationStyle::Pmid,
        CitationStyle::Doi,
        CitationStyle::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CitationStyle::Nlm => "nlm",
            CitationStyle::Ama => "ama",
            CitationStyle::Vancouver => "vancouver",
            CitationStyle::Apa => "apa",
            CitationStyle::Mla => "mla",
            CitationStyle::Pmid => "pmid",
            CitationStyle::Doi => "doi",
            CitationStyle::Unknown => "unknown",
        }
    }
}

impl fmt::Display for CitationStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CitationStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<CitationStyle, String> {
        CitationStyle::ALL
            .into_iter()
            .find(|style| style.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown citation style {s:?}"))
    }
}

/// One extracted claim together with the citation text it came with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimCitation {
    pub claim: String,
    pub citation: String,
    pub style_hint: CitationStyle,
}

/// How a citation resolved (or failed to).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MappingStatus {
    Mapped { pmid: u64 },
    Unmapped { reason: String },
}

/// Which resolution path was attempted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingMethod {
    Direct,
    CitationMatcher,
    IdConverter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmidMapping {
    #[serde(flatten)]
    pub status: MappingStatus,
    pub method: MappingMethod,
    /// Every candidate the citation matcher returned, rank order kept.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<u64>,
}

impl PmidMapping {
    fn mapped(pmid: u64, method: MappingMethod) -> PmidMapping {
        PmidMapping {
            status: MappingStatus::Mapped { pmid },
            method,
            candidates: Vec::new(),
        }
    }

    fn unmapped(reason: &str, method: MappingMethod) -> PmidMapping {
        PmidMapping {
            status: MappingStatus::Unmapped {
                reason: reason.to_owned(),
            },
            method,
            candidates: Vec::new(),
        }
    }

    pub fn pmid(&self) -> Option<u64> {
        match self.status {
            MappingStatus::Mapped { pmid } => Some(pmid),
            MappingStatus::Unmapped { .. } => None,
        }
    }
}

/// One audited claim–citation pair. `verdict` is present exactly when the
/// citation mapped to a PMID, the article was in the store, and the
/// verification output parsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub answer_id: String,
    pub claim: String,
    pub citation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<String>,
    pub mapping: PmidMapping,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<LikertScore>,
}

// --- extraction-output parsing -------------------------------------------

/// Extracts the claims array from raw model output: code fences are
/// stripped, prose before or after the array is tolerated, and the first
/// JSON array whose elements are all objects wins. Each object must carry
/// nonempty `claim` and `citation` strings; duplicate claims with distinct
/// citations are kept as separate pairs.
pub fn parse_extraction_json(
    output: &str,
    style_hint: CitationStyle,
) -> Result<Vec<ClaimCitation>, CiteError> {
    let body = strip_code_fence(output);
    let array = first_object_array(body).ok_or(CiteError::JsonMissing)?;
    let mut pairs = Vec::with_capacity(array.len());
    for (index, element) in array.iter().enumerate() {
        let object = element.as_object().expect("scan admits only object arrays");
        let field = |key: &str| -> Result<String, CiteError> {
            let value = object
                .get(key)
                .and_then(|v| v.as_str())
                .map(str::trim)
                .unwrap_or("");
            if value.is_empty() {
                return Err(CiteError::Schema {
                    index,
                    message: format!("missing or empty {key:?}"),
                });
            }
            Ok(value.to_owned())
        };
        pairs.push(ClaimCitation {
            claim: field("claim")?,
            citation: field("citation")?,
            style_hint,
        });
    }
    Ok(pairs)
}

/// Returns the inside of the first fenced block when one exists, else the
/// whole text. The fence's language tag line is dropped.
fn strip_code_fence(text: &str) -> &str {
    let Some(open) = text.find("```") else {
        return text;
    };
    let after_fence = &text[open + 3..];
    let body_start = after_fence.find('\n').map(|i| i + 1).unwrap_or(0);
    let body = &after_fence[body_start..];
    match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

/// Scans '[' positions for the first parseable JSON array whose elements
/// are all objects; trailing text after the array is ignored.
fn first_object_array(text: &str) -> Option<Vec<serde_json::Value>> {
    for (pos, _) in text.match_indices('[') {
        let mut stream = serde_json::Deserializer::from_str(&text[pos..]).into_iter();
        if let Some(Ok(serde_json::Value::Array(items))) = stream.next() {
            if items.iter().all(|v| v.is_object()) {
                return Some(items);
            }
        }
    }
    None
}

// --- citation normalization ------------------------------------------------

/// Normalizes a citation per its style hint: text styles lose leading
/// enumeration ("3.", "[12]", "12)") and trailing ".;," to fixpoint; the
/// PMID hint extracts the bare digit string; the DOI hint extracts the
/// `10.xxxx/…` token. Idempotent for every hint.
pub fn normalize_citation(raw: &str, style_hint: CitationStyle) -> Result<String, CiteError> {
    match style_hint {
        CitationStyle::Pmid => normalize_pmid(raw),
        CitationStyle::Doi => normalize_doi(raw),
        _ => normalize_text(raw),
    }
}

fn normalize_text(raw: &str) -> Result<String, CiteError> {
    static ENUMERATION: OnceLock<Regex> = OnceLock::new();
    let enumeration = ENUMERATION.get_or_init(|| {
        Regex::new(r"^(?:\[[0-9]+\]|\([0-9]+\)|[0-9]+[.)])\s*")
            .expect("enumeration pattern compiles")
    });
    let mut s = raw.trim().to_owned();
    loop {
        let next = enumeration.replace(&s, "").trim_start().to_owned();
        if next == s {
            break;
        }
        s = next;
    }
    loop {
        let next = s.trim_end_matches(['.', ';', ',']).trim_end().to_owned();
        if next == s {
            break;
        }
        s = next;
    }
    if s.is_empty() {
        return Err(CiteError::NoIdentifier(raw.to_owned()));
    }
    Ok(s)
}

fn normalize_pmid(raw: &str) -> Result<String, CiteError> {
    let trimmed = raw.trim();
    // A bare digit string is already normalized — this anchors idempotence.
    if !trimmed.is_empty() && trimmed.bytes().all(|b| b.is_ascii_digit()) {
        return Ok(trimmed.to_owned());
    }
    static MARKED: OnceLock<Regex> = OnceLock::new();
    let marked = MARKED
        .get_or_init(|| Regex::new(r"(?i)pmid[\s:.#]*([0-9]+)").expect("pmid pattern compiles"));
    if let Some(captures) = marked.captures(trimmed) {
        return Ok(captures[1].to_owned());
    }
    // Without a marker, accept only a 6–9 digit run: shorter runs collide
    // with years and page numbers.
    static RUN: OnceLock<Regex> = OnceLock::new();
    let run =
        RUN.get_or_init(|| Regex::new(r"\b[0-9]{6,9}\b").expect("digit-run pattern compiles"));
    match run.find(trimmed) {
        Some(m) => Ok(m.as_str().to_owned()),
        None => Err(CiteError::NoIdentifier(raw.to_owned())),
    }
}

fn normalize_doi(raw: &str) -> Result<String, CiteError> {
    static DOI: OnceLock<Regex> = OnceLock::new();
    let doi =
        DOI.get_or_init(|| Regex::new(r"10\.[0-9]{4,9}/\S+").expect("doi pattern compiles"));
    let found = doi
        .find(raw)
        .ok_or_else(|| CiteError::NoIdentifier(raw.to_owned()))?;
    let mut candidate = found.as_str();
    loop {
        let Some(last) = candidate.chars().last() else {
            return Err(CiteError::NoIdentifier(raw.to_owned()));
        };
        let strip = match last {
            '.' | ',' | ';' | ':' | '"' | '\'' => true,
            // Closers are stripped only when unbalanced: DOIs legitimately
            // end in parenthesized suffixes like "…/0529(2000)".
            ')' => count(candidate, ')') > count(candidate, '('),
            ']' => count(candidate, ']') > count(candidate, '['),
            '}' => count(candidate, '}') > count(candidate, '{'),
            _ => false,
        };
        if !strip {
            break;
        }
        candidate = &candidate[..candidate.len() - last.len_utf8()];
    }
    if candidate.is_empty() {
        return Err(CiteError::NoIdentifier(raw.to_owned()));
    }
    Ok(candidate.to_owned())
}

fn count(haystack: &str, needle: char) -> usize {
    haystack.chars().filter(|c| *c == needle).count()
}

// --- resolution clients ------------------------------------------------------

fn flexible_u64(value: &serde_json::Value) -> Option<u64> {
    match value {
        serde_json::Value::Number(n) => n.as_u64(),
        serde_json::Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Free-text citation → ranked PMID candidates.
/// Wire contract of the HTTP adapter: `POST {base}/api/citmatch` with body
/// `{"method": "heuristic", "raw-text": citation}`, response
/// `{"result": {"uids": [{"pubmed": "123"}, …]}}` (string or number ids).
#[derive(Debug, Clone)]
pub enum MatcherClient {
    Http(HttpResolver),
    Scripted(ScriptedMatcher),
    /// No service available: every lookup fails as a recorded service error
    /// rather than stopping the audit.
    Unconfigured,
}

impl MatcherClient {
    pub async fn candidates(&self, citation: &str) -> Result<Vec<u64>, String> {
        match self {
            MatcherClient::Http(resolver) => resolver.citmatch(citation).await,
            MatcherClient::Scripted(script) => script.candidates(citation),
            MatcherClient::Unconfigured => {
                Err("no citation-matcher service configured".to_string())
            }
        }
    }
}

/// DOI → PMID. Wire contract of the HTTP adapter:
/// `GET {base}/idconv/v1.0/?ids={doi}&format=json`, response
/// `{"records": [{"pmid": "123", …}]}`; a record without a pmid key (or no
/// records) means no match.
#[derive(Debug, Clone)]
pub enum IdConvClient {
    Http(HttpResolver),
    Scripted(ScriptedIdConv),
    /// No service available: every lookup fails as a recorded service error
    /// rather than stopping the audit.
    Unconfigured,
}

impl IdConvClient {
    pub async fn pmid_for_doi(&self, doi: &str) -> Result<Option<u64>, String> {
        match self {
            IdConvClient::Http(resolver) => resolver.idconv(doi).await,
            IdConvClient::Scripted(script) => script.pmid_for_doi(doi),
            IdConvClient::Unconfigured => {
                Err("no identifier-converter service configured".to_string())
            }
        }
    }
}

/// Shared HTTP plumbing for both bibliographic services.
#[derive(Debug, Clone)]
pub struct HttpResolver {
    client: reqwest::Client,
    base_url: String,
}

impl HttpResolver {
    pub fn new(base_url: impl Into<String>) -> Result<HttpResolver, String> {
        let client = reqwest::Client::builder()
            .timeout(std::time::Duration::from_secs(30))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(HttpResolver {
            client,
            base_url: base_url.into().trim_end_matches('/').to_owned(),
        })
    }

    async fn citmatch(&self, citation: &str) -> Result<Vec<u64>, String> {
        let url = format!("{}/api/citmatch", self.base_url);
        let body = serde_json::json!({"method": "heuristic", "raw-text": citation});
        let response = self
            .client
            .post(&url)
            .json(&body)
            .send()
            .await
            .map_err(|e| e.to_string())?;
        if !response.status().is_success() {
            return Err(format!("HTTP {} from {url}", response.status()));
        }
        let value: serde_json::Value = response.json().await.map_err(|e| e.to_string())?;
        let uids = value
            .pointer("/result/uids")
            .and_then(|v| v.as_array())
            .cloned()
            .unwrap_or_default();
        Ok(uids
            .iter()
            .filter_map(|uid| uid.get("pubmed").and_then(flexible_u64))
            .collect())
    }

    async fn idconv(&self, doi: &str) -> Result<Option<u64>, String> {
        let url = format!("{}/idconv/v1.0/", self.base_url);
        let response = self
            .client
            .get(&url)
            .query(&[("ids", doi), ("format", "json")])
            .send()
            .await
            .map_err(|e| e.to_string())?;
        if !response.status().is_success() {
            return Err(format!("HTTP {} from {url}", response.status()));
        }
        let value: serde_json::Value = response.json().await.map_err(|e| e.to_string())?;
        Ok(value
            .pointer("/records/0/pmid")
            .and_then(flexible_u64))
    }
}

/// Scripted matcher for offline runs: exact citation → candidate list,
/// plus a set of citations that simulate a service failure.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct ScriptedMatcher {
    #[serde(default)]
    pub map: HashMap<String, Vec<u64>>,
    #[serde(default)]
    pub errors: HashSet<String>,
}

impl ScriptedMatcher {
    fn candidates(&self, citation: &str) -> Result<Vec<u64>, String> {
        if self.errors.contains(citation) {
            return Err(format!("scripted failure for {citation:?}"));
        }
        Ok(self.map.get(citation).cloned().unwrap_or_default())
    }
}

/// Scripted DOI converter: exact DOI → PMID, plus simulated failures.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct ScriptedIdConv {
    #[serde(default)]
    pub map: HashMap<String, u64>,
    #[serde(default)]
    pub errors: HashSet<String>,
}

impl ScriptedIdConv {
    fn pmid_for_doi(&self, doi: &str) -> Result<Option<u64>, String> {
        if self.errors.contains(doi) {
            return Err(format!("scripted failure for {doi:?}"));
        }
        Ok(self.map.get(doi).copied())
    }
}

/// Resolves a normalized citation to a PMID. PMID hints check the store
/// directly; DOI hints go through the ID converter; everything else goes
/// through the citation matcher, keeping the top-ranked candidate and
/// logging the full candidate list. Service failures are recorded as
/// `Unmapped("service-error")`, never raised: resolution faults are part
/// of what an audit reports.
pub async fn map_to_pmid(
    normalized: &str,
    style_hint: CitationStyle,
    matcher: &MatcherClient,
    idconv: &IdConvClient,
    store: &ArticleStore,
) -> PmidMapping {
    match style_hint {
        CitationStyle::Pmid => match normalized.parse::<u64>() {
            Ok(pmid) if store.contains(pmid) => PmidMapping::mapped(pmid, MappingMethod::Direct),
            _ => PmidMapping::unmapped("unknown-pmid", MappingMethod::Direct),
        },
        CitationStyle::Doi => match idconv.pmid_for_doi(normalized).await {
            Ok(Some(pmid)) => PmidMapping::mapped(pmid, MappingMethod::IdConverter),
            Ok(None) => PmidMapping::unmapped("no-match", MappingMethod::IdConverter),
            Err(message) => {
                tracing::warn!(doi = normalized, %message, "id-converter failure");
                PmidMapping::unmapped("service-error", MappingMethod::IdConverter)
            }
        },
        _ => match matcher.candidates(normalized).await {
            Ok(candidates) if !candidates.is_empty() => PmidMapping {
                status: MappingStatus::Mapped {
                    pmid: candidates[0],
                },
                method: MappingMethod::CitationMatcher,
                candidates,
            },
            Ok(_) => PmidMapping::unmapped("no-match", MappingMethod::CitationMatcher),
            Err(message) => {
                tracing::warn!(citation = normalized, %message, "citation-matcher failure");
                PmidMapping::unmapped("service-error", MappingMethod::CitationMatcher)
            }
        },
    }
}

/// Audits one answer end to end: extraction, normalization, resolution,
/// and verification of every resolvable pair against its article.
#[allow(clippy::too_many_arguments)]
pub async fn audit_answer(
    answer_id: &str,
    answer_text: &str,
    style_hint: CitationStyle,
    gateway: &Gateway,
    extractor: &RoleSpec,
    verifier: &RoleSpec,
    matcher: &MatcherClient,
    idconv: &IdConvClient,
    store: &ArticleStore,
) -> Result<Vec<AuditRecord>, CiteError> {
    let extraction = gateway
        .complete(&extractor.request(&prompts::claim_extraction(answer_text)))
        .await?;
    let pairs = parse_extraction_json(&extraction.content, style_hint)?;

    let mut records = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let (normalized, mapping) = match normalize_citation(&pair.citation, style_hint) {
            Ok(normalized) => {
                let mapping =
                    map_to_pmid(&normalized, style_hint, matcher, idconv, store).await;
                (Some(normalized), mapping)
            }
            Err(_) => (
                None,
                PmidMapping::unmapped("no-identifier", method_for(style_hint)),
            ),
        };
        let verdict = match mapping.pmid().and_then(|pmid| store.get(pmid)) {
            Some(article) => {
                let response = gateway
                    .complete(&verifier.request(&prompts::verification_free(
                        &pair.claim,
                        &article.prompt_text(),
                    )))
                    .await?;
                parse_verification_output(&response.content)
                    .ok()
                    .map(|report| report.score())
            }
            None => None,
        };
        records.push(AuditRecord {
            answer_id: answer_id.to_owned(),
            claim: pair.claim,
            citation: pair.citation,
            normalized,
            mapping,
            verdict,
        });
    }
    Ok(records)
}

fn method_for(style_hint: CitationStyle) -> MappingMethod {
    match style_hint {
        CitationStyle::Pmid => MappingMethod::Direct,
        CitationStyle::Doi => MappingMethod::IdConverter,
        _ => MappingMethod::CitationMatcher,
    }
}

// --- metrics -----------------------------------------------------------------

/// One metric value with an optional bootstrap interval. `value` is absent
/// when the metric's denominator is empty (for example no verified records).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<CiBounds>,
}

/// The audit's aggregate metrics. `hallucination_rate` counts verified
/// claims whose verdict is 0 or negative (not partially or fully
/// supported); `supported_fraction` is its exact complement over the same
/// denominator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditMetrics {
    pub answers: u64,
    pub records: u64,
    pub mapped: u64,
    pub verified: u64,
    pub claims_per_answer: Metric,
    pub mapping_rate: Metric,
    pub avg_pmid: Metric,
    pub hallucination_rate: Metric,
    pub supported_fraction: Metric,
    pub supported_count_per_answer: Metric,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn metric(
    values: &[f64],
    bootstrap: Option<BootstrapSettings>,
    scope: &str,
) -> Result<Metric, CiteError> {
    let Some(value) = mean(values) else {
        return Ok(Metric {
            value: None,
            ci: None,
        });
    };
    let ci = match bootstrap {
        Some(settings) => {
            let (lo, hi) = bootstrap_ci(
                values,
                settings.iterations,
                settings.level,
                crate::derive_seed(settings.seed, scope),
            )?;
            Some(CiBounds { lo, hi })
        }
        None => None,
    };
    Ok(Metric {
        value: Some(value),
        ci,
    })
}

/// Computes the six audit metrics over all records. `answer_ids` must list
/// every audited answer — including answers that produced no records — so
/// per-answer means keep the right denominator. Bootstrap units: answers
/// for per-answer metrics, records for the mapping rate, mapped PMIDs for
/// the recency proxy, verified records for the two verdict rates.
pub fn compute_metrics(
    records: &[AuditRecord],
    answer_ids: &[String],
    bootstrap: Option<BootstrapSettings>,
) -> Result<AuditMetrics, CiteError> {
    if records.is_empty() || answer_ids.is_empty() {
        return Err(CiteError::EmptySet);
    }

    let mut per_answer_claims: BTreeMap<&str, f64> =
        answer_ids.iter().map(|id| (id.as_str(), 0.0)).collect();
    let mut per_answer_supported: BTreeMap<&str, f64> =
        answer_ids.iter().map(|id| (id.as_str(), 0.0)).collect();
    let mut mapped_flags = Vec::with_capacity(records.len());
    let mut mapped_pmids = Vec::new();
    let mut hallucinated_flags = Vec::new();
    for record in records {
        *per_answer_claims.entry(&record.answer_id).or_insert(0.0) += 1.0;
        let pmid = record.mapping.pmid();
        mapped_flags.push(if pmid.is_some() { 1.0 } else { 0.0 });
        if let Some(pmid) = pmid {
            mapped_pmids.push(pmid as f64);
        }
        if let Some(verdict) = record.verdict {
            let supported = is_supported(verdict);
            hallucinated_flags.push(if supported { 0.0 } else { 1.0 });
            if supported {
                *per_answer_supported.entry(&record.answer_id).or_insert(0.0) += 1.0;
            }
        }
    }
    let claims_values: Vec<f64> = per_answer_claims.values().copied().collect();
    let supported_values: Vec<f64> = per_answer_supported.values().copied().collect();
    let supported_flags: Vec<f64> = hallucinated_flags.iter().map(|h| 1.0 - h).collect();

    let hallucination_rate = metric(&hallucinated_flags, bootstrap, "hallucination-rate")?;
    let supported_ci = metric(&supported_flags, bootstrap, "supported-fraction")?.ci;
    Ok(AuditMetrics {
        answers: answer_ids.len() as u64,
        records: records.len() as u64,
        mapped: mapped_pmids.len() as u64,
        verified: hallucinated_flags.len() as u64,
        claims_per_answer: metric(&claims_values, bootstrap, "claims-per-answer")?,
        mapping_rate: metric(&mapped_flags, bootstrap, "mapping-rate")?,
        avg_pmid: metric(&mapped_pmids, bootstrap, "avg-pmid")?,
        supported_fraction: Metric {
            // The exact complement, not an independently rounded mean.
            value: hallucination_rate.value.map(|h| 1.0 - h),
            ci: supported_ci,
        },
        hallucination_rate,
        supported_count_per_answer: metric(&supported_values, bootstrap, "supported-count")?,
    })
}
