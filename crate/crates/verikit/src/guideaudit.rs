//! Guideline citation auditing: extract single-citation statements from
//! BioC-annotated documents, filter them down to verification-worthy claims,
//! flag statements their own cited source contradicts, and draw seeded
//! stratified review samples.
//!
//! The BioC subset understood here is `collection → documents → passages →
//! (text, offset, annotations)`. An annotation counts as a citation when its
//! `type` infon equals the configured value (default `"citation"`) and it
//! carries a PMID under the configured infon key (default `"pmid"`). Infon
//! conventions vary between producers, so both are configurable rather than
//! guessed.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, RoleSpec};
use crate::prompts;
use crate::verdict::{LikertScore, VerificationReport};

/// Errors raised while auditing guideline documents.
#[derive(Debug, Error)]
pub enum GuideError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("document structure error: {0}")]
    BiocSchema(String),
    #[error("worthiness answer was neither \"yes\" nor \"no\": {0:?}")]
    UnparseableAnswer(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

// ---------------------------------------------------------------------------
// BioC document subset
// ---------------------------------------------------------------------------

/// Top-level BioC collection: documents and nothing else we need.
#[derive(Debug, Clone, Deserialize)]
pub struct BiocCollection {
    #[serde(default)]
    pub documents: Vec<BiocDocument>,
}

/// One document: an id plus passages.
#[derive(Debug, Clone, Deserialize)]
pub struct BiocDocument {
    pub id: String,
    #[serde(default)]
    pub passages: Vec<BiocPassage>,
}

/// One passage: text with a document-global character offset and annotations.
#[derive(Debug, Clone, Deserialize)]
pub struct BiocPassage {
    #[serde(default)]
    pub infons: BTreeMap<String, String>,
    #[serde(default)]
    pub offset: u64,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub annotations: Vec<BiocAnnotation>,
}

/// One annotation: infons plus the spans it covers.
#[derive(Debug, Clone, Deserialize)]
pub struct BiocAnnotation {
    #[serde(default)]
    pub infons: BTreeMap<String, String>,
    #[serde(default)]
    pub locations: Vec<BiocLocation>,
}

/// A covered span, offset document-global like the passage offset.
#[derive(Debug, Clone, Deserialize)]
pub struct BiocLocation {
    pub offset: u64,
    pub length: u64,
}

/// Which annotations count as citations, and where their PMID lives.
#[derive(Debug, Clone)]
pub struct BiocConfig {
    /// Value of the `type` infon that marks a citation annotation.
    pub citation_type: String,
    /// Infon key holding the cited article's PMID.
    pub pmid_key: String,
}

impl Default for BiocConfig {
    fn default() -> BiocConfig {
        BiocConfig {
            citation_type: "citation".to_string(),
            pmid_key: "pmid".to_string(),
        }
    }
}

/// Reads one BioC JSON file into the parsed subset.
pub fn read_bioc(path: &Path) -> Result<BiocCollection, GuideError> {
    let raw = std::fs::read_to_string(path).map_err(|source| GuideError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&raw).map_err(|err| GuideError::BiocSchema(err.to_string()))
}

// ---------------------------------------------------------------------------
// Statement extraction
// ---------------------------------------------------------------------------

/// A sentence that cites exactly one article, with the citation marker text
/// removed. `char_span` is the sentence's `(start, end)` byte range within
/// its passage text (end exclusive), before marker removal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationStatement {
    pub doc_id: String,
    pub sentence: String,
    pub cited_pmid: u64,
    pub char_span: (usize, usize),
}

/// Counts of sentences excluded during extraction, by reason.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExtractionCounts {
    /// Sentences containing two or more citation annotations.
    pub multi_citation_excluded: u64,
    /// Sentences whose sole citation annotation lacked a usable PMID.
    pub missing_pmid_excluded: u64,
}

/// Sentence terminators that end abbreviations rather than sentences.
const ABBREVIATIONS: [&str; 5] = ["e.g.", "i.e.", "Fig.", "et al.", "vs."];

/// Splits `text` into sentences. A sentence ends at `.`, `!`, or `?` followed
/// by whitespace and an uppercase letter, unless the terminator closes a
/// known abbreviation. Returns `(start, end)` byte ranges; end is exclusive
/// and excludes trailing whitespace between sentences.
fn sentence_spans(text: &str) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut start = 0usize;
    let mut idx = 0usize;
    while idx < bytes.len() {
        let ch = bytes[idx];
        if ch == b'.' || ch == b'!' || ch == b'?' {
            let terminator_end = idx + 1;
            let prefix = &text[start..terminator_end];
            let is_abbreviation =
                ch == b'.' && ABBREVIATIONS.iter().any(|abbr| prefix.ends_with(abbr));
            if !is_abbreviation {
                let rest = &text[terminator_end..];
                let trimmed = rest.trim_start();
                let saw_whitespace = trimmed.len() < rest.len();
                let next_upper = trimmed.chars().next().is_some_and(char::is_uppercase);
                if saw_whitespace && next_upper {
                    spans.push((start, terminator_end));
                    start = terminator_end + (rest.len() - trimmed.len());
                    idx = start;
                    continue;
                }
            }
        }
        idx += 1;
    }
    if start < text.len() && !text[start..].trim().is_empty() {
        spans.push((start, text.len()));
    }
    spans
}

/// Removes the byte ranges in `spans` (passage-relative, non-overlapping)
/// from `sentence` (which starts at `sentence_start` within the passage),
/// then tidies whitespace: runs of spaces collapse to one, spaces before
/// `.,;:!?)]` vanish, and the result is trimmed.
fn remove_spans(sentence: &str, sentence_start: usize, spans: &[(usize, usize)]) -> String {
    let mut kept = String::with_capacity(sentence.len());
    let mut cursor = 0usize;
    let mut ordered: Vec<(usize, usize)> = spans
        .iter()
        .map(|&(s, e)| {
            (
                s.saturating_sub(sentence_start),
                e.saturating_sub(sentence_start).min(sentence.len()),
            )
        })
        .collect();
    ordered.sort_unstable();
    for (s, e) in ordered {
        if s > cursor {
            kept.push_str(&sentence[cursor..s.min(sentence.len())]);
        }
        cursor = cursor.max(e);
    }
    if cursor < sentence.len() {
        kept.push_str(&sentence[cursor..]);
    }

    let mut cleaned = String::with_capacity(kept.len());
    let mut pending_space = false;
    for ch in kept.chars() {
        if ch.is_whitespace() {
            pending_space = !cleaned.is_empty();
            continue;
        }
        if pending_space && !matches!(ch, '.' | ',' | ';' | ':' | '!' | '?' | ')' | ']') {
            cleaned.push(' ');
        }
        pending_space = false;
        cleaned.push(ch);
    }
    cleaned
}

/// Extracts single-citation statements from one document.
///
/// Each passage is sentence-segmented; a sentence survives when exactly one
/// citation annotation span intersects it and that annotation resolves to a
/// PMID. The citation marker text is removed from the emitted sentence.
/// Sentences excluded for multiple citations or an unresolvable PMID are
/// counted, not silently dropped.
pub fn extract_citation_statements(
    doc: &BiocDocument,
    config: &BiocConfig,
) -> (Vec<CitationStatement>, ExtractionCounts) {
    let mut statements = Vec::new();
    let mut counts = ExtractionCounts::default();
    for passage in &doc.passages {
        // Collect citation spans relative to the passage text. Annotation
        // offsets are document-global, so subtract the passage offset.
        let mut citations: Vec<(usize, usize, Option<u64>)> = Vec::new();
        for annotation in &passage.annotations {
            if annotation.infons.get("type").map(String::as_str)
                != Some(config.citation_type.as_str())
            {
                continue;
            }
            let pmid = annotation
                .infons
                .get(&config.pmid_key)
                .and_then(|raw| raw.trim().parse::<u64>().ok())
                .filter(|&pmid| pmid > 0);
            for location in &annotation.locations {
                let start = location.offset.saturating_sub(passage.offset) as usize;
                let end = (start as u64 + location.length).min(passage.text.len() as u64) as usize;
                if start < end && end <= passage.text.len() {
                    citations.push((start, end, pmid));
                }
            }
        }

        for (sent_start, sent_end) in sentence_spans(&passage.text) {
            let inside: Vec<&(usize, usize, Option<u64>)> = citations
                .iter()
                .filter(|&&(c_start, c_end, _)| c_start < sent_end && c_end > sent_start)
                .collect();
            match inside.as_slice() {
                [] => {}
                [&(c_start, c_end, pmid)] => match pmid {
                    Some(pmid) => {
                        let sentence = remove_spans(
                            &passage.text[sent_start..sent_end],
                            sent_start,
                            &[(c_start, c_end)],
                        );
                        if !sentence.is_empty() {
                            statements.push(CitationStatement {
                                doc_id: doc.id.clone(),
                                sentence,
                                cited_pmid: pmid,
                                char_span: (sent_start, sent_end),
                            });
                        }
                    }
                    None => counts.missing_pmid_excluded += 1,
                },
                _ => counts.multi_citation_excluded += 1,
            }
        }
    }
    (statements, counts)
}

// ---------------------------------------------------------------------------
// Worthiness filter
// ---------------------------------------------------------------------------

/// Asks the filter model whether `claim` can be fact-checked. The answer,
/// trimmed and lowercased, must be exactly `yes` or `no`; anything else is
/// an [`GuideError::UnparseableAnswer`].
pub async fn worthiness_filter(
    claim: &str,
    gateway: &Gateway,
    role: &RoleSpec,
) -> Result<bool, GuideError> {
    let pair = prompts::worthiness_check(claim);
    let response = gateway.complete(&role.request(&pair)).await?;
    parse_worthiness(&response.content)
}

/// Maps a raw filter answer to a boolean; the postcondition of
/// [`worthiness_filter`] split out so batch callers can reuse it.
pub fn parse_worthiness(raw: &str) -> Result<bool, GuideError> {
    match raw.trim().to_lowercase().as_str() {
        "yes" => Ok(true),
        "no" => Ok(false),
        _ => Err(GuideError::UnparseableAnswer(preview(raw))),
    }
}

fn preview(raw: &str) -> String {
    let trimmed = raw.trim();
    if trimmed.chars().count() <= 80 {
        trimmed.to_string()
    } else {
        let cut: String = trimmed.chars().take(80).collect();
        format!("{cut}…")
    }
}

// ---------------------------------------------------------------------------
// Contradiction flagging
// ---------------------------------------------------------------------------

/// A statement its own cited source contradicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaggedCase {
    pub statement: CitationStatement,
    /// Always −1 (partial contradiction) or −2 (strong contradiction).
    pub verdict: LikertScore,
    pub rationale: String,
}

/// How verdicts landed across the five score values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictDistribution {
    pub n: u64,
    /// Count per score, keyed "-2".."2"; every key always present.
    pub counts: BTreeMap<String, u64>,
    /// Fraction per score; zero when `n` is zero. Sums to 1 otherwise.
    pub fractions: BTreeMap<String, f64>,
}

/// Flags every verdict scored −1 or −2 and summarizes the full five-way
/// score distribution.
pub fn flag_contradictions(
    verdicts: &[(CitationStatement, VerificationReport)],
) -> (Vec<FlaggedCase>, VerdictDistribution) {
    let mut flagged = Vec::new();
    let mut counts: BTreeMap<String, u64> =
        (-2..=2).map(|value| (value.to_string(), 0)).collect();
    for (statement, report) in verdicts {
        let value = report.score().value();
        *counts.entry(value.to_string()).or_default() += 1;
        if value < 0 {
            flagged.push(FlaggedCase {
                statement: statement.clone(),
                verdict: report.score(),
                rationale: report.rationale().to_string(),
            });
        }
    }
    let n = verdicts.len() as u64;
    let fractions = counts
        .iter()
        .map(|(key, &count)| {
            let fraction = if n == 0 { 0.0 } else { count as f64 / n as f64 };
            (key.clone(), fraction)
        })
        .collect();
    (flagged, VerdictDistribution {
        n,
        counts,
        fractions,
    })
}

// ---------------------------------------------------------------------------
// Stratified sampling
// ---------------------------------------------------------------------------

/// A warning attached to a stratified sample (no error: the sample still
/// contains everything available).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SampleWarning {
    /// The stratum held fewer cases than requested; all were taken.
    Undersized {
        verdict: i8,
        available: usize,
        requested: usize,
    },
}

impl fmt::Display for SampleWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleWarning::Undersized {
                verdict,
                available,
                requested,
            } => write!(
                f,
                "stratum {verdict} has only {available} case(s); requested {requested}, taking all"
            ),
        }
    }
}

/// Draws up to `n_per_stratum` flagged cases from each verdict stratum
/// (−1 first, then −2) without replacement, seeded and deterministic.
///
/// One RNG seeded with `seed` is consumed sequentially across the strata, so
/// the draw for −2 depends on how many cases −1 held — the whole output is a
/// pure function of `(flagged, n_per_stratum, seed)`. Output order is
/// stratum-major, then draw order within the stratum.
pub fn stratified_sample(
    flagged: &[FlaggedCase],
    n_per_stratum: usize,
    seed: u64,
) -> (Vec<FlaggedCase>, Vec<SampleWarning>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = Vec::new();
    let mut warnings = Vec::new();
    for verdict in [-1i8, -2i8] {
        let mut stratum: Vec<&FlaggedCase> = flagged
            .iter()
            .filter(|case| case.verdict.value() == verdict)
            .collect();
        let take = n_per_stratum.min(stratum.len());
        if take < n_per_stratum {
            warnings.push(SampleWarning::Undersized {
                verdict,
                available: stratum.len(),
                requested: n_per_stratum,
            });
        }
        // Partial Fisher-Yates: after i swaps, the prefix is a uniform
        // without-replacement draw in draw order.
        for i in 0..take {
            let j = rng.random_range(i..stratum.len());
            stratum.swap(i, j);
        }
        sample.extend(stratum[..take].iter().map(|&case| case.clone()));
    }
    (sample, warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn annotation(start: u64, length: u64, pmid: Option<&str>) -> BiocAnnotation {
        let mut infons = BTreeMap::new();
        infons.insert("type".to_string(), "citation".to_string());
        if let Some(pmid) = pmid {
            infons.insert("pmid".to_string(), pmid.to_string());
        }
        BiocAnnotation {
            infons,
            locations: vec![BiocLocation {
                offset: start,
                length,
            }],
        }
    }

    fn doc(passages: Vec<BiocPassage>) -> BiocDocument {
        BiocDocument {
            id: "doc-1".to_string(),
            passages,
        }
    }

    fn passage(offset: u64, text: &str, annotations: Vec<BiocAnnotation>) -> BiocPassage {
        BiocPassage {
            infons: BTreeMap::new(),
            offset,
            text: text.to_string(),
            annotations,
        }
    }

    fn statement(sentence: &str, pmid: u64) -> CitationStatement {
        CitationStatement {
            doc_id: "doc-1".to_string(),
            sentence: sentence.to_string(),
            cited_pmid: pmid,
            char_span: (0, 0),
        }
    }

    fn report(rationale: &str, score: i64) -> VerificationReport {
        VerificationReport::new(rationale, LikertScore::new(score).unwrap()).unwrap()
    }

    #[test]
    fn splits_on_terminators_followed_by_uppercase() {
        let spans = sentence_spans("X reduces Y. Z is unknown. Done!");
        let text = "X reduces Y. Z is unknown. Done!";
        let sentences: Vec<&str> = spans.iter().map(|&(s, e)| &text[s..e]).collect();
        assert_eq!(sentences, vec!["X reduces Y.", "Z is unknown.", "Done!"]);
    }

    #[test]
    fn abbreviations_do_not_terminate_sentences() {
        let text = "Common markers (e.g. CRP) rise. Doses vs. Placebo differ per Fig. 2 et al. Note this.";
        let spans = sentence_spans(text);
        let sentences: Vec<&str> = spans.iter().map(|&(s, e)| &text[s..e]).collect();
        assert_eq!(
            sentences,
            vec![
                "Common markers (e.g. CRP) rise.",
                "Doses vs. Placebo differ per Fig. 2 et al. Note this.",
            ]
        );
    }

    #[test]
    fn lowercase_after_period_stays_in_the_same_sentence() {
        let spans = sentence_spans("The p. value was small. Next point.");
        let text = "The p. value was small. Next point.";
        let sentences: Vec<&str> = spans.iter().map(|&(s, e)| &text[s..e]).collect();
        assert_eq!(sentences, vec!["The p. value was small.", "Next point."]);
    }

    #[test]
    fn single_citation_sentence_is_extracted_with_marker_removed() {
        // "X reduces Y [5]. Z is unknown." — marker "[5]" at bytes 12..15.
        let text = "X reduces Y [5]. Z is unknown.";
        let document = doc(vec![passage(0, text, vec![annotation(12, 3, Some("5"))])]);
        let (statements, counts) = extract_citation_statements(&document, &BiocConfig::default());
        assert_eq!(statements.len(), 1);
        assert_eq!(statements[0].sentence, "X reduces Y.");
        assert_eq!(statements[0].cited_pmid, 5);
        assert_eq!(statements[0].char_span, (0, 16));
        assert_eq!(counts, ExtractionCounts::default());
    }

    #[test]
    fn passage_offset_shifts_annotation_coordinates() {
        // Document-global annotation offsets: the passage starts at 100.
        let text = "Statins lower LDL (PMID 77).";
        let document = doc(vec![passage(
            100,
            text,
            vec![annotation(118, 9, Some("77"))],
        )]);
        let (statements, _) = extract_citation_statements(&document, &BiocConfig::default());
        assert_eq!(statements.len(), 1);
        assert_eq!(statements[0].sentence, "Statins lower LDL.");
        assert_eq!(statements[0].cited_pmid, 77);
    }

    #[test]
    fn multi_citation_sentences_are_excluded_and_counted() {
        let text = "A helps B [1] [2]. C helps D [3].";
        let document = doc(vec![passage(
            0,
            text,
            vec![
                annotation(10, 3, Some("1")),
                annotation(14, 3, Some("2")),
                annotation(29, 3, Some("3")),
            ],
        )]);
        let (statements, counts) = extract_citation_statements(&document, &BiocConfig::default());
        assert_eq!(statements.len(), 1);
        assert_eq!(statements[0].sentence, "C helps D.");
        assert_eq!(counts.multi_citation_excluded, 1);
        assert_eq!(counts.missing_pmid_excluded, 0);
    }

    #[test]
    fn annotation_without_pmid_is_excluded_and_counted() {
        let text = "A helps B [1].";
        let document = doc(vec![passage(0, text, vec![annotation(10, 3, None)])]);
        let (statements, counts) = extract_citation_statements(&document, &BiocConfig::default());
        assert!(statements.is_empty());
        assert_eq!(counts.missing_pmid_excluded, 1);
    }

    #[test]
    fn non_numeric_pmid_counts_as_missing() {
        let text = "A helps B [1].";
        let document = doc(vec![passage(
            0,
            text,
            vec![annotation(10, 3, Some("PMC12345"))],
        )]);
        let (statements, counts) = extract_citation_statements(&document, &BiocConfig::default());
        assert!(statements.is_empty());
        assert_eq!(counts.missing_pmid_excluded, 1);
    }

    #[test]
    fn non_citation_annotations_are_ignored() {
        let text = "Aspirin thins blood [9].";
        let mut gene = annotation(0, 7, Some("42"));
        gene.infons.insert("type".to_string(), "gene".to_string());
        let document = doc(vec![passage(
            0,
            text,
            vec![gene, annotation(20, 3, Some("9"))],
        )]);
        let (statements, _) = extract_citation_statements(&document, &BiocConfig::default());
        assert_eq!(statements.len(), 1);
        assert_eq!(statements[0].cited_pmid, 9);
        assert_eq!(statements[0].sentence, "Aspirin thins blood.");
    }

    #[test]
    fn custom_infon_keys_are_honored() {
        let text = "Drug X works [r1].";
        let mut ann = BiocAnnotation {
            infons: BTreeMap::new(),
            locations: vec![BiocLocation {
                offset: 13,
                length: 4,
            }],
        };
        ann.infons.insert("type".to_string(), "ref".to_string());
        ann.infons
            .insert("referenced_pmid".to_string(), "31".to_string());
        let document = doc(vec![passage(0, text, vec![ann])]);
        let config = BiocConfig {
            citation_type: "ref".to_string(),
            pmid_key: "referenced_pmid".to_string(),
        };
        let (statements, _) = extract_citation_statements(&document, &config);
        assert_eq!(statements.len(), 1);
        assert_eq!(statements[0].sentence, "Drug X works.");
        assert_eq!(statements[0].cited_pmid, 31);
        // The default config sees no citations at all in the same document.
        let (none, counts) = extract_citation_statements(&document, &BiocConfig::default());
        assert!(none.is_empty());
        assert_eq!(counts, ExtractionCounts::default());
    }

    #[test]
    fn marker_removal_cleans_surrounding_whitespace() {
        assert_eq!(
            remove_spans("X reduces Y [5] .", 0, &[(12, 15)]),
            "X reduces Y."
        );
        assert_eq!(
            remove_spans("mid [1] sentence marker.", 0, &[(4, 7)]),
            "mid sentence marker."
        );
    }

    #[test]
    fn worthiness_answers_parse_case_insensitively() {
        assert!(parse_worthiness("yes").unwrap());
        assert!(parse_worthiness(" Yes\n").unwrap());
        assert!(!parse_worthiness("No").unwrap());
        assert!(matches!(
            parse_worthiness("maybe"),
            Err(GuideError::UnparseableAnswer(_))
        ));
        assert!(matches!(
            parse_worthiness("yes, because"),
            Err(GuideError::UnparseableAnswer(_))
        ));
    }

    #[tokio::test]
    async fn worthiness_filter_round_trips_through_a_scripted_gateway() {
        let script = serde_json::json!({
            "rules": [
                {"user_contains": ["Claim: \"checkable claim\""], "response": "yes"},
                {"user_contains": ["Claim: \"vague claim\""], "response": "No"}
            ]
        });
        let gateway =
            Gateway::mock(serde_json::from_value(script).unwrap());
        let role = RoleSpec::new("filter-model", 0.0);
        assert!(worthiness_filter("checkable claim", &gateway, &role)
            .await
            .unwrap());
        assert!(!worthiness_filter("vague claim", &gateway, &role)
            .await
            .unwrap());
    }

    #[test]
    fn flagging_keeps_exactly_the_negative_scores() {
        let verdicts = vec![
            (statement("a", 1), report("strong support", 2)),
            (statement("b", 2), report("no evidence", 0)),
            (statement("c", 3), report("partially contradicted", -1)),
        ];
        let (flagged, distribution) = flag_contradictions(&verdicts);
        assert_eq!(flagged.len(), 1);
        assert_eq!(flagged[0].verdict.value(), -1);
        assert_eq!(flagged[0].rationale, "partially contradicted");
        assert_eq!(flagged[0].statement.sentence, "c");
        assert_eq!(distribution.n, 3);
        assert_eq!(distribution.counts["-1"], 1);
        assert_eq!(distribution.counts["2"], 1);
        assert_eq!(distribution.counts["-2"], 0);
    }

    #[test]
    fn no_negative_scores_means_no_flags() {
        let verdicts = vec![
            (statement("a", 1), report("support", 2)),
            (statement("b", 2), report("support", 1)),
            (statement("c", 3), report("nei", 0)),
        ];
        let (flagged, _) = flag_contradictions(&verdicts);
        assert!(flagged.is_empty());
    }

    #[test]
    fn uniform_verdicts_give_twenty_percent_per_bin() {
        let verdicts: Vec<(CitationStatement, VerificationReport)> = (-2..=2)
            .map(|value| (statement("s", 1), report("r", value)))
            .collect();
        let (flagged, distribution) = flag_contradictions(&verdicts);
        assert_eq!(flagged.len(), 2);
        assert_eq!(distribution.n, 5);
        for key in ["-2", "-1", "0", "1", "2"] {
            assert_eq!(distribution.counts[key], 1);
            assert!((distribution.fractions[key] - 0.2).abs() < 1e-12);
        }
        let total: f64 = distribution.fractions.values().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_verdict_list_yields_zero_fractions() {
        let (flagged, distribution) = flag_contradictions(&[]);
        assert!(flagged.is_empty());
        assert_eq!(distribution.n, 0);
        assert!(distribution.fractions.values().all(|&f| f == 0.0));
    }

    fn flagged_case(id: usize, verdict: i64) -> FlaggedCase {
        FlaggedCase {
            statement: statement(&format!("sentence-{id}"), id as u64 + 1),
            verdict: LikertScore::new(verdict).unwrap(),
            rationale: format!("rationale-{id}"),
        }
    }

    #[test]
    fn stratified_sample_takes_n_from_each_stratum() {
        let mut flagged = Vec::new();
        for id in 0..100 {
            flagged.push(flagged_case(id, -1));
        }
        for id in 100..200 {
            flagged.push(flagged_case(id, -2));
        }
        let (sample, warnings) = stratified_sample(&flagged, 50, 7);
        assert_eq!(sample.len(), 100);
        assert!(warnings.is_empty());
        assert!(sample[..50].iter().all(|c| c.verdict.value() == -1));
        assert!(sample[50..].iter().all(|c| c.verdict.value() == -2));
        // Without replacement: all sampled sentences distinct.
        let unique: HashSet<&str> = sample.iter().map(|c| c.statement.sentence.as_str()).collect();
        assert_eq!(unique.len(), 100);
    }

    #[test]
    fn undersized_stratum_is_taken_whole_with_a_warning() {
        let mut flagged: Vec<FlaggedCase> = (0..30).map(|id| flagged_case(id, -1)).collect();
        flagged.extend((30..90).map(|id| flagged_case(id, -2)));
        let (sample, warnings) = stratified_sample(&flagged, 50, 3);
        assert_eq!(sample.len(), 30 + 50);
        assert_eq!(warnings.len(), 1);
        assert_eq!(
            warnings[0],
            SampleWarning::Undersized {
                verdict: -1,
                available: 30,
                requested: 50,
            }
        );
        let partial: HashSet<&str> = sample[..30]
            .iter()
            .map(|c| c.statement.sentence.as_str())
            .collect();
        assert_eq!(partial.len(), 30);
    }

    #[test]
    fn same_seed_reproduces_the_sample_and_different_seeds_differ() {
        let flagged: Vec<FlaggedCase> = (0..200)
            .map(|id| flagged_case(id, if id % 2 == 0 { -1 } else { -2 }))
            .collect();
        let (first, _) = stratified_sample(&flagged, 50, 11);
        let (second, _) = stratified_sample(&flagged, 50, 11);
        assert_eq!(first, second);
        let (other, _) = stratified_sample(&flagged, 50, 12);
        assert_ne!(first, other);
    }

    #[test]
    fn sample_is_a_subset_of_its_stratum() {
        let flagged: Vec<FlaggedCase> = (0..40)
            .map(|id| flagged_case(id, if id < 25 { -1 } else { -2 }))
            .collect();
        let (sample, _) = stratified_sample(&flagged, 10, 99);
        let originals: HashSet<&str> = flagged
            .iter()
            .map(|c| c.statement.sentence.as_str())
            .collect();
        for case in &sample {
            assert!(originals.contains(case.statement.sentence.as_str()));
        }
        assert_eq!(sample.len(), 20);
    }

    #[test]
    fn bioc_subset_parses_from_json() {
        let raw = serde_json::json!({
            "source": "tool",
            "documents": [{
                "id": "G1",
                "passages": [{
                    "infons": {"section": "recommendations"},
                    "offset": 0,
                    "text": "Use X first [1].",
                    "annotations": [{
                        "infons": {"type": "citation", "pmid": "101"},
                        "locations": [{"offset": 12, "length": 3}]
                    }]
                }]
            }]
        });
        let collection: BiocCollection = serde_json::from_value(raw).unwrap();
        assert_eq!(collection.documents.len(), 1);
        let (statements, _) =
            extract_citation_statements(&collection.documents[0], &BiocConfig::default());
        assert_eq!(statements.len(), 1);
        assert_eq!(statements[0].sentence, "Use X first.");
        assert_eq!(statements[0].doc_id, "G1");
    }
}
