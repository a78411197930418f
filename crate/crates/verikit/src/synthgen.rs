//! Synthetic corpus construction: claim generation over source articles,
//! initial screening verdicts, controversial-claim detection, three-model
//! panel voting with a consensus rule, and training-instance assembly.
//!
//! The flow per article: generate one supported and one refuted claim, pair
//! each claim with its retrieved articles, screen every pair with a single
//! verifier, escalate the pairs of claims whose screening verdicts span two
//! or more coarse classes to a three-model panel, and keep a pair only when
//! the panel agrees. Agreement means at least two of the three scores are
//! equal and the remaining one is within one point of that value.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::gateway::{ChatRequest, Gateway, GatewayError};
use crate::prompts;
use crate::types::{Article, Claim, Polarity};
use crate::verdict::{
    coarse_label, parse_verification_output, LikertScore, ThreeWayLabel, VerdictParseError,
    VerificationReport,
};

/// Published three-way label mix of the full-scale corpus, reported next to
/// locally computed fractions so small runs have a reference line.
pub const REFERENCE_LABEL_FRACTIONS: LabelFractions = LabelFractions {
    support: 0.383,
    nei: 0.364,
    contradict: 0.253,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("model returned an empty claim for article {pmid} ({polarity:?})")]
    EmptyClaim { pmid: u64, polarity: Polarity },
    #[error("cannot screen an empty score list")]
    EmptyScoreList,
    #[error("cannot summarize an empty instance set")]
    EmptyInstanceSet,
}

/// One panel member's parsed verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelVerdict {
    pub model_id: String,
    pub report: VerificationReport,
}

/// A verification call either parses into a report or is recorded as
/// unscorable with the offending raw text; unscorable is data, not a fault.
#[derive(Debug, Clone)]
pub enum VerdictOutcome {
    Scored(VerificationReport),
    Unscorable {
        raw: String,
        error: VerdictParseError,
    },
}

/// A panel member's contribution to one pair, unscorable members included.
#[derive(Debug, Clone)]
pub enum PanelOutcome {
    Scored(PanelVerdict),
    Unscorable { model_id: String },
}

/// The panel agreement decision. The rationale donor is drawn separately
/// during assembly, because the rule itself sees only scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsensusResult {
    Agreed(LikertScore),
    NoConsensus,
}

/// Why an escalated pair was left out of the final corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    NoConsensus,
    UnscorablePanel,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::NoConsensus => "no-consensus",
            DropReason::UnscorablePanel => "unscorable",
        }
    }
}

/// One finished corpus row: a claim, an evidence article, a rationale taken
/// verbatim from an agreeing verdict, and the agreed score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub claim: Claim,
    pub pmid: u64,
    pub rationale: String,
    pub score: LikertScore,
    pub is_source_article: bool,
}

fn polarity_suffix(polarity: Polarity) -> &'static str {
    match polarity {
        Polarity::SupportedBy => "s",
        Polarity::RefutedBy => "r",
    }
}

/// The stable claim identifier: source pmid plus a polarity suffix.
pub fn claim_id(pmid: u64, polarity: Polarity) -> String {
    format!("{pmid}-{}", polarity_suffix(polarity))
}

/// The chat request that asks for a claim of the given polarity.
pub fn claim_request(model: &str, temperature: f64, article: &Article, polarity: Polarity) -> ChatRequest {
    ChatRequest::from_pair(model, &prompts::claim_generation(article, polarity), temperature)
}

/// The chat request that asks for a verdict on (claim, article).
pub fn verification_request(
    model: &str,
    temperature: f64,
    claim_text: &str,
    article: &Article,
) -> ChatRequest {
    ChatRequest::from_pair(
        model,
        &prompts::verification_free(claim_text, &article.prompt_text()),
        temperature,
    )
}

/// Turns a raw claim-generation response into a `Claim`, trimming
/// whitespace and rejecting empty text.
pub fn claim_from_response(
    article: &Article,
    polarity: Polarity,
    response: &str,
) -> Result<Claim, SynthError> {
    let text = response.trim();
    if text.is_empty() {
        return Err(SynthError::EmptyClaim {
            pmid: article.pmid,
            polarity,
        });
    }
    Ok(Claim {
        id: claim_id(article.pmid, polarity),
        text: text.to_owned(),
        source_pmid: article.pmid,
        polarity,
    })
}

/// Asks the configured model for one claim about `article`.
pub async fn generate_claim(
    gateway: &Gateway,
    model: &str,
    temperature: f64,
    article: &Article,
    polarity: Polarity,
) -> Result<Claim, SynthError> {
    let response = gateway
        .complete(&claim_request(model, temperature, article, polarity))
        .await?;
    claim_from_response(article, polarity, &response.content)
}

/// Classifies a raw verification response: parsed report or unscorable.
pub fn verdict_from_response(response: &str) -> VerdictOutcome {
    match parse_verification_output(response) {
        Ok(report) => VerdictOutcome::Scored(report),
        Err(error) => VerdictOutcome::Unscorable {
            raw: response.to_owned(),
            error,
        },
    }
}

/// Runs one verification call and parses the answer. Parse failures come
/// back as `Unscorable`; only gateway faults are errors.
pub async fn initial_verdict(
    gateway: &Gateway,
    model: &str,
    temperature: f64,
    claim_text: &str,
    article: &Article,
) -> Result<VerdictOutcome, GatewayError> {
    let response = gateway
        .complete(&verification_request(model, temperature, claim_text, article))
        .await?;
    Ok(verdict_from_response(&response.content))
}

/// True when the claim's screening verdicts span at least two coarse
/// classes — the trigger for panel escalation.
pub fn screen_controversial(scores: &[LikertScore]) -> Result<bool, SynthError> {
    if scores.is_empty() {
        return Err(SynthError::EmptyScoreList);
    }
    let first = coarse_label(scores[0]);
    Ok(scores.iter().any(|s| coarse_label(*s) != first))
}

/// The agreement rule over three panel scores: agreed on `m` when `m`
/// appears at least twice and every score is within one point of `m`.
/// Among three scores at most one value can appear twice, so the outcome
/// never depends on input order.
pub fn consensus(scores: [LikertScore; 3]) -> ConsensusResult {
    for candidate in scores {
        let occurrences = scores.iter().filter(|s| **s == candidate).count();
        if occurrences >= 2 && scores.iter().all(|s| s.distance(candidate) <= 1) {
            return ConsensusResult::Agreed(candidate);
        }
    }
    ConsensusResult::NoConsensus
}

/// Applies the consensus rule to a panel and, on agreement, draws the
/// rationale uniformly (seeded) from the agreeing members in input order.
/// Any unscorable member drops the pair: the rule needs three scores.
pub fn assemble_instance(
    claim: &Claim,
    article: &Article,
    panel: &[PanelOutcome; 3],
    rng_seed: u64,
) -> Result<TrainingInstance, DropReason> {
    let mut verdicts: Vec<&PanelVerdict> = Vec::with_capacity(3);
    for outcome in panel {
        match outcome {
            PanelOutcome::Scored(verdict) => verdicts.push(verdict),
            PanelOutcome::Unscorable { .. } => return Err(DropReason::UnscorablePanel),
        }
    }
    let scores = [
        verdicts[0].report.score(),
        verdicts[1].report.score(),
        verdicts[2].report.score(),
    ];
    let agreed = match consensus(scores) {
        ConsensusResult::Agreed(score) => score,
        ConsensusResult::NoConsensus => return Err(DropReason::NoConsensus),
    };
    let agreeing: Vec<&&PanelVerdict> = verdicts
        .iter()
        .filter(|v| v.report.score() == agreed)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let donor = agreeing[rng.random_range(0..agreeing.len())];
    Ok(instance_from_report(claim, article, agreed, donor.report.rationale()))
}

/// Builds an instance straight from a single verdict — the path for pairs
/// whose claim never went to the panel.
pub fn instance_from_screener(
    claim: &Claim,
    article: &Article,
    report: &VerificationReport,
) -> TrainingInstance {
    instance_from_report(claim, article, report.score(), report.rationale())
}

fn instance_from_report(
    claim: &Claim,
    article: &Article,
    score: LikertScore,
    rationale: &str,
) -> TrainingInstance {
    TrainingInstance {
        claim: claim.clone(),
        pmid: article.pmid,
        rationale: rationale.to_owned(),
        score,
        is_source_article: claim.source_pmid == article.pmid,
    }
}

/// Three-way label fractions, serialized with lowercase label names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelFractions {
    pub support: f64,
    pub nei: f64,
    pub contradict: f64,
}

/// Whitespace-token word counts summarized as min/mean/max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordStats {
    pub min: u64,
    pub mean: f64,
    pub max: u64,
}

fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

fn word_stats(counts: &[u64]) -> WordStats {
    let min = counts.iter().copied().min().unwrap_or(0);
    let max = counts.iter().copied().max().unwrap_or(0);
    let mean = if counts.is_empty() {
        0.0
    } else {
        counts.iter().sum::<u64>() as f64 / counts.len() as f64
    };
    WordStats { min, mean, max }
}

/// Distribution report over a finished instance set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n: u64,
    /// Counts per score value, keyed "-2" … "2".
    pub score_counts: BTreeMap<String, u64>,
    pub score_fractions: BTreeMap<String, f64>,
    pub label_fractions: LabelFractions,
    pub claim_words: WordStats,
    pub rationale_words: WordStats,
    /// The full-scale corpus mix, for comparison — not a target.
    pub reference_label_fractions: LabelFractions,
}

/// Summarizes score and label mix plus claim/rationale word counts.
pub fn dataset_stats(instances: &[TrainingInstance]) -> Result<DatasetStats, SynthError> {
    if instances.is_empty() {
        return Err(SynthError::EmptyInstanceSet);
    }
    let n = instances.len() as u64;
    let mut score_counts: BTreeMap<String, u64> = LikertScore::ALL
        .iter()
        .map(|s| (s.value().to_string(), 0))
        .collect();
    let mut label_counts: BTreeMap<ThreeWayLabel, u64> = BTreeMap::new();
    let mut claim_words = Vec::with_capacity(instances.len());
    let mut rationale_words = Vec::with_capacity(instances.len());
    for instance in instances {
        *score_counts
            .get_mut(&instance.score.value().to_string())
            .expect("all five scores are pre-seeded") += 1;
        *label_counts.entry(coarse_label(instance.score)).or_insert(0) += 1;
        claim_words.push(word_count(&instance.claim.text));
        rationale_words.push(word_count(&instance.rationale));
    }
    let score_fractions = score_counts
        .iter()
        .map(|(k, v)| (k.clone(), *v as f64 / n as f64))
        .collect();
    let fraction = |label: ThreeWayLabel| -> f64 {
        *label_counts.get(&label).unwrap_or(&0) as f64 / n as f64
    };
    Ok(DatasetStats {
        n,
        score_counts,
        score_fractions,
        label_fractions: LabelFractions {
            support: fraction(ThreeWayLabel::Support),
            nei: fraction(ThreeWayLabel::Nei),
            contradict: fraction(ThreeWayLabel::Contradict),
        },
        claim_words: word_stats(&claim_words),
        rationale_words: word_stats(&rationale_words),
        reference_label_fractions: REFERENCE_LABEL_FRACTIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::MockScript;

    fn score(v: i64) -> LikertScore {
        LikertScore::new(v).unwrap()
    }

    fn article() -> Article {
        Article {
            pmid: 42,
            title: "Aspirin and infarction".into(),
            abstract_text: "Aspirin lowered infarction risk.".into(),
        }
    }

    fn claim() -> Claim {
        Claim {
            id: "42-s".into(),
            text: "Aspirin reduces MI risk.".into(),
            source_pmid: 42,
            polarity: Polarity::SupportedBy,
        }
    }

    fn verdict(model: &str, value: i64, rationale: &str) -> PanelOutcome {
        PanelOutcome::Scored(PanelVerdict {
            model_id: model.into(),
            report: VerificationReport::new(rationale, score(value)).unwrap(),
        })
    }

    fn mock(json: serde_json::Value) -> Gateway {
        let script: MockScript = serde_json::from_value(json).unwrap();
        Gateway::mock(script)
    }

    #[test]
    fn consensus_accepts_a_majority_with_the_third_within_one_point() {
        assert_eq!(
            consensus([score(2), score(2), score(1)]),
            ConsensusResult::Agreed(score(2))
        );
        assert_eq!(
            consensus([score(0), score(0), score(0)]),
            ConsensusResult::Agreed(score(0))
        );
    }

    #[test]
    fn consensus_rejects_an_outlier_two_points_away() {
        assert_eq!(
            consensus([score(2), score(2), score(0)]),
            ConsensusResult::NoConsensus
        );
        assert_eq!(
            consensus([score(-2), score(0), score(2)]),
            ConsensusResult::NoConsensus
        );
    }

    #[test]
    fn consensus_ignores_input_order() {
        let triples = [
            [score(1), score(2), score(2)],
            [score(2), score(1), score(2)],
            [score(2), score(2), score(1)],
        ];
        for t in triples {
            assert_eq!(consensus(t), ConsensusResult::Agreed(score(2)));
        }
    }

    #[test]
    fn screening_fires_only_on_mixed_coarse_classes() {
        assert!(!screen_controversial(&[score(2), score(1), score(2)]).unwrap());
        assert!(screen_controversial(&[score(2), score(0), score(-1)]).unwrap());
        assert!(!screen_controversial(&[score(0), score(0)]).unwrap());
        assert!(matches!(
            screen_controversial(&[]),
            Err(SynthError::EmptyScoreList)
        ));
    }

    #[test]
    fn claim_ids_carry_the_polarity_suffix() {
        assert_eq!(claim_id(42, Polarity::SupportedBy), "42-s");
        assert_eq!(claim_id(42, Polarity::RefutedBy), "42-r");
    }

    #[test]
    fn refuted_requests_warn_against_simple_negations() {
        let req = claim_request("m", 0.0, &article(), Polarity::RefutedBy);
        assert!(req.system.contains("Avoid using simple negative words"));
        let supported = claim_request("m", 0.0, &article(), Polarity::SupportedBy);
        assert!(!supported.system.contains("Avoid using simple negative words"));
    }

    #[test]
    fn verification_requests_lay_out_article_then_claim() {
        let req = verification_request("m", 0.0, "Aspirin reduces MI risk.", &article());
        assert!(req.user.starts_with("Article:\nTitle: Aspirin and infarction\n"));
        assert!(req.user.ends_with("Claim:\nAspirin reduces MI risk."));
    }

    #[tokio::test]
    async fn generated_claims_are_trimmed_and_identified() {
        let gateway = mock(serde_json::json!({
            "rules": [{"user_contains": ["Aspirin and infarction"], "response": "  Aspirin reduces MI risk.\n"}]
        }));
        let claim = generate_claim(&gateway, "m", 0.0, &article(), Polarity::SupportedBy)
            .await
            .unwrap();
        assert_eq!(claim.text, "Aspirin reduces MI risk.");
        assert_eq!(claim.id, "42-s");
        assert_eq!(claim.source_pmid, 42);
    }

    #[tokio::test]
    async fn whitespace_only_claims_are_rejected() {
        let gateway = mock(serde_json::json!({"default": "  \n "}));
        let err = generate_claim(&gateway, "m", 0.0, &article(), Polarity::RefutedBy)
            .await
            .unwrap_err();
        assert!(matches!(err, SynthError::EmptyClaim { pmid: 42, .. }));
    }

    #[tokio::test]
    async fn screening_verdicts_parse_or_mark_unscorable() {
        let gateway = mock(serde_json::json!({
            "rules": [
                {"user_contains": ["good claim"], "response": "<think>r</think><score>0</score>"},
                {"user_contains": ["bad claim"], "response": "no tags at all"}
            ]
        }));
        let scored = initial_verdict(&gateway, "m", 0.0, "good claim", &article())
            .await
            .unwrap();
        assert!(matches!(
            scored,
            VerdictOutcome::Scored(ref r) if r.score() == score(0)
        ));
        let unscorable = initial_verdict(&gateway, "m", 0.0, "bad claim", &article())
            .await
            .unwrap();
        assert!(matches!(unscorable, VerdictOutcome::Unscorable { .. }));
    }

    #[test]
    fn assembly_draws_the_rationale_from_an_agreeing_member() {
        let panel = [
            verdict("a", 1, "first"),
            verdict("b", 1, "second"),
            verdict("c", 2, "outlier"),
        ];
        let instance = assemble_instance(&claim(), &article(), &panel, 7).unwrap();
        assert_eq!(instance.score, score(1));
        assert!(instance.rationale == "first" || instance.rationale == "second");
        assert_ne!(instance.rationale, "outlier");
        assert!(instance.is_source_article);

        let replay = assemble_instance(&claim(), &article(), &panel, 7).unwrap();
        assert_eq!(instance, replay);
    }

    #[test]
    fn assembly_seed_changes_can_change_the_donor() {
        let panel = [
            verdict("a", 1, "first"),
            verdict("b", 1, "second"),
            verdict("c", 1, "third"),
        ];
        let donors: std::collections::BTreeSet<String> = (0..64)
            .map(|seed| {
                assemble_instance(&claim(), &article(), &panel, seed)
                    .unwrap()
                    .rationale
            })
            .collect();
        assert_eq!(donors.len(), 3, "64 seeds should reach all three donors");
    }

    #[test]
    fn assembly_drops_no_consensus_and_unscorable_panels() {
        let no_consensus = [
            verdict("a", 2, "x"),
            verdict("b", 2, "y"),
            verdict("c", 0, "z"),
        ];
        assert_eq!(
            assemble_instance(&claim(), &article(), &no_consensus, 0).unwrap_err(),
            DropReason::NoConsensus
        );

        let unscorable = [
            verdict("a", 2, "x"),
            PanelOutcome::Unscorable { model_id: "b".into() },
            verdict("c", 2, "y"),
        ];
        assert_eq!(
            assemble_instance(&claim(), &article(), &unscorable, 0).unwrap_err(),
            DropReason::UnscorablePanel
        );
        assert_eq!(DropReason::NoConsensus.as_str(), "no-consensus");
        assert_eq!(DropReason::UnscorablePanel.as_str(), "unscorable");
    }

    #[test]
    fn other_articles_clear_the_source_flag() {
        let other = Article {
            pmid: 99,
            title: "Other".into(),
            abstract_text: "Other abstract.".into(),
        };
        let report = VerificationReport::new("r", score(0)).unwrap();
        let instance = instance_from_screener(&claim(), &other, &report);
        assert!(!instance.is_source_article);
        assert_eq!(instance.pmid, 99);
    }

    #[test]
    fn stats_count_scores_labels_and_words() {
        let mk = |value: i64, text: &str, rationale: &str| TrainingInstance {
            claim: Claim {
                id: "1-s".into(),
                text: text.into(),
                source_pmid: 1,
                polarity: Polarity::SupportedBy,
            },
            pmid: 1,
            rationale: rationale.into(),
            score: score(value),
            is_source_article: true,
        };
        let stats = dataset_stats(&[mk(2, "a b c", "one two"), mk(0, "d", "three four five six")])
            .unwrap();
        assert_eq!(stats.n, 2);
        assert_eq!(stats.score_counts["2"], 1);
        assert_eq!(stats.score_counts["0"], 1);
        assert_eq!(stats.score_counts["-2"], 0);
        assert_eq!(stats.label_fractions.support, 0.5);
        assert_eq!(stats.label_fractions.nei, 0.5);
        assert_eq!(stats.label_fractions.contradict, 0.0);
        assert_eq!(stats.claim_words.min, 1);
        assert_eq!(stats.claim_words.max, 3);
        assert_eq!(stats.claim_words.mean, 2.0);
        assert_eq!(stats.rationale_words.mean, 3.0);
        assert_eq!(stats.reference_label_fractions.support, 0.383);
        assert!(matches!(
            dataset_stats(&[]),
            Err(SynthError::EmptyInstanceSet)
        ));
    }
}
