//! The five-point verdict scale, the verifier output format, and the
//! projections from fine-grained scores onto the three-way label taxonomy.
//!
//! A verifier is expected to answer with exactly two blocks:
//!
//! ```text
//! <think>step-by-step reasoning</think>
//! <score>-2 | -1 | 0 | 1 | 2</score>
//! ```
//!
//! [`parse_verification_output`] is the single authority on what counts as a
//! well-formed answer; everything downstream (screening, panel consensus,
//! rewards, evaluation) goes through it.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A verdict on the five-point scale: -2 (strong contradiction) to
/// +2 (strong agreement).
///
/// The inner value is guaranteed to be one of the five integers; arbitrary
/// integers cannot be smuggled in through construction or deserialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LikertScore(i8);

impl LikertScore {
    pub const STRONG_CONTRADICTION: LikertScore = LikertScore(-2);
    pub const PARTIAL_CONTRADICTION: LikertScore = LikertScore(-1);
    pub const NEUTRAL: LikertScore = LikertScore(0);
    pub const PARTIAL_AGREEMENT: LikertScore = LikertScore(1);
    pub const STRONG_AGREEMENT: LikertScore = LikertScore(2);

    /// All five scores in ascending order, for exhaustive sweeps.
    pub const ALL: [LikertScore; 5] = [
        LikertScore(-2),
        LikertScore(-1),
        LikertScore(0),
        LikertScore(1),
        LikertScore(2),
    ];

    /// Builds a score from an integer, rejecting anything outside -2..=2.
    pub fn new(value: i64) -> Option<LikertScore> {
        if (-2..=2).contains(&value) {
            Some(LikertScore(value as i8))
        } else {
            None
        }
    }

    /// The raw integer in -2..=2.
    pub fn value(self) -> i8 {
        self.0
    }

    /// |self - other| on the underlying integers (0..=4).
    pub fn distance(self, other: LikertScore) -> u8 {
        (self.0 - other.0).unsigned_abs()
    }
}

impl fmt::Display for LikertScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for LikertScore {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_i8(self.0)
    }
}

impl<'de> Deserialize<'de> for LikertScore {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = i64::deserialize(deserializer)?;
        LikertScore::new(raw)
            .ok_or_else(|| D::Error::custom(format!("score {raw} outside -2..=2")))
    }
}

/// The coarse three-way label taxonomy used by the benchmark and audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThreeWayLabel {
    Support,
    Nei,
    Contradict,
}

impl fmt::Display for ThreeWayLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ThreeWayLabel::Support => "support",
            ThreeWayLabel::Nei => "nei",
            ThreeWayLabel::Contradict => "contradict",
        };
        f.write_str(name)
    }
}

/// Projects a five-point score onto the three-way taxonomy:
/// {+2, +1} → Support, {0} → NEI, {-1, -2} → Contradict.
pub fn coarse_label(score: LikertScore) -> ThreeWayLabel {
    match score.value() {
        1 | 2 => ThreeWayLabel::Support,
        0 => ThreeWayLabel::Nei,
        _ => ThreeWayLabel::Contradict,
    }
}

/// True iff the score means the claim is at least partially supported
/// (score +1 or +2). Equivalent to `coarse_label(score) == Support`.
pub fn is_supported(score: LikertScore) -> bool {
    score.value() > 0
}

/// A parsed verifier answer: a nonempty rationale plus a five-point score.
///
/// Invariants enforced on construction: the rationale is trimmed, nonempty,
/// and free of the one delimiter that would cut it short on re-parse
/// (`</think>`), so [`VerificationReport::render`] followed by
/// [`parse_verification_output`] always round-trips exactly. Other tag-like
/// substrings are legitimate rationale prose: parsing is single-pass, so they
/// never function as delimiters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    rationale: String,
    score: LikertScore,
}

impl VerificationReport {
    /// Builds a report, trimming the rationale and rejecting rationales that
    /// are empty or contain `</think>`.
    pub fn new(
        rationale: impl Into<String>,
        score: LikertScore,
    ) -> Result<VerificationReport, VerdictParseError> {
        let rationale = rationale.into().trim().to_owned();
        if rationale.is_empty() {
            return Err(VerdictParseError::Format("empty rationale"));
        }
        if rationale.contains("</think>") {
            return Err(VerdictParseError::Format(
                "rationale contains the think-block close delimiter",
            ));
        }
        Ok(VerificationReport { rationale, score })
    }

    pub fn rationale(&self) -> &str {
        &self.rationale
    }

    pub fn score(&self) -> LikertScore {
        self.score
    }

    /// Renders the report in the two-block output format. The result parses
    /// back to an identical report.
    pub fn render(&self) -> String {
        format!(
            "<think>{}</think>\n<score>{}</score>",
            self.rationale, self.score
        )
    }
}

/// Why a raw verifier answer was rejected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerdictParseError {
    /// The two-block structure is missing, duplicated, mis-ordered, or
    /// followed by non-whitespace trailing content.
    #[error("malformed verifier output: {0}")]
    Format(&'static str),
    /// The score block does not contain an integer in -2..=2.
    #[error("score block is not an integer in -2..=2: {0:?}")]
    Score(String),
}

/// Parses a raw verifier answer into a [`VerificationReport`].
///
/// The accepted grammar is a single `<think>…</think>` block followed by a
/// single `<score>…</score>` block. Whitespace before, between, and after the
/// blocks is tolerated (models emit stray newlines); anything else is a
/// [`VerdictParseError::Format`]. Tag matching is case-sensitive and
/// single-pass: the first `</think>` closes the rationale, so score-like text
/// inside the rationale stays rationale. The score block may contain
/// surrounding whitespace and one leading `+`; any integer outside -2..=2 is
/// a [`VerdictParseError::Score`].
///
/// Never panics, for arbitrary byte content.
pub fn parse_verification_output(raw: &str) -> Result<VerificationReport, VerdictParseError> {
    let rest = raw.trim_start();
    let rest = rest
        .strip_prefix("<think>")
        .ok_or(VerdictParseError::Format("missing <think> block"))?;
    let (rationale, rest) = rest
        .split_once("</think>")
        .ok_or(VerdictParseError::Format("unterminated <think> block"))?;
    let rest = rest.trim_start();
    let rest = rest
        .strip_prefix("<score>")
        .ok_or(VerdictParseError::Format("missing <score> block"))?;
    let (score_text, rest) = rest
        .split_once("</score>")
        .ok_or(VerdictParseError::Format("unterminated <score> block"))?;
    if !rest.trim().is_empty() {
        return Err(VerdictParseError::Format(
            "trailing content after <score> block",
        ));
    }
    let score = parse_score(score_text)?;
    VerificationReport::new(rationale, score)
}

fn parse_score(text: &str) -> Result<LikertScore, VerdictParseError> {
    let trimmed = text.trim();
    let digits = trimmed.strip_prefix('+').unwrap_or(trimmed);
    digits
        .parse::<i64>()
        .ok()
        .and_then(LikertScore::new)
        .ok_or_else(|| VerdictParseError::Score(trimmed.to_owned()))
}
