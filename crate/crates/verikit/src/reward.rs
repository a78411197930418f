//! The rule-based reward for verifier rollouts.
//!
//! Scoring is two-step: first the raw output must parse as the two-block
//! verifier format (anything else is worth -1.0, even if a score could be
//! salvaged from the text), then a well-formed prediction earns
//! `0.5 × (2 − |y_pred − y_true|)`. The five possible values are
//! {-1.0, -0.5, 0.0, 0.5, 1.0}, and 1.0 is earned exactly when the output is
//! well-formed and the predicted score equals the gold score.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::verdict::{parse_verification_output, LikertScore};

/// One of {-1.0, -0.5, 0.0, 0.5, 1.0}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RewardValue(f64);

impl RewardValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Scores one raw rollout against the gold score: malformed output earns
/// -1.0, a well-formed prediction earns `0.5 × (2 − |y_pred − y_true|)`.
pub fn reward(raw_output: &str, y_true: LikertScore) -> RewardValue {
    match parse_verification_output(raw_output) {
        Err(_) => RewardValue(-1.0),
        Ok(report) => {
            let distance = f64::from(report.score().distance(y_true));
            RewardValue(0.5 * (2.0 - distance))
        }
    }
}

/// Why a prediction/gold file pair could not be scored.
#[derive(Debug, thiserror::Error)]
pub enum RewardFileError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// The two files have different numbers of records.
    #[error("length mismatch: {predictions} predictions vs {golds} gold records")]
    LengthMismatch { predictions: usize, golds: usize },
    /// A gold line that is not a score record.
    #[error("gold line {line}: {message}")]
    Gold { line: usize, message: String },
}

/// Aggregate results of scoring a prediction file.
///
/// `mean` and `format_violation_rate` are `None` (JSON `null`) when there are
/// no records. The histogram buckets the five possible reward values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFileSummary {
    pub n: usize,
    pub mean: Option<f64>,
    pub histogram: RewardHistogram,
    pub format_violation_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardHistogram {
    #[serde(rename = "-1.0")]
    pub minus_one: usize,
    #[serde(rename = "-0.5")]
    pub minus_half: usize,
    #[serde(rename = "0.0")]
    pub zero: usize,
    #[serde(rename = "0.5")]
    pub half: usize,
    #[serde(rename = "1.0")]
    pub one: usize,
}

impl RewardHistogram {
    fn bump(&mut self, value: f64) {
        match value {
            -1.0 => self.minus_one += 1,
            -0.5 => self.minus_half += 1,
            0.0 => self.zero += 1,
            0.5 => self.half += 1,
            _ => self.one += 1,
        }
    }
}

/// Scores a prediction file against a gold file, line-aligned.
///
/// Prediction lines are raw model output encoded as JSON — either a JSON
/// string or an object `{"raw": "…"}`; a line that is not valid JSON is
/// treated as the raw output itself. Gold lines are either a bare integer or
/// an object `{"score": n}` with n in -2..=2. Both files may begin with one
/// JSONL header record (`{"schema": …}`), which is skipped. Mismatched
/// record counts are rejected; two empty files yield `n = 0` with null
/// aggregates.
pub fn score_file(predictions: &Path, gold: &Path) -> Result<ScoreFileSummary, RewardFileError> {
    let prediction_lines = data_lines(predictions)?;
    let gold_lines = data_lines(gold)?;
    if prediction_lines.len() != gold_lines.len() {
        return Err(RewardFileError::LengthMismatch {
            predictions: prediction_lines.len(),
            golds: gold_lines.len(),
        });
    }

    let mut histogram = RewardHistogram::default();
    let mut sum = 0f64;
    let mut violations = 0usize;
    for ((line_no, prediction), (_, gold_line)) in
        prediction_lines.iter().zip(&gold_lines)
    {
        let y_true = parse_gold_line(gold_line).map_err(|message| RewardFileError::Gold {
            line: *line_no,
            message,
        })?;
        let raw = prediction_raw_text(prediction);
        if parse_verification_output(&raw).is_err() {
            violations += 1;
        }
        let value = reward(&raw, y_true).value();
        histogram.bump(value);
        sum += value;
    }

    let n = gold_lines.len();
    Ok(ScoreFileSummary {
        n,
        mean: (n > 0).then(|| sum / n as f64),
        histogram,
        format_violation_rate: (n > 0).then(|| violations as f64 / n as f64),
    })
}

/// Reads nonempty lines with their 1-based numbers, dropping one leading
/// JSONL header record if present.
fn data_lines(path: &Path) -> Result<Vec<(usize, String)>, std::io::Error> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        lines.push((idx + 1, line));
    }
    if let Some((_, first)) = lines.first() {
        if crate::jsonl::is_header_line(first) {
            lines.remove(0);
        }
    }
    Ok(lines)
}

/// Extracts the raw model output from a prediction line.
fn prediction_raw_text(line: &str) -> String {
    match serde_json::from_str::<serde_json::Value>(line) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(serde_json::Value::Object(map)) => match map.get("raw").and_then(|v| v.as_str()) {
            Some(s) => s.to_owned(),
            None => line.to_owned(),
        },
        _ => line.to_owned(),
    }
}

fn parse_gold_line(line: &str) -> Result<LikertScore, String> {
    #[derive(Deserialize)]
    struct GoldRecord {
        score: LikertScore,
    }
    if let Ok(record) = serde_json::from_str::<GoldRecord>(line) {
        return Ok(record.score);
    }
    serde_json::from_str::<LikertScore>(line.trim())
        .map_err(|_| format!("expected an integer score in -2..=2 or {{\"score\": n}}, got {line:?}"))
}
