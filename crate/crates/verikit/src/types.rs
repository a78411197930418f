//! Shared domain records: articles and claims, with their canonical JSON
//! field names (`pmid`, `title`, `abstract`, `id`, `text`, `source_pmid`,
//! `polarity`) used by every pipeline file.

use serde::{Deserialize, Serialize};

/// An article: identifier plus the title/abstract pair used as verification
/// evidence. `pmid` must be positive; corpus-loaded articles additionally
/// have nonempty titles and abstracts (enforced at load).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub pmid: u64,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
}

impl Article {
    /// The evidence text sent to models: `Title: …\nAbstract: …`.
    pub fn prompt_text(&self) -> String {
        format!("Title: {}\nAbstract: {}", self.title, self.abstract_text)
    }
}

/// Whether a claim was generated to be supported or refuted by its source
/// article.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    SupportedBy,
    RefutedBy,
}

/// A standalone declarative statement tied to the article it was generated
/// from. `text` is trimmed and nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub text: String,
    pub source_pmid: u64,
    pub polarity: Polarity,
}
