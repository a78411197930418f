//! verikit — building and auditing biomedical claim-verification datasets.
//!
//! The crate covers the full desk-scale lifecycle of a claim-verification
//! corpus:
//!
//! - **Domain core** ([`verdict`], [`types`], [`prompts`]): the five-point
//!   verdict scale, the `<think>…</think><score>…</score>` output format,
//!   three-way label projections, and the fixed instruction blocks sent to
//!   models.
//! - **Gateway** ([`gateway`]): one chat-completions client for every model
//!   call, with retries, bounded-parallelism batching, append-only
//!   checkpoints, and a deterministic scripted mock for offline runs.
//! - **Corpus** ([`corpus`]): article storage, embedding indexes, and exact
//!   top-k cosine retrieval.
//! - **Synthesis** ([`synthgen`]): claim generation, screening, panel
//!   consensus, and training-instance assembly.
//! - **Reward** ([`reward`]): the rule-based reward for verifier rollouts.
//! - **Benchmark** ([`bench`]): QA-to-claim conversion, dataset adapters,
//!   accuracy evaluation, and bootstrap confidence intervals.
//! - **Audits** ([`citeaudit`], [`guideaudit`]): citation-attribution metrics
//!   over generated answers, and misattribution flagging over annotated
//!   guideline documents.
//! - **Orchestration** ([`config`], [`pipeline`], [`manifest`], [`jsonl`]):
//!   configuration, resumable stage wiring, and run accounting.

pub mod bench;
pub mod citeaudit;
pub mod config;
pub mod corpus;
pub mod gateway;
pub mod guideaudit;
pub mod jsonl;
pub mod manifest;
pub mod pipeline;
pub mod prompts;
pub mod reward;
pub mod synthgen;
pub mod types;
pub mod verdict;

pub use types::{Article, Claim, Polarity};
pub use verdict::{
    coarse_label, is_supported, parse_verification_output, LikertScore, ThreeWayLabel,
    VerdictParseError, VerificationReport,
};

/// FNV-1a 64-bit hash: the crate's one stable, dependency-free hash. Used
/// wherever a reproducible mapping from text to integers is needed (embedding
/// buckets, derived sub-seeds, config digests); never for security.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}

/// Derives a child seed from a base seed and a textual scope, so that
/// different random decisions in one run never share an RNG stream.
pub(crate) fn derive_seed(base: u64, scope: &str) -> u64 {
    let mut bytes = Vec::with_capacity(8 + scope.len());
    bytes.extend_from_slice(&base.to_le_bytes());
    bytes.extend_from_slice(scope.as_bytes());
    fnv1a64(&bytes)
}
