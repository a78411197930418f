//! Article storage, embedding indexes, and exact top-k cosine retrieval.
//!
//! Articles are ingested from JSONL (`{"pmid":…,"title":…,"abstract":…}`,
//! one object per line). Embeddings come either from a binary vector file
//! (see [`EmbeddingIndex::read_mfei`]) so that externally computed vectors
//! can be plugged in, or from the deterministic hashed bag-of-words fallback
//! ([`hashed_bow_embed`]) which needs no model at all. Retrieval is an exact
//! scan — no approximation — so results are reproducible and verifiable
//! against a brute-force oracle.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::types::Article;
use crate::fnv1a64;

/// What can go wrong while loading or querying corpus data.
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// A JSONL line that is not a valid article record (bad JSON, missing
    /// `pmid`/`title`/`abstract`, non-positive pmid, or a duplicate pmid).
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    /// A malformed binary embedding file.
    #[error("embedding file {path}: {message}")]
    Mfei { path: String, message: String },
    /// Query and index dimensions differ.
    #[error("dimension mismatch: index dim {index_dim}, query dim {query_dim}")]
    DimMismatch { index_dim: usize, query_dim: usize },
    /// Text with no tokens cannot be embedded.
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("remote embedding request failed: {0}")]
    Transport(String),
    /// The remote embedding endpoint answered without a usable vector.
    #[error("remote embedding response malformed: {0}")]
    BadResponse(String),
}

/// Immutable pmid-keyed article collection.
#[derive(Debug, Clone, Default)]
pub struct ArticleStore {
    articles: BTreeMap<u64, Article>,
    skipped_empty: usize,
}

impl ArticleStore {
    /// Builds a store from in-memory articles. Duplicates and empty
    /// titles/abstracts are rejected the same way [`load_articles`] rejects
    /// or skips them, except that here an empty field is an error rather
    /// than a skip (programmatic construction has no "dirty input" excuse).
    pub fn from_articles(articles: Vec<Article>) -> Result<ArticleStore, CorpusError> {
        let mut map = BTreeMap::new();
        for (i, article) in articles.into_iter().enumerate() {
            validate_article(&article, i + 1)?;
            if article.title.is_empty() || article.abstract_text.is_empty() {
                return Err(CorpusError::Schema {
                    line: i + 1,
                    message: format!("article {} has an empty title or abstract", article.pmid),
                });
            }
            insert_unique(&mut map, article, i + 1)?;
        }
        Ok(ArticleStore {
            articles: map,
            skipped_empty: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    /// How many input lines were skipped for empty titles/abstracts.
    pub fn skipped_empty(&self) -> usize {
        self.skipped_empty
    }

    pub fn get(&self, pmid: u64) -> Option<&Article> {
        self.articles.get(&pmid)
    }

    pub fn contains(&self, pmid: u64) -> bool {
        self.articles.contains_key(&pmid)
    }

    /// Articles in ascending pmid order.
    pub fn iter(&self) -> impl Iterator<Item = &Article> {
        self.articles.values()
    }
}

fn validate_article(article: &Article, line: usize) -> Result<(), CorpusError> {
    if article.pmid == 0 {
        return Err(CorpusError::Schema {
            line,
            message: "pmid must be positive".into(),
        });
    }
    Ok(())
}

fn insert_unique(
    map: &mut BTreeMap<u64, Article>,
    article: Article,
    line: usize,
) -> Result<(), CorpusError> {
    match map.entry(article.pmid) {
        Entry::Vacant(slot) => {
            slot.insert(article);
            Ok(())
        }
        Entry::Occupied(_) => Err(CorpusError::Schema {
            line,
            message: format!("duplicate pmid {}", article.pmid),
        }),
    }
}

/// Loads articles from a JSONL file. Lines whose title or abstract is empty
/// are skipped and counted ([`ArticleStore::skipped_empty`]); blank lines are
/// ignored; a line with missing keys, a non-positive pmid, or a pmid already
/// seen is an error.
pub fn load_articles(path: &Path) -> Result<ArticleStore, CorpusError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut map = BTreeMap::new();
    let mut skipped_empty = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let article: Article =
            serde_json::from_str(&line).map_err(|e| CorpusError::Schema {
                line: line_no,
                message: e.to_string(),
            })?;
        validate_article(&article, line_no)?;
        if article.title.is_empty() || article.abstract_text.is_empty() {
            skipped_empty += 1;
            continue;
        }
        insert_unique(&mut map, article, line_no)?;
    }
    Ok(ArticleStore {
        articles: map,
        skipped_empty,
    })
}

/// A pmid-keyed set of fixed-dimension vectors.
#[derive(Debug, Clone)]
pub struct EmbeddingIndex {
    dim: usize,
    vectors: BTreeMap<u64, Vec<f32>>,
}

const MFEI_MAGIC: &[u8; 4] = b"MFEI";

impl EmbeddingIndex {
    pub fn new(dim: usize) -> EmbeddingIndex {
        EmbeddingIndex {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, pmid: u64) -> Option<&[f32]> {
        self.vectors.get(&pmid).map(Vec::as_slice)
    }

    /// Pmids in ascending order.
    pub fn pmids(&self) -> impl Iterator<Item = u64> + '_ {
        self.vectors.keys().copied()
    }

    pub fn insert(&mut self, pmid: u64, vector: Vec<f32>) -> Result<(), CorpusError> {
        if vector.len() != self.dim {
            return Err(CorpusError::DimMismatch {
                index_dim: self.dim,
                query_dim: vector.len(),
            });
        }
        self.vectors.insert(pmid, vector);
        Ok(())
    }

    /// Checks that every indexed pmid has an article, returning the first
    /// offender otherwise.
    pub fn validate_against(&self, store: &ArticleStore) -> Result<(), CorpusError> {
        for pmid in self.pmids() {
            if !store.contains(pmid) {
                return Err(CorpusError::Schema {
                    line: 0,
                    message: format!("indexed pmid {pmid} has no article in the store"),
                });
            }
        }
        Ok(())
    }

    /// Reads the binary vector format: magic `MFEI`, little-endian `u32`
    /// dimension, `u64` record count, then per record a `u64` pmid followed
    /// by `dim` little-endian `f32` components. Truncation, trailing bytes,
    /// a zero dimension, or duplicate pmids are errors.
    pub fn read_mfei(path: &Path) -> Result<EmbeddingIndex, CorpusError> {
        let mfei_err = |message: String| CorpusError::Mfei {
            path: path.display().to_string(),
            message,
        };
        let mut reader = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        reader
            .read_exact(&mut magic)
            .map_err(|_| mfei_err("file too short for magic header".into()))?;
        if &magic != MFEI_MAGIC {
            return Err(mfei_err(format!("bad magic {magic:?}")));
        }
        let mut u32buf = [0u8; 4];
        reader
            .read_exact(&mut u32buf)
            .map_err(|_| mfei_err("truncated dimension field".into()))?;
        let dim = u32::from_le_bytes(u32buf) as usize;
        if dim == 0 {
            return Err(mfei_err("dimension must be positive".into()));
        }
        let mut u64buf = [0u8; 8];
        reader
            .read_exact(&mut u64buf)
            .map_err(|_| mfei_err("truncated count field".into()))?;
        let count = u64::from_le_bytes(u64buf);

        let mut index = EmbeddingIndex::new(dim);
        let mut component = [0u8; 4];
        for record in 0..count {
            reader
                .read_exact(&mut u64buf)
                .map_err(|_| mfei_err(format!("truncated pmid in record {record}")))?;
            let pmid = u64::from_le_bytes(u64buf);
            let mut vector = Vec::with_capacity(dim);
            for _ in 0..dim {
                reader
                    .read_exact(&mut component)
                    .map_err(|_| mfei_err(format!("truncated vector in record {record}")))?;
                vector.push(f32::from_le_bytes(component));
            }
            if index.vectors.insert(pmid, vector).is_some() {
                return Err(mfei_err(format!("duplicate pmid {pmid}")));
            }
        }
        let mut trailing = [0u8; 1];
        if reader.read(&mut trailing)? != 0 {
            return Err(mfei_err("trailing bytes after final record".into()));
        }
        Ok(index)
    }

    /// Writes the binary format read by [`EmbeddingIndex::read_mfei`].
    /// Records are emitted in ascending pmid order, so equal indexes produce
    /// byte-identical files.
    pub fn write_mfei(&self, path: &Path) -> Result<(), CorpusError> {
        let mut writer = BufWriter::new(File::create(path)?);
        writer.write_all(MFEI_MAGIC)?;
        writer.write_all(&(self.dim as u32).to_le_bytes())?;
        writer.write_all(&(self.vectors.len() as u64).to_le_bytes())?;
        for (pmid, vector) in &self.vectors {
            writer.write_all(&pmid.to_le_bytes())?;
            for component in vector {
                writer.write_all(&component.to_le_bytes())?;
            }
        }
        writer.flush()?;
        Ok(())
    }
}

/// Embeds `text` as an L2-normalized hashed bag of words: lowercase, split on
/// non-alphanumeric characters, and add 1 to bucket `fnv1a64(token) % dim`
/// per occurrence. Pure — equal inputs give bit-equal vectors. Text with no
/// tokens is an [`CorpusError::EmptyText`] error.
pub fn hashed_bow_embed(text: &str, dim: usize) -> Result<Vec<f32>, CorpusError> {
    if dim == 0 {
        return Err(CorpusError::DimMismatch {
            index_dim: 0,
            query_dim: 0,
        });
    }
    let mut vector = vec![0f32; dim];
    let mut any = false;
    for token in text.split(|c: char| !c.is_alphanumeric()) {
        if token.is_empty() {
            continue;
        }
        let token = token.to_lowercase();
        let bucket = (fnv1a64(token.as_bytes()) % dim as u64) as usize;
        vector[bucket] += 1.0;
        any = true;
    }
    if !any {
        return Err(CorpusError::EmptyText);
    }
    let norm = vector.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    for component in &mut vector {
        *component = (f64::from(*component) / norm) as f32;
    }
    Ok(vector)
}

/// A client for an embedding endpoint speaking the common
/// `POST {base_url}/embeddings` protocol: request
/// `{"model": …, "input": …}`, response `{"data":[{"embedding":[…]}]}`.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    client: reqwest::Client,
    base_url: String,
    model: String,
    api_key: Option<String>,
}

impl RemoteEmbedder {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> RemoteEmbedder {
        RemoteEmbedder {
            client: reqwest::Client::new(),
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            model: model.into(),
            api_key,
        }
    }

    pub async fn embed(&self, text: &str) -> Result<Vec<f32>, CorpusError> {
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyText);
        }
        let url = format!("{}/embeddings", self.base_url);
        let mut request = self
            .client
            .post(&url)
            .json(&serde_json::json!({ "model": self.model, "input": text }));
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .await
            .map_err(|e| CorpusError::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(CorpusError::Transport(format!("HTTP {status} from {url}")));
        }
        #[derive(Deserialize)]
        struct EmbeddingData {
            embedding: Vec<f32>,
        }
        #[derive(Deserialize)]
        struct EmbeddingResponse {
            data: Vec<EmbeddingData>,
        }
        let body: EmbeddingResponse = response
            .json()
            .await
            .map_err(|e| CorpusError::BadResponse(e.to_string()))?;
        body.data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| CorpusError::BadResponse("empty data array".into()))
    }
}

/// The embedding backend used for claims and, when no vector file is
/// supplied, for articles.
#[derive(Debug, Clone)]
pub enum Embedder {
    /// The deterministic lexical fallback at a fixed dimension.
    Fallback { dim: usize },
    /// A remote embedding endpoint.
    Remote(RemoteEmbedder),
}

impl Embedder {
    pub async fn embed(&self, text: &str) -> Result<Vec<f32>, CorpusError> {
        match self {
            Embedder::Fallback { dim } => hashed_bow_embed(text, *dim),
            Embedder::Remote(remote) => remote.embed(text).await,
        }
    }
}

/// Cosine similarity accumulated in f64. Zero-norm inputs yield 0.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0f64;
    let mut norm_a = 0f64;
    let mut norm_b = 0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += f64::from(x) * f64::from(y);
        norm_a += f64::from(x) * f64::from(x);
        norm_b += f64::from(y) * f64::from(y);
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    dot / (norm_a.sqrt() * norm_b.sqrt())
}

/// Exact top-k retrieval: the `min(k, |index|)` entries with the highest
/// cosine similarity to `query`, ties broken by ascending pmid.
pub fn top_k(
    index: &EmbeddingIndex,
    query: &[f32],
    k: usize,
) -> Result<Vec<(u64, f64)>, CorpusError> {
    if query.len() != index.dim {
        return Err(CorpusError::DimMismatch {
            index_dim: index.dim,
            query_dim: query.len(),
        });
    }
    let mut scored: Vec<(u64, f64)> = index
        .vectors
        .iter()
        .map(|(&pmid, vector)| (pmid, cosine(query, vector)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}
