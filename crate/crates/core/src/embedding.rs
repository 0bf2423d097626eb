//! Document and query embedders.
//!
//! The default backend is a hashed tf-idf embedder: every token lands in
//! slot `fnv1a64(token) mod D` with weight `tf · ln(1 + N / (1 + df))`, and the
//! result is L2-normalized. It needs a corpus pass for the document
//! frequencies but no network, so every run is reproducible. The external
//! backend posts text to an embedding API and normalizes what comes back.

use std::collections::BTreeMap;
use std::env;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::{self, HttpError};
use crate::registry::ToolDocument;
use crate::tokens::tokenize;

pub const DEFAULT_DIMENSION: usize = 1024;
pub const MIN_DIMENSION: usize = 8;

pub const ENV_EMBED_ENDPOINT: &str = "RAGMCP_EMBED_ENDPOINT";
pub const ENV_EMBED_MODEL: &str = "RAGMCP_EMBED_MODEL";

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("empty corpus: the hashed tf-idf embedder needs at least one document")]
    EmptyCorpus,
    #[error("dimension must be at least {MIN_DIMENSION}, got {0}")]
    DimensionTooSmall(usize),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("external embedder is missing an endpoint (set {ENV_EMBED_ENDPOINT})")]
    MissingEndpoint,
    #[error("embedding transport error: {0}")]
    Transport(String),
    #[error("malformed embedding response: {0}")]
    MalformedResponse(String),
}

impl From<HttpError> for EmbeddingError {
    fn from(err: HttpError) -> Self {
        match err {
            HttpError::Transport(m) => EmbeddingError::Transport(m),
            HttpError::Malformed(m) => EmbeddingError::MalformedResponse(m),
        }
    }
}

/// Fixed-dimension vector; all zeros or unit L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn zeros(dimension: usize) -> Self {
        EmbeddingVector {
            values: vec![0.0; dimension],
        }
    }

    /// Scales `values` to unit norm. An all-zero input stays all-zero.
    pub fn normalized(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let values = if norm > 0.0 {
            values.into_iter().map(|v| (v / norm) as f32).collect()
        } else {
            vec![0.0; values.len()]
        };
        EmbeddingVector { values }
    }

    /// Wraps values as-is. Used for vectors that were normalized before being
    /// stored, such as index snapshots.
    pub fn from_raw(values: Vec<f32>) -> Self {
        EmbeddingVector { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }
}

/// Cosine similarity in `[-1, 1]`; 0 when either side is all-zero.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dimension() != b.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    Ok(cosine_unchecked(a.values(), b.values()))
}

pub(crate) fn cosine_unchecked(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// 64-bit FNV-1a over the UTF-8 bytes of `token`.
pub fn fnv1a64(token: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    token.bytes().fold(OFFSET, |hash, byte| {
        (hash ^ u64::from(byte)).wrapping_mul(PRIME)
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    HashedTfidf,
    ExternalApi,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_model: Option<String>,
}

fn default_dimension() -> usize {
    DEFAULT_DIMENSION
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            backend: Backend::HashedTfidf,
            dimension: DEFAULT_DIMENSION,
            api_endpoint: None,
            api_model: None,
        }
    }
}

impl EmbedderConfig {
    pub fn hashed(dimension: usize) -> Self {
        EmbedderConfig {
            dimension,
            ..Default::default()
        }
    }

    /// Fills a missing endpoint/model from `RAGMCP_EMBED_ENDPOINT` / `RAGMCP_EMBED_MODEL`.
    pub fn with_env(mut self) -> Self {
        if self.api_endpoint.is_none() {
            self.api_endpoint = env::var(ENV_EMBED_ENDPOINT).ok().filter(|v| !v.is_empty());
        }
        if self.api_model.is_none() {
            self.api_model = env::var(ENV_EMBED_MODEL).ok().filter(|v| !v.is_empty());
        }
        self
    }

    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dimension < MIN_DIMENSION {
            return Err(EmbeddingError::DimensionTooSmall(self.dimension));
        }
        Ok(())
    }
}

/// Hashed tf-idf state: corpus size and per-token document frequency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedTfIdf {
    dimension: usize,
    n_docs: u64,
    df: BTreeMap<String, u64>,
}

impl HashedTfIdf {
    pub fn fit<'a, I>(texts: I, dimension: usize) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if dimension < MIN_DIMENSION {
            return Err(EmbeddingError::DimensionTooSmall(dimension));
        }
        let mut df: BTreeMap<String, u64> = BTreeMap::new();
        let mut n_docs = 0u64;
        for text in texts {
            n_docs += 1;
            let mut seen: Vec<String> = tokenize(text);
            seen.sort_unstable();
            seen.dedup();
            for token in seen {
                *df.entry(token).or_default() += 1;
            }
        }
        if n_docs == 0 {
            return Err(EmbeddingError::EmptyCorpus);
        }
        Ok(HashedTfIdf {
            dimension,
            n_docs,
            df,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn n_docs(&self) -> u64 {
        self.n_docs
    }

    pub fn document_frequency(&self, token: &str) -> u64 {
        self.df.get(token).copied().unwrap_or(0)
    }

    pub fn idf(&self, token: &str) -> f64 {
        (1.0 + self.n_docs as f64 / (1.0 + self.document_frequency(token) as f64)).ln()
    }

    pub fn embed(&self, text: &str) -> EmbeddingVector {
        let tokens = tokenize(text);
        let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
        for token in &tokens {
            *tf.entry(token.as_str()).or_default() += 1;
        }
        // Sorted accumulation keeps colliding slots independent of token order.
        let mut slots = vec![0.0f64; self.dimension];
        for (token, count) in tf {
            let slot = (fnv1a64(token) % self.dimension as u64) as usize;
            slots[slot] += f64::from(count) * self.idf(token);
        }
        EmbeddingVector::normalized(slots)
    }
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: Vec<&'a str>,
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

/// Client for an embedding API answering `{"embeddings": [[...]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalEmbedder {
    endpoint: String,
    model: String,
    dimension: usize,
}

impl ExternalEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, dimension: usize) -> Self {
        ExternalEmbedder {
            endpoint: endpoint.into(),
            model: model.into(),
            dimension,
        }
    }

    pub fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let request = EmbedRequest {
            model: &self.model,
            input: texts.to_vec(),
        };
        let response: EmbedResponse = http::post_json(&self.endpoint, &request, http::DEFAULT_TIMEOUT)?;
        if response.embeddings.len() != texts.len() {
            return Err(EmbeddingError::MalformedResponse(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                response.embeddings.len()
            )));
        }
        response
            .embeddings
            .into_iter()
            .map(|values| {
                if values.len() != self.dimension {
                    return Err(EmbeddingError::MalformedResponse(format!(
                        "expected dimension {}, got {}",
                        self.dimension,
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(EmbeddingError::MalformedResponse("non-finite value".into()));
                }
                Ok(EmbeddingVector::normalized(values))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum Embedder {
    HashedTfidf(HashedTfIdf),
    ExternalApi(ExternalEmbedder),
}

impl Embedder {
    pub fn dimension(&self) -> usize {
        match self {
            Embedder::HashedTfidf(e) => e.dimension(),
            Embedder::ExternalApi(e) => e.dimension,
        }
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        match self {
            Embedder::HashedTfidf(e) => Ok(e.embed(text)),
            Embedder::ExternalApi(e) => {
                if text.is_empty() {
                    return Ok(EmbeddingVector::zeros(e.dimension));
                }
                Ok(e.embed_batch(&[text])?.remove(0))
            }
        }
    }

    pub fn embed_documents(&self, docs: &[ToolDocument]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        match self {
            Embedder::HashedTfidf(e) => Ok(crate::exec::map_slice(docs, |d| e.embed(&d.text))),
            Embedder::ExternalApi(e) => {
                let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
                if texts.is_empty() {
                    return Ok(Vec::new());
                }
                e.embed_batch(&texts)
            }
        }
    }
}

/// Builds an embedder for `documents`. The external backend needs no corpus
/// pass; its endpoint is only contacted on the first `embed`.
pub fn fit_corpus(documents: &[ToolDocument], config: &EmbedderConfig) -> Result<Embedder, EmbeddingError> {
    config.validate()?;
    match config.backend {
        Backend::HashedTfidf => Ok(Embedder::HashedTfidf(HashedTfIdf::fit(
            documents.iter().map(|d| d.text.as_str()),
            config.dimension,
        )?)),
        Backend::ExternalApi => {
            let config = config.clone().with_env();
            let endpoint = config.api_endpoint.ok_or(EmbeddingError::MissingEndpoint)?;
            let model = config.api_model.unwrap_or_default();
            Ok(Embedder::ExternalApi(ExternalEmbedder::new(endpoint, model, config.dimension)))
        }
    }
}
