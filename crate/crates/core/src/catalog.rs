//! An immutable registry + embedder + index triple, and the retrieve request
//! flow built on it. The gateway publishes one `Catalog` per snapshot; the
//! CLI and tests call the same [`Catalog::retrieve`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{fit_corpus, Embedder, EmbedderConfig, EmbeddingError};
use crate::exec::{self, ExecMode};
use crate::index::{rank_order, IndexError, VectorIndex};
use crate::registry::{McpSchema, Registry, RegistryError};
use crate::selection::{
    run_selection, SelectionError, Selector, Strategy, StrategyKind, ValidationMode, ValidationStatus,
};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("index snapshot does not match the registry: {0}")]
    SnapshotMismatch(String),
}

#[derive(Debug, Clone)]
pub struct Catalog {
    registry: Registry,
    config: EmbedderConfig,
    embedder: Option<Embedder>,
    index: VectorIndex,
}

impl Catalog {
    pub fn build(registry: Registry, config: &EmbedderConfig) -> Result<Self, CatalogError> {
        Catalog::build_with(ExecMode::default(), registry, config)
    }

    /// Fits the embedder on the registry documents and indexes every schema.
    /// An empty registry yields an empty catalog with no embedder.
    pub fn build_with(mode: ExecMode, registry: Registry, config: &EmbedderConfig) -> Result<Self, CatalogError> {
        config.validate()?;
        if registry.is_empty() {
            let index = VectorIndex::new(config.dimension);
            return Ok(Catalog { registry, config: config.clone(), embedder: None, index });
        }
        let docs = registry.documents();
        let embedder = fit_corpus(&docs, config)?;
        let vectors = match &embedder {
            Embedder::HashedTfidf(e) => exec::map_slice_with(mode, &docs, |d| e.embed(&d.text)),
            other => other.embed_documents(&docs)?,
        };
        let index = VectorIndex::from_entries(
            config.dimension,
            docs.into_iter().map(|d| d.schema_id).zip(vectors),
        )?;
        Ok(Catalog { registry, config: config.clone(), embedder: Some(embedder), index })
    }

    /// Rebuilds the embedder from the registry but takes vectors from a
    /// previously written index snapshot.
    pub fn with_index(registry: Registry, config: &EmbedderConfig, index: VectorIndex) -> Result<Self, CatalogError> {
        config.validate()?;
        if index.dimension() != config.dimension {
            return Err(CatalogError::SnapshotMismatch(format!(
                "dimension {} vs configured {}",
                index.dimension(),
                config.dimension
            )));
        }
        let mut ids: Vec<&str> = registry.ids().collect();
        ids.sort_unstable();
        if ids != index.ids().iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(CatalogError::SnapshotMismatch("id sets differ".into()));
        }
        let embedder = if registry.is_empty() {
            None
        } else {
            Some(fit_corpus(&registry.documents(), config)?)
        };
        Ok(Catalog { registry, config: config.clone(), embedder, index })
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn embedder(&self) -> Option<&Embedder> {
        self.embedder.as_ref()
    }

    pub fn config(&self) -> &EmbedderConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.registry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registry.is_empty()
    }

    /// New catalog including `schema`. Document frequencies change with the
    /// corpus, so every vector is recomputed; the result equals a catalog
    /// built from scratch on the new registry.
    pub fn with_schema(&self, schema: McpSchema, replace: bool) -> Result<Self, CatalogError> {
        let registry = self.registry.with_schema(schema, replace)?;
        Catalog::build(registry, &self.config)
    }

    /// New catalog without `id`, or `None` when absent.
    pub fn without(&self, id: &str) -> Option<Result<Self, CatalogError>> {
        let registry = self.registry.without(id)?;
        Some(Catalog::build(registry, &self.config))
    }

    pub fn retrieve(&self, request: &RetrieveRequest, selector: &dyn Selector) -> Result<RetrieveResponse, CatalogError> {
        let embedder = self.embedder.as_ref().ok_or(SelectionError::EmptyRegistry)?;
        let strategy = Strategy { kind: request.strategy, k: request.k };
        let validation = if request.validate { ValidationMode::SchemaOnly } else { ValidationMode::Off };
        let result = run_selection(strategy, &request.query, &self.registry, &self.index, embedder, selector, validation)?;
        let mut candidates: Vec<RetrievedCandidate> = result
            .presented
            .iter()
            .zip(&result.scores)
            .map(|(id, &score)| RetrievedCandidate {
                schema_id: id.clone(),
                score,
                validation: result
                    .validation
                    .iter()
                    .find(|v| &v.schema_id == id)
                    .map(|v| v.status)
                    .unwrap_or(ValidationStatus::Skipped),
            })
            .collect();
        candidates.sort_by(|a, b| rank_order(a.score, &a.schema_id, b.score, &b.schema_id));
        Ok(RetrieveResponse {
            candidates,
            chosen: result.chosen,
            prompt_text: result.prompt_text,
            prompt_tokens: result.prompt_tokens,
        })
    }
}

fn default_k() -> usize {
    1
}

fn default_strategy() -> StrategyKind {
    StrategyKind::RagMcp
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrieveRequest {
    pub query: String,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_strategy")]
    pub strategy: StrategyKind,
    /// Schema-level validation of the retrieved candidates.
    #[serde(default = "default_true")]
    pub validate: bool,
}

impl RetrieveRequest {
    pub fn new(query: impl Into<String>, k: usize) -> Self {
        RetrieveRequest { query: query.into(), k, strategy: StrategyKind::RagMcp, validate: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedCandidate {
    pub schema_id: String,
    pub score: f64,
    pub validation: ValidationStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieveResponse {
    /// Sorted by score descending, then id ascending.
    pub candidates: Vec<RetrievedCandidate>,
    pub chosen: Option<String>,
    pub prompt_text: String,
    pub prompt_tokens: u64,
}
