//! Retrieval-augmented selection of MCP servers.
//!
//! Schemas are loaded into a [`registry::Registry`], rendered to canonical
//! documents, embedded ([`embedding`]) and stored in an exact top-k
//! [`index::VectorIndex`]. [`selection`] implements the blank-conditioning,
//! keyword-match and retrieval strategies on top of that, and [`harness`]
//! runs seeded stress sweeps comparing them.

pub mod catalog;
pub mod embedding;
pub mod exec;
pub mod harness;
pub mod http;
pub mod index;
pub mod registry;
pub mod selection;
pub mod tokens;

pub use catalog::{Catalog, CatalogError, RetrieveRequest, RetrieveResponse, RetrievedCandidate};
pub use embedding::{cosine, fit_corpus, Embedder, EmbedderConfig, EmbeddingVector};
pub use exec::ExecMode;
pub use index::{RankedCandidate, VectorIndex};
pub use registry::{canonical_document, load_registry, McpSchema, Registry, ToolDocument};
pub use selection::{
    build_prompt, run_selection, select_candidates, validate_candidate, LexicalSelector, Selector, Strategy,
    StrategyKind,
};
pub use tokens::{count_tokens, tokenize, TokenCount};
