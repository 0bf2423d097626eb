//! Service and command-line front end for the `ragmcp-core` retrieval pipeline.

pub mod config;
pub mod server;
pub mod stress;

use std::sync::Arc;

use ragmcp_core::selection::ExternalSelector;
use ragmcp_core::{LexicalSelector, Selector};

/// The chat-completion selector when `RAGMCP_SELECTOR_ENDPOINT` is set,
/// otherwise the lexical-overlap selector.
pub fn selector_from_env() -> Arc<dyn Selector> {
    match ExternalSelector::from_env() {
        Some(external) => Arc::new(external),
        None => Arc::new(LexicalSelector),
    }
}
