//! Minimal blocking JSON-over-HTTP client shared by the external embedder,
//! the external selector and live validation probes.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

pub fn post_json<B: Serialize, T: DeserializeOwned>(
    url: &str,
    body: &B,
    timeout: Duration,
) -> Result<T, HttpError> {
    let config = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build();
    let agent = ureq::Agent::new_with_config(config);
    let mut response = agent
        .post(url)
        .send_json(body)
        .map_err(|e| HttpError::Transport(e.to_string()))?;
    response
        .body_mut()
        .read_json::<T>()
        .map_err(|e| HttpError::Malformed(e.to_string()))
}
