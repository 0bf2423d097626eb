//! HTTP service. Readers load the current [`Catalog`] snapshot without
//! locking; registrations serialize through one writer that builds a new
//! catalog and swaps it in before acknowledging.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use arc_swap::ArcSwap;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ragmcp_core::registry::RegistryError;
use ragmcp_core::selection::{validate_candidate, SelectionError, ValidationOutcome};
use ragmcp_core::{Catalog, CatalogError, McpSchema, RetrieveRequest, RetrieveResponse, Selector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::Mutex;

use crate::config::{self, ServeConfig};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn internal(err: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, err.to_string())
    }
}

impl From<CatalogError> for ApiError {
    fn from(err: CatalogError) -> Self {
        let status = match &err {
            CatalogError::Registry(RegistryError::DuplicateId(_)) => StatusCode::CONFLICT,
            CatalogError::Registry(_) => StatusCode::BAD_REQUEST,
            CatalogError::Selection(SelectionError::EmptyRegistry) => StatusCode::CONFLICT,
            CatalogError::Selection(SelectionError::ZeroK) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Where registry changes are written back, if anywhere.
#[derive(Debug, Clone, Default)]
pub struct Persistence {
    pub registry: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Default)]
struct Counters {
    requests: AtomicU64,
    retrieves: AtomicU64,
    retrieve_errors: AtomicU64,
    retrieve_micros: AtomicU64,
    registrations: AtomicU64,
    removals: AtomicU64,
    validations: AtomicU64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct MetricsSnapshot {
    pub servers: usize,
    pub requests: u64,
    pub retrieves: u64,
    pub retrieve_errors: u64,
    pub registrations: u64,
    pub removals: u64,
    pub validations: u64,
    pub avg_retrieve_latency_ms: f64,
}

pub struct AppState {
    catalog: ArcSwap<Catalog>,
    writer: Mutex<()>,
    selector: Arc<dyn Selector>,
    persistence: Persistence,
    counters: Counters,
}

impl AppState {
    pub fn new(catalog: Catalog, selector: Arc<dyn Selector>, persistence: Persistence) -> Arc<Self> {
        Arc::new(AppState {
            catalog: ArcSwap::from_pointee(catalog),
            writer: Mutex::new(()),
            selector,
            persistence,
            counters: Counters::default(),
        })
    }

    pub fn catalog(&self) -> Arc<Catalog> {
        self.catalog.load_full()
    }

    fn persist(&self, catalog: &Catalog) -> anyhow::Result<()> {
        if let Some(path) = &self.persistence.registry {
            config::write_registry(catalog.registry(), path)?;
        }
        if let Some(path) = &self.persistence.snapshot {
            config::write_snapshot(catalog, path)?;
        }
        Ok(())
    }

    /// Runs `change` on the current catalog under the writer lock and
    /// publishes the result.
    async fn publish<F, T>(self: &Arc<Self>, change: F) -> ApiResult<(Arc<Catalog>, T)>
    where
        F: FnOnce(&Catalog) -> ApiResult<(Catalog, T)> + Send + 'static,
        T: Send + 'static,
    {
        let _guard = self.writer.lock().await;
        let state = Arc::clone(self);
        tokio::task::spawn_blocking(move || {
            let (next, extra) = change(&state.catalog())?;
            let next = Arc::new(next);
            state.persist(&next).map_err(ApiError::internal)?;
            state.catalog.store(Arc::clone(&next));
            Ok((next, extra))
        })
        .await
        .map_err(ApiError::internal)?
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/servers", get(list_servers).post(register))
        .route("/servers/{id}", get(get_server).delete(remove))
        .route("/retrieve", post(retrieve))
        .route("/validate/{id}", post(validate))
        .route("/metrics", get(metrics))
        .with_state(state)
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Value> {
    state.counters.requests.fetch_add(1, Ordering::Relaxed);
    Json(json!({ "status": "ok", "servers": state.catalog().len() }))
}

async fn list_servers(State(state): State<Arc<AppState>>) -> Json<Value> {
    state.counters.requests.fetch_add(1, Ordering::Relaxed);
    let catalog = state.catalog();
    let ids: Vec<&str> = catalog.registry().ids().collect();
    Json(json!({ "servers": ids }))
}

async fn get_server(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<McpSchema>> {
    state.counters.requests.fetch_add(1, Ordering::Relaxed);
    let catalog = state.catalog();
    let schema = catalog
        .registry()
        .get(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown server {id:?}")))?;
    Ok(Json(schema.clone()))
}

#[derive(Debug, Default, Deserialize)]
struct RegisterParams {
    #[serde(default)]
    replace: bool,
}

async fn register(
    State(state): State<Arc<AppState>>,
    Query(params): Query<RegisterParams>,
    Json(schema): Json<McpSchema>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    state.counters.requests.fetch_add(1, Ordering::Relaxed);
    let id = schema.id.clone();
    let (next, replaced) = state
        .publish(move |current| {
            let replaced = current.registry().contains(&schema.id);
            Ok((current.with_schema(schema, params.replace)?, replaced))
        })
        .await?;
    state.counters.registrations.fetch_add(1, Ordering::Relaxed);
    let status = if replaced { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(json!({ "id": id, "servers": next.len() }))))
}

async fn remove(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    state.counters.requests.fetch_add(1, Ordering::Relaxed);
    let target = id.clone();
    let (next, ()) = state
        .publish(move |current| match current.without(&target) {
            Some(next) => Ok((next?, ())),
            None => Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown server {target:?}"))),
        })
        .await?;
    state.counters.removals.fetch_add(1, Ordering::Relaxed);
    Ok(Json(json!({ "id": id, "servers": next.len() })))
}

async fn retrieve(
    State(state): State<Arc<AppState>>,
    Json(request): Json<RetrieveRequest>,
) -> ApiResult<Json<RetrieveResponse>> {
    state.counters.requests.fetch_add(1, Ordering::Relaxed);
    let started = Instant::now();
    let catalog = state.catalog();
    let selector = Arc::clone(&state.selector);
    let result = tokio::task::spawn_blocking(move || catalog.retrieve(&request, selector.as_ref()))
        .await
        .map_err(ApiError::internal)?;
    let counters = &state.counters;
    counters.retrieves.fetch_add(1, Ordering::Relaxed);
    counters.retrieve_micros.fetch_add(started.elapsed().as_micros() as u64, Ordering::Relaxed);
    match result {
        Ok(response) => Ok(Json(response)),
        Err(err) => {
            counters.retrieve_errors.fetch_add(1, Ordering::Relaxed);
            Err(err.into())
        }
    }
}

#[derive(Debug, Default, Deserialize)]
struct ValidateParams {
    #[serde(default)]
    live: bool,
}

async fn validate(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(params): Query<ValidateParams>,
) -> ApiResult<Json<ValidationOutcome>> {
    state.counters.requests.fetch_add(1, Ordering::Relaxed);
    let catalog = state.catalog();
    let schema = catalog
        .registry()
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown server {id:?}")))?;
    let outcome = tokio::task::spawn_blocking(move || validate_candidate(&schema, params.live))
        .await
        .map_err(ApiError::internal)?;
    state.counters.validations.fetch_add(1, Ordering::Relaxed);
    Ok(Json(outcome))
}

async fn metrics(State(state): State<Arc<AppState>>) -> Json<MetricsSnapshot> {
    let c = &state.counters;
    let requests = c.requests.fetch_add(1, Ordering::Relaxed) + 1;
    let retrieves = c.retrieves.load(Ordering::Relaxed);
    let micros = c.retrieve_micros.load(Ordering::Relaxed);
    let avg = if retrieves == 0 { 0.0 } else { micros as f64 / retrieves as f64 / 1000.0 };
    Json(MetricsSnapshot {
        servers: state.catalog().len(),
        requests,
        retrieves,
        retrieve_errors: c.retrieve_errors.load(Ordering::Relaxed),
        registrations: c.registrations.load(Ordering::Relaxed),
        removals: c.removals.load(Ordering::Relaxed),
        validations: c.validations.load(Ordering::Relaxed),
        avg_retrieve_latency_ms: avg,
    })
}

/// Loads the registry, binds, prints `listening on <addr>` and serves until Ctrl-C.
pub async fn serve(config: ServeConfig, selector: Arc<dyn Selector>) -> anyhow::Result<()> {
    let registry = config::read_registry(&config.registry)?;
    let snapshot = config.snapshot.clone();
    let embedder = config.embedder.clone();
    let catalog = tokio::task::spawn_blocking(move || {
        config::open_catalog(registry, &embedder, snapshot.as_deref(), config.persist)
    })
    .await??;
    let persistence = if config.persist {
        Persistence { registry: Some(config.registry.clone()), snapshot: config.snapshot.clone() }
    } else {
        Persistence::default()
    };
    let listener = TcpListener::bind(&config.bind).await.with_context(|| format!("binding {}", config.bind))?;
    println!("listening on {}", listener.local_addr()?);
    let app = router(AppState::new(catalog, selector, persistence));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
