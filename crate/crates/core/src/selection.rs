//! Candidate selection strategies, validation probes, prompt construction and
//! the selector abstraction standing in for the LLM.

use std::collections::HashSet;
use std::env;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::embedding::{Embedder, EmbeddingError};
use crate::http::{self, HttpError};
use crate::index::{IndexError, VectorIndex};
use crate::registry::{canonical_document, McpSchema, ParamKind, Registry, ToolDef};
use crate::tokens::{count_tokens, tokenize};

pub const ENV_SELECTOR_ENDPOINT: &str = "RAGMCP_SELECTOR_ENDPOINT";
pub const ENV_SELECTOR_MODEL: &str = "RAGMCP_SELECTOR_MODEL";

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("registry is empty")]
    EmptyRegistry,
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    BlankConditioning,
    ActualMatch,
    RagMcp,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::RagMcp,
        StrategyKind::ActualMatch,
        StrategyKind::BlankConditioning,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::BlankConditioning => "blank_conditioning",
            StrategyKind::ActualMatch => "actual_match",
            StrategyKind::RagMcp => "rag_mcp",
        }
    }

    /// Row label used in metric tables.
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::BlankConditioning => "Blank",
            StrategyKind::ActualMatch => "Actual Match",
            StrategyKind::RagMcp => "MCP-RAG",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "blank_conditioning" | "blank" => Ok(StrategyKind::BlankConditioning),
            "actual_match" => Ok(StrategyKind::ActualMatch),
            "rag_mcp" | "rag" => Ok(StrategyKind::RagMcp),
            other => Err(format!(
                "unknown strategy {other:?} (expected blank_conditioning, actual_match or rag_mcp)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    /// Retrieval depth; only meaningful for `rag_mcp`.
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    1
}

impl Strategy {
    pub fn blank() -> Self {
        Strategy { kind: StrategyKind::BlankConditioning, k: 1 }
    }

    pub fn actual_match() -> Self {
        Strategy { kind: StrategyKind::ActualMatch, k: 1 }
    }

    pub fn rag(k: usize) -> Self {
        Strategy { kind: StrategyKind::RagMcp, k }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            StrategyKind::RagMcp if self.k != 1 => write!(f, "rag_mcp@{}", self.k),
            kind => f.write_str(kind.as_str()),
        }
    }
}

fn distinct_tokens(text: &str) -> HashSet<String> {
    tokenize(text).into_iter().collect()
}

fn shared_token_count(query: &HashSet<String>, text: &str) -> usize {
    distinct_tokens(text).intersection(query).count()
}

/// Ids of the schemas that enter the prompt, in prompt order.
pub fn select_candidates(
    strategy: Strategy,
    query: &str,
    registry: &Registry,
    index: &VectorIndex,
    embedder: &Embedder,
) -> Result<Vec<String>, SelectionError> {
    if registry.is_empty() {
        return Err(SelectionError::EmptyRegistry);
    }
    match strategy.kind {
        StrategyKind::BlankConditioning => Ok(registry.ids().map(str::to_owned).collect()),
        StrategyKind::ActualMatch => Ok(keyword_prefilter(query, registry)),
        StrategyKind::RagMcp => {
            if strategy.k == 0 {
                return Err(SelectionError::ZeroK);
            }
            let q = embedder.embed(query)?;
            Ok(index
                .search(&q, strategy.k)?
                .into_iter()
                .map(|c| c.schema_id)
                .collect())
        }
    }
}

/// Schemas sharing at least one token with the query, most shared first,
/// ties by ascending id.
pub fn keyword_prefilter(query: &str, registry: &Registry) -> Vec<String> {
    let query_tokens = distinct_tokens(query);
    let mut hits: Vec<(usize, &str)> = registry
        .iter()
        .map(|s| (shared_token_count(&query_tokens, &canonical_document(s).text), s.id.as_str()))
        .filter(|(shared, _)| *shared > 0)
        .collect();
    hits.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    hits.into_iter().map(|(_, id)| id.to_owned()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationStatus {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for ValidationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValidationStatus::Pass => "pass",
            ValidationStatus::Fail => "fail",
            ValidationStatus::Skipped => "skipped",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub schema_id: String,
    pub status: ValidationStatus,
    pub detail: String,
}

impl ValidationOutcome {
    pub fn skipped(schema_id: &str) -> Self {
        ValidationOutcome {
            schema_id: schema_id.to_owned(),
            status: ValidationStatus::Skipped,
            detail: "validation disabled".into(),
        }
    }
}

pub fn example_value(kind: ParamKind) -> Value {
    match kind {
        ParamKind::String => json!("example"),
        ParamKind::Integer => json!(1),
        ParamKind::Number => json!(1.0),
        ParamKind::Boolean => json!(true),
        ParamKind::Array => json!([]),
        ParamKind::Object => json!({}),
    }
}

fn value_has_kind(value: &Value, kind: ParamKind) -> bool {
    match kind {
        ParamKind::String => value.is_string(),
        ParamKind::Integer => value.is_i64() || value.is_u64(),
        ParamKind::Number => value.is_number(),
        ParamKind::Boolean => value.is_boolean(),
        ParamKind::Array => value.is_array(),
        ParamKind::Object => value.is_object(),
    }
}

/// Example arguments for `tool`: one default value per declared param.
pub fn synthesize_invocation(tool: &ToolDef) -> Map<String, Value> {
    tool.params
        .iter()
        .map(|p| (p.name.clone(), example_value(p.kind)))
        .collect()
}

/// Checks that `arguments` carries every required param with a value of the declared kind.
pub fn check_invocation(tool: &ToolDef, arguments: &Map<String, Value>) -> Result<(), String> {
    for param in tool.params.iter().filter(|p| p.required) {
        match arguments.get(&param.name) {
            None => return Err(format!("missing required param {:?}", param.name)),
            Some(v) if !value_has_kind(v, param.kind) => {
                return Err(format!("param {:?} is not a {}", param.name, param.kind))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Sanity check before invocation: synthesize an example call for the first
/// tool and check it against the tool's params. With `live`, the call is also
/// posted to the schema's endpoint and any well-formed JSON reply passes.
pub fn validate_candidate(schema: &McpSchema, live: bool) -> ValidationOutcome {
    let outcome = |status, detail: String| ValidationOutcome {
        schema_id: schema.id.clone(),
        status,
        detail,
    };
    if let Err(err) = schema.validate() {
        return outcome(ValidationStatus::Fail, err.to_string());
    }
    let tool = &schema.tools[0];
    let arguments = synthesize_invocation(tool);
    if let Err(detail) = check_invocation(tool, &arguments) {
        return outcome(ValidationStatus::Fail, detail);
    }
    let invocation = json!({ "tool": tool.name, "arguments": arguments });
    match (live, schema.endpoint.as_deref()) {
        (true, Some(endpoint)) => {
            match http::post_json::<_, Value>(endpoint, &invocation, Duration::from_secs(5)) {
                Ok(_) => outcome(ValidationStatus::Pass, format!("live probe ok: {invocation}")),
                Err(err) => outcome(ValidationStatus::Fail, format!("live probe failed: {err}")),
            }
        }
        (true, None) => outcome(
            ValidationStatus::Pass,
            format!("schema check ok, no endpoint to probe: {invocation}"),
        ),
        (false, _) => outcome(ValidationStatus::Pass, format!("schema check ok: {invocation}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValidationMode {
    Off,
    #[default]
    SchemaOnly,
    /// Schema check plus live probes, at most `max_in_flight` at a time.
    Live { max_in_flight: usize },
}

pub fn validate_all(schemas: &[&McpSchema], mode: ValidationMode) -> Vec<ValidationOutcome> {
    match mode {
        ValidationMode::Off => schemas.iter().map(|s| ValidationOutcome::skipped(&s.id)).collect(),
        ValidationMode::SchemaOnly => schemas.iter().map(|s| validate_candidate(s, false)).collect(),
        ValidationMode::Live { max_in_flight } => {
            let mut out = Vec::with_capacity(schemas.len());
            for chunk in schemas.chunks(max_in_flight.max(1)) {
                std::thread::scope(|scope| {
                    let handles: Vec<_> = chunk
                        .iter()
                        .map(|s| scope.spawn(move || validate_candidate(s, true)))
                        .collect();
                    out.extend(handles.into_iter().map(|h| h.join().expect("validation probe panicked")));
                });
            }
            out
        }
    }
}

fn params_line(schema: &McpSchema) -> String {
    schema
        .tools
        .iter()
        .map(|tool| {
            let params = tool
                .params
                .iter()
                .map(|p| format!("{}({})", p.name, p.kind))
                .collect::<Vec<_>>()
                .join(",");
            format!("{}:{}", tool.name, params)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Prompt handed to the selector:
///
/// ```text
/// TASK: <query>
/// TOOL 1: <name>
/// DESC: <description>
/// PARAMS: <tool>:<param>(<kind>),...; <tool>:...
/// ```
pub fn build_prompt(query: &str, schemas: &[&McpSchema]) -> String {
    let mut out = format!("TASK: {query}\n");
    for (i, schema) in schemas.iter().enumerate() {
        out.push_str(&format!(
            "TOOL {}: {}\nDESC: {}\nPARAMS: {}\n",
            i + 1,
            schema.name,
            schema.description,
            params_line(schema)
        ));
    }
    out
}

#[derive(Debug, Error)]
pub enum SelectorError {
    #[error("selector transport error: {0}")]
    Transport(String),
    #[error("selector returned a malformed response: {0}")]
    Malformed(String),
}

impl From<HttpError> for SelectorError {
    fn from(err: HttpError) -> Self {
        match err {
            HttpError::Transport(m) => SelectorError::Transport(m),
            HttpError::Malformed(m) => SelectorError::Malformed(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectorReply {
    pub chosen: Option<String>,
    pub completion_tokens: u64,
}

/// Picks one schema out of those presented in the prompt.
pub trait Selector: Send + Sync {
    fn select(&self, query: &str, presented: &[&McpSchema], prompt: &str) -> Result<SelectorReply, SelectorError>;
}

/// Deterministic stand-in: the presented schema sharing the most distinct
/// tokens with the query, ties by ascending id. Abstains when nothing
/// overlaps. Completion tokens are always 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalSelector;

impl Selector for LexicalSelector {
    fn select(&self, query: &str, presented: &[&McpSchema], _prompt: &str) -> Result<SelectorReply, SelectorError> {
        let query_tokens = distinct_tokens(query);
        let best = presented
            .iter()
            .map(|s| (shared_token_count(&query_tokens, &canonical_document(s).text), s.id.as_str()))
            .filter(|(shared, _)| *shared > 0)
            .min_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        Ok(SelectorReply {
            chosen: best.map(|(_, id)| id.to_owned()),
            completion_tokens: 0,
        })
    }
}

/// Chat-completion client. The reply must be exactly one presented id.
#[derive(Debug, Clone)]
pub struct ExternalSelector {
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize)]
struct ChatUsage {
    completion_tokens: Option<u64>,
}

impl ExternalSelector {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        ExternalSelector {
            endpoint: endpoint.into(),
            model: model.into(),
            timeout: Duration::from_secs(60),
        }
    }

    /// Reads `RAGMCP_SELECTOR_ENDPOINT` (and optionally `RAGMCP_SELECTOR_MODEL`).
    pub fn from_env() -> Option<Self> {
        let endpoint = env::var(ENV_SELECTOR_ENDPOINT).ok().filter(|v| !v.is_empty())?;
        let model = env::var(ENV_SELECTOR_MODEL).unwrap_or_else(|_| "default".into());
        Some(ExternalSelector::new(endpoint, model))
    }

    pub fn request_body(&self, prompt: &str, presented: &[&McpSchema]) -> Value {
        let ids: Vec<String> = presented
            .iter()
            .enumerate()
            .map(|(i, s)| format!("TOOL {} -> {}", i + 1, s.id))
            .collect();
        json!({
            "model": self.model,
            "messages": [
                {
                    "role": "system",
                    "content": "You select the single tool that can complete the task. Reply with exactly one tool id and nothing else."
                },
                {
                    "role": "user",
                    "content": format!("{prompt}IDS:\n{}\n", ids.join("\n"))
                }
            ]
        })
    }
}

impl Selector for ExternalSelector {
    fn select(&self, _query: &str, presented: &[&McpSchema], prompt: &str) -> Result<SelectorReply, SelectorError> {
        let response: ChatResponse = http::post_json(&self.endpoint, &self.request_body(prompt, presented), self.timeout)?;
        let reply = response
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| SelectorError::Malformed("no choices".into()))?
            .message
            .content;
        let completion_tokens = response
            .usage
            .and_then(|u| u.completion_tokens)
            .unwrap_or_else(|| count_tokens(&reply).value());
        let answer = reply.trim();
        let chosen = presented.iter().find(|s| s.id == answer).map(|s| s.id.clone());
        Ok(SelectorReply { chosen, completion_tokens })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub presented: Vec<String>,
    /// Cosine score of each presented schema against the query, aligned with `presented`.
    pub scores: Vec<f64>,
    pub chosen: Option<String>,
    pub prompt_text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub validation: Vec<ValidationOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector_error: Option<String>,
}

/// Candidates, prompt, pick and token accounting for one query.
///
/// `rag_mcp` with `k = 1` injects the single retrieved schema and does not
/// consult the selector. Selector failures are recorded, not raised.
pub fn run_selection(
    strategy: Strategy,
    query: &str,
    registry: &Registry,
    index: &VectorIndex,
    embedder: &Embedder,
    selector: &dyn Selector,
    validation: ValidationMode,
) -> Result<SelectionResult, SelectionError> {
    if registry.is_empty() {
        return Err(SelectionError::EmptyRegistry);
    }
    if strategy.k == 0 {
        return Err(SelectionError::ZeroK);
    }
    let query_vector = embedder.embed(query)?;
    let (presented, scores): (Vec<String>, Vec<f64>) = match strategy.kind {
        StrategyKind::RagMcp => index
            .search(&query_vector, strategy.k)?
            .into_iter()
            .map(|c| (c.schema_id, c.score))
            .unzip(),
        _ => {
            let ids = select_candidates(strategy, query, registry, index, embedder)?;
            let scores = ids
                .iter()
                .map(|id| index.score(id, &query_vector).unwrap_or(0.0))
                .collect();
            (ids, scores)
        }
    };
    let schemas: Vec<&McpSchema> = presented
        .iter()
        .map(|id| registry.get(id).expect("candidates come from the registry"))
        .collect();
    let prompt_text = build_prompt(query, &schemas);
    let prompt_tokens = count_tokens(&prompt_text).value();

    let mut selector_error = None;
    let (chosen, completion_tokens) = if schemas.is_empty() {
        (None, 0)
    } else if strategy.kind == StrategyKind::RagMcp && strategy.k == 1 {
        (Some(presented[0].clone()), 0)
    } else {
        match selector.select(query, &schemas, &prompt_text) {
            // a reply outside the presented set counts as no selection
            Ok(reply) => (reply.chosen.filter(|id| presented.contains(id)), reply.completion_tokens),
            Err(err) => {
                selector_error = Some(err.to_string());
                (None, 0)
            }
        }
    };

    let validation = if strategy.kind == StrategyKind::RagMcp {
        validate_all(&schemas, validation)
    } else {
        Vec::new()
    };

    Ok(SelectionResult {
        presented,
        scores,
        chosen,
        prompt_text,
        prompt_tokens,
        completion_tokens,
        validation,
        selector_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{fit_corpus, EmbedderConfig};
    use crate::registry::{ParamDef, ToolDef};

    fn schema(id: &str, name: &str, description: &str, params: &[(&str, ParamKind, bool)]) -> McpSchema {
        McpSchema {
            id: id.into(),
            name: name.into(),
            description: description.into(),
            tags: vec![],
            endpoint: None,
            tools: vec![ToolDef {
                name: "run".into(),
                description: String::new(),
                params: params
                    .iter()
                    .map(|(n, k, r)| ParamDef {
                        name: (*n).into(),
                        kind: *k,
                        required: *r,
                        description: String::new(),
                    })
                    .collect(),
            }],
        }
    }

    fn setup(schemas: Vec<McpSchema>) -> (Registry, VectorIndex, Embedder) {
        let registry = Registry::from_schemas(schemas).unwrap();
        let docs = registry.documents();
        let embedder = fit_corpus(&docs, &EmbedderConfig::default()).unwrap();
        let mut index = VectorIndex::new(embedder.dimension());
        for (doc, v) in docs.iter().zip(embedder.embed_documents(&docs).unwrap()) {
            index.add(doc.schema_id.clone(), &v).unwrap();
        }
        (registry, index, embedder)
    }

    fn five() -> Vec<McpSchema> {
        vec![
            schema("e", "Alpha", "weather forecast", &[]),
            schema("b", "Beta", "stock quotes", &[]),
            schema("d", "Gamma", "web pages lookup", &[("url", ParamKind::String, true)]),
            schema("a", "Delta", "calendar events", &[]),
            schema("c", "Epsilon", "translate text", &[]),
        ]
    }

    #[test]
    fn blank_presents_everything_in_registry_order() {
        let (r, i, e) = setup(five());
        let ids = select_candidates(Strategy::blank(), "anything", &r, &i, &e).unwrap();
        assert_eq!(ids, ["e", "b", "d", "a", "c"]);
    }

    #[test]
    fn actual_match_keeps_overlapping_schemas() {
        let (r, i, e) = setup(five());
        let ids = select_candidates(Strategy::actual_match(), "search the web", &r, &i, &e).unwrap();
        assert_eq!(ids, ["d"]);
        let none = select_candidates(Strategy::actual_match(), "zzz", &r, &i, &e).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn actual_match_ranks_by_shared_count_then_id() {
        let (r, _, _) = setup(vec![
            schema("z", "One", "web search", &[]),
            schema("y", "Two", "web", &[]),
            schema("x", "Three", "search", &[]),
        ]);
        assert_eq!(keyword_prefilter("web search", &r), ["z", "x", "y"]);
    }

    #[test]
    fn rag_verbatim_ground_truth_wins() {
        let mut schemas: Vec<_> = (0..49)
            .map(|i| schema(&format!("d{i:02}"), &format!("Tool{i}"), &format!("thing number{i} widget"), &[]))
            .collect();
        schemas.push(schema("gt", "Searcher", "find pages on the internet", &[]));
        let (r, i, e) = setup(schemas);
        let query = canonical_document(r.get("gt").unwrap()).text;
        let ids = select_candidates(Strategy::rag(1), &query, &r, &i, &e).unwrap();
        assert_eq!(ids, ["gt"]);
        let top3 = select_candidates(Strategy::rag(3), &query, &r, &i, &e).unwrap();
        assert_eq!(top3.len(), 3);
        assert_eq!(top3[0], "gt");
    }

    #[test]
    fn empty_registry_is_an_error() {
        let r = Registry::empty();
        let e = fit_corpus(&[crate::registry::ToolDocument { schema_id: "x".into(), text: "x".into() }], &EmbedderConfig::default()).unwrap();
        let i = VectorIndex::new(e.dimension());
        assert!(matches!(
            select_candidates(Strategy::blank(), "q", &r, &i, &e),
            Err(SelectionError::EmptyRegistry)
        ));
    }

    #[test]
    fn synthesized_invocation_satisfies_its_schema() {
        let s = schema(
            "x",
            "X",
            "",
            &[
                ("q", ParamKind::String, true),
                ("n", ParamKind::Integer, true),
                ("f", ParamKind::Number, false),
                ("b", ParamKind::Boolean, true),
                ("a", ParamKind::Array, true),
                ("o", ParamKind::Object, true),
            ],
        );
        let args = synthesize_invocation(&s.tools[0]);
        assert_eq!(args["q"], json!("example"));
        assert_eq!(args["n"], json!(1));
        assert_eq!(args["f"], json!(1.0));
        assert_eq!(args["b"], json!(true));
        assert_eq!(args["a"], json!([]));
        assert_eq!(args["o"], json!({}));
        let outcome = validate_candidate(&s, false);
        assert_eq!(outcome.status, ValidationStatus::Pass);
        assert!(outcome.detail.contains("\"example\""));
    }

    #[test]
    fn check_invocation_reports_missing_and_mistyped() {
        let s = schema("x", "X", "", &[("q", ParamKind::String, true), ("n", ParamKind::Integer, true)]);
        let mut args = Map::new();
        assert!(check_invocation(&s.tools[0], &args).unwrap_err().contains("missing"));
        args.insert("q".into(), json!("a"));
        args.insert("n".into(), json!("1"));
        assert!(check_invocation(&s.tools[0], &args).unwrap_err().contains("integer"));
    }

    #[test]
    fn invalid_schema_fails_validation() {
        let mut s = schema("x", "X", "", &[]);
        s.tools.clear();
        assert_eq!(validate_candidate(&s, false).status, ValidationStatus::Fail);
    }

    #[test]
    fn live_probe_against_dead_endpoint_fails() {
        let mut s = schema("x", "X", "", &[("o", ParamKind::Object, true)]);
        s.endpoint = Some("http://127.0.0.1:9/invoke".into());
        assert_eq!(validate_candidate(&s, false).status, ValidationStatus::Pass);
        let live = validate_candidate(&s, true);
        assert_eq!(live.status, ValidationStatus::Fail);
        assert!(live.detail.contains("transport"), "{}", live.detail);
    }

    #[test]
    fn prompt_with_no_schemas() {
        assert_eq!(build_prompt("find x", &[]), "TASK: find x\n");
    }

    #[test]
    fn prompt_template() {
        let mut s = schema("x", "WebSearch", "Search the web", &[("query", ParamKind::String, true), ("limit", ParamKind::Integer, false)]);
        s.tools.push(ToolDef { name: "ping".into(), description: String::new(), params: vec![] });
        assert_eq!(
            build_prompt("q", &[&s]),
            "TASK: q\nTOOL 1: WebSearch\nDESC: Search the web\nPARAMS: run:query(string),limit(integer); ping:\n"
        );
    }

    #[test]
    fn fewer_schemas_fewer_tokens() {
        let all = five();
        let refs: Vec<&McpSchema> = all.iter().collect();
        assert!(count_tokens(&build_prompt("q", &refs[..1])) < count_tokens(&build_prompt("q", &refs)));
    }

    #[test]
    fn lexical_selector_picks_max_overlap() {
        let all = five();
        let refs: Vec<&McpSchema> = all.iter().collect();
        let reply = LexicalSelector.select("web pages please", &refs, "").unwrap();
        assert_eq!(reply.chosen.as_deref(), Some("d"));
        assert_eq!(reply.completion_tokens, 0);
        assert_eq!(LexicalSelector.select("zzz", &refs, "").unwrap().chosen, None);
    }

    #[test]
    fn run_selection_rag_k1_skips_selector() {
        struct Panics;
        impl Selector for Panics {
            fn select(&self, _: &str, _: &[&McpSchema], _: &str) -> Result<SelectorReply, SelectorError> {
                panic!("selector must not be consulted")
            }
        }
        let (r, i, e) = setup(five());
        let res = run_selection(Strategy::rag(1), "weather forecast", &r, &i, &e, &Panics, ValidationMode::SchemaOnly).unwrap();
        assert_eq!(res.presented, ["e"]);
        assert_eq!(res.chosen.as_deref(), Some("e"));
        assert_eq!(res.prompt_tokens, count_tokens(&res.prompt_text).value());
        assert_eq!(res.validation.len(), 1);
        assert_eq!(res.validation[0].status, ValidationStatus::Pass);
    }

    #[test]
    fn run_selection_blank_uses_selector_and_costs_more() {
        let (r, i, e) = setup(five());
        let blank = run_selection(Strategy::blank(), "web pages", &r, &i, &e, &LexicalSelector, ValidationMode::SchemaOnly).unwrap();
        assert_eq!(blank.chosen.as_deref(), Some("d"));
        assert_eq!(blank.presented.len(), 5);
        assert!(blank.validation.is_empty());
        let rag = run_selection(Strategy::rag(1), "web pages", &r, &i, &e, &LexicalSelector, ValidationMode::Off).unwrap();
        assert!(blank.prompt_tokens > rag.prompt_tokens);
        assert_eq!(rag.validation[0].status, ValidationStatus::Skipped);
    }

    #[test]
    fn selector_failure_is_recorded() {
        let (r, i, e) = setup(five());
        let sel = ExternalSelector {
            endpoint: "http://127.0.0.1:9/chat".into(),
            model: "m".into(),
            timeout: Duration::from_secs(2),
        };
        let res = run_selection(Strategy::blank(), "web", &r, &i, &e, &sel, ValidationMode::Off).unwrap();
        assert_eq!(res.chosen, None);
        assert!(res.selector_error.unwrap().contains("transport"));
    }

    #[test]
    fn out_of_set_reply_counts_as_no_choice() {
        struct Liar;
        impl Selector for Liar {
            fn select(&self, _: &str, _: &[&McpSchema], _: &str) -> Result<SelectorReply, SelectorError> {
                Ok(SelectorReply { chosen: Some("not_there".into()), completion_tokens: 7 })
            }
        }
        let (r, i, e) = setup(five());
        let res = run_selection(Strategy::rag(3), "web", &r, &i, &e, &Liar, ValidationMode::Off).unwrap();
        assert_eq!(res.chosen, None);
        assert_eq!(res.completion_tokens, 7);
    }

    #[test]
    fn strategy_parsing_and_serde() {
        assert_eq!("rag_mcp".parse::<StrategyKind>().unwrap(), StrategyKind::RagMcp);
        assert!("nope".parse::<StrategyKind>().is_err());
        let s: Strategy = serde_json::from_str(r#"{"kind":"rag_mcp"}"#).unwrap();
        assert_eq!(s, Strategy::rag(1));
        assert_eq!(serde_json::to_string(&Strategy::blank()).unwrap(), r#"{"kind":"blank_conditioning","k":1}"#);
    }
}
