//! MCP server schemas, the registry file format and canonical documents.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid id {0:?}: expected 1-64 characters from [a-z0-9_-]")]
    InvalidId(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("schema {0:?}: empty tools")]
    EmptyTools(String),
    #[error("schema {schema:?}: duplicate tool name {tool:?}")]
    DuplicateTool { schema: String, tool: String },
    #[error("schema {schema:?}, tool {tool:?}: duplicate param name {param:?}")]
    DuplicateParam {
        schema: String,
        tool: String,
        param: String,
    },
}

impl From<serde_json::Error> for RegistryError {
    fn from(err: serde_json::Error) -> Self {
        if err.is_io() {
            return RegistryError::Io(err.into());
        }
        RegistryError::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    #[default]
    String,
    Integer,
    Number,
    Boolean,
    Array,
    Object,
}

impl ParamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamKind::String => "string",
            ParamKind::Integer => "integer",
            ParamKind::Number => "number",
            ParamKind::Boolean => "boolean",
            ParamKind::Array => "array",
            ParamKind::Object => "object",
        }
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    #[serde(default)]
    pub kind: ParamKind,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolDef {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub params: Vec<ParamDef>,
}

/// One MCP server: identity, description and the tools it exposes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McpSchema {
    pub id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub tools: Vec<ToolDef>,
}

pub fn is_valid_id(id: &str) -> bool {
    (1..=64).contains(&id.len())
        && id
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

impl McpSchema {
    /// Checks every per-schema invariant (id shape, non-empty tools, unique
    /// tool and param names). Cross-schema id uniqueness is the registry's job.
    pub fn validate(&self) -> Result<(), RegistryError> {
        if !is_valid_id(&self.id) {
            return Err(RegistryError::InvalidId(self.id.clone()));
        }
        if self.tools.is_empty() {
            return Err(RegistryError::EmptyTools(self.id.clone()));
        }
        let mut tool_names = HashSet::new();
        for tool in &self.tools {
            if !tool_names.insert(tool.name.as_str()) {
                return Err(RegistryError::DuplicateTool {
                    schema: self.id.clone(),
                    tool: tool.name.clone(),
                });
            }
            let mut param_names = HashSet::new();
            for param in &tool.params {
                if !param_names.insert(param.name.as_str()) {
                    return Err(RegistryError::DuplicateParam {
                        schema: self.id.clone(),
                        tool: tool.name.clone(),
                        param: param.name.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Flat text rendering of a schema, the unit that gets embedded and keyword-matched.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ToolDocument {
    pub schema_id: String,
    pub text: String,
}

/// Lowercased name, description, tags, then per tool its name, description
/// and param names, one field per line. Empty fields are skipped so the
/// separator is always a single newline. Ids, param kinds and endpoints are
/// not part of the text.
pub fn canonical_document(schema: &McpSchema) -> ToolDocument {
    let mut fields: Vec<&str> = Vec::new();
    fields.push(&schema.name);
    fields.push(&schema.description);
    fields.extend(schema.tags.iter().map(String::as_str));
    for tool in &schema.tools {
        fields.push(&tool.name);
        fields.push(&tool.description);
        fields.extend(tool.params.iter().map(|p| p.name.as_str()));
    }
    let text = fields
        .into_iter()
        .map(str::trim)
        .filter(|f| !f.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("\n");
    ToolDocument {
        schema_id: schema.id.clone(),
        text,
    }
}

#[derive(Serialize, Deserialize)]
struct RegistryFile<S> {
    servers: S,
}

/// Ordered, validated collection of schemas. Immutable once built; mutation
/// produces a new registry.
#[derive(Debug, Clone)]
pub struct Registry {
    schemas: Vec<McpSchema>,
    positions: HashMap<String, usize>,
    built_at: SystemTime,
}

impl PartialEq for Registry {
    // built_at is bookkeeping, not content.
    fn eq(&self, other: &Self) -> bool {
        self.schemas == other.schemas
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            schemas: Vec::new(),
            positions: HashMap::new(),
            built_at: SystemTime::now(),
        }
    }

    /// Builds a registry from schemas in the given order, validating each one.
    pub fn from_schemas(schemas: Vec<McpSchema>) -> Result<Self, RegistryError> {
        let mut positions = HashMap::with_capacity(schemas.len());
        for (i, schema) in schemas.iter().enumerate() {
            schema.validate()?;
            if positions.insert(schema.id.clone(), i).is_some() {
                return Err(RegistryError::DuplicateId(schema.id.clone()));
            }
        }
        Ok(Registry {
            schemas,
            positions,
            built_at: SystemTime::now(),
        })
    }

    pub fn len(&self) -> usize {
        self.schemas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemas.is_empty()
    }

    pub fn schemas(&self) -> &[McpSchema] {
        &self.schemas
    }

    pub fn iter(&self) -> std::slice::Iter<'_, McpSchema> {
        self.schemas.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.schemas.iter().map(|s| s.id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&McpSchema> {
        self.positions.get(id).map(|&i| &self.schemas[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.positions.contains_key(id)
    }

    pub fn built_at(&self) -> SystemTime {
        self.built_at
    }

    pub fn documents(&self) -> Vec<ToolDocument> {
        self.schemas.iter().map(canonical_document).collect()
    }

    /// New registry with `schema` appended, or replacing the entry with the
    /// same id in place when `replace` is set.
    pub fn with_schema(&self, schema: McpSchema, replace: bool) -> Result<Self, RegistryError> {
        schema.validate()?;
        let mut schemas = self.schemas.clone();
        match self.positions.get(&schema.id) {
            Some(&i) if replace => schemas[i] = schema,
            Some(_) => return Err(RegistryError::DuplicateId(schema.id)),
            None => schemas.push(schema),
        }
        Registry::from_schemas(schemas)
    }

    /// New registry without `id`; `None` when the id is absent.
    pub fn without(&self, id: &str) -> Option<Self> {
        self.positions.get(id)?;
        let schemas = self.schemas.iter().filter(|s| s.id != id).cloned().collect();
        Some(Registry::from_schemas(schemas).expect("subset of a valid registry is valid"))
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<(), RegistryError> {
        serde_json::to_writer_pretty(
            writer,
            &RegistryFile {
                servers: &self.schemas,
            },
        )?;
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        let mut out = Vec::new();
        self.write_json(&mut out).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("serde_json emits UTF-8")
    }
}

/// Reads a `{"servers": [...]}` registry file and validates every schema.
pub fn load_registry<R: Read>(source: R) -> Result<Registry, RegistryError> {
    let file: RegistryFile<Vec<McpSchema>> = serde_json::from_reader(source)?;
    Registry::from_schemas(file.servers)
}

pub fn load_registry_str(source: &str) -> Result<Registry, RegistryError> {
    load_registry(source.as_bytes())
}
