//! Service configuration and catalog bootstrap from disk.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ragmcp_core::{load_registry, Catalog, EmbedderConfig, Registry, VectorIndex};
use serde::Deserialize;

fn default_bind() -> String {
    "127.0.0.1:8080".to_owned()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    pub registry: PathBuf,
    #[serde(default)]
    pub embedder: EmbedderConfig,
    /// Index snapshot read at startup when it matches the registry.
    #[serde(default)]
    pub snapshot: Option<PathBuf>,
    /// Write the registry file (and snapshot, if configured) after every change.
    #[serde(default)]
    pub persist: bool,
}

impl ServeConfig {
    /// Reads a JSON config; relative paths resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: ServeConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.registry = base.join(&config.registry);
        config.snapshot = config.snapshot.map(|s| base.join(s));
        config.embedder = config.embedder.with_env();
        Ok(config)
    }
}

pub fn read_registry(path: &Path) -> Result<Registry> {
    let file = File::open(path).with_context(|| format!("opening registry {}", path.display()))?;
    load_registry(BufReader::new(file)).with_context(|| format!("loading registry {}", path.display()))
}

pub fn read_snapshot(path: &Path) -> Result<VectorIndex> {
    let file = File::open(path).with_context(|| format!("opening snapshot {}", path.display()))?;
    VectorIndex::read_snapshot(BufReader::new(file)).with_context(|| format!("reading snapshot {}", path.display()))
}

/// Writes to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut out = BufWriter::new(File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?);
        write(&mut out)?;
        out.flush()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

pub fn write_snapshot(catalog: &Catalog, path: &Path) -> Result<()> {
    write_atomic(path, |w| Ok(catalog.index().write_snapshot(w)?))
}

pub fn write_registry(registry: &Registry, path: &Path) -> Result<()> {
    write_atomic(path, |w| Ok(registry.write_json(w)?))
}

/// Builds the catalog for `registry`, reusing the snapshot at `snapshot` when
/// its ids and dimension match. A missing or stale snapshot is rebuilt and,
/// if `write_back`, rewritten.
pub fn open_catalog(
    registry: Registry,
    embedder: &EmbedderConfig,
    snapshot: Option<&Path>,
    write_back: bool,
) -> Result<Catalog> {
    let Some(path) = snapshot else {
        return Ok(Catalog::build(registry, embedder)?);
    };
    if path.exists() {
        let index = read_snapshot(path)?;
        match Catalog::with_index(registry.clone(), embedder, index) {
            Ok(catalog) => return Ok(catalog),
            Err(err) => eprintln!("ignoring snapshot {}: {err}", path.display()),
        }
    }
    let catalog = Catalog::build(registry, embedder)?;
    if write_back {
        write_snapshot(&catalog, path)?;
    }
    Ok(catalog)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("serve.json");
        fs::write(&path, r#"{"registry": "reg.json", "snapshot": "idx.bin", "embedder": {"dimension": 64}}"#).unwrap();
        let config = ServeConfig::load(&path).unwrap();
        assert_eq!(config.registry, dir.path().join("reg.json"));
        assert_eq!(config.snapshot, Some(dir.path().join("idx.bin")));
        assert_eq!(config.bind, "127.0.0.1:8080");
        assert_eq!(config.embedder.dimension, 64);
        assert!(!config.persist);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("serve.json");
        fs::write(&path, r#"{"registry": "reg.json", "port": 80}"#).unwrap();
        assert!(ServeConfig::load(&path).is_err());
    }

    #[test]
    fn stale_snapshot_is_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let snapshot = dir.path().join("idx.bin");
        let registry = ragmcp_core::registry::load_registry_str(
            r#"{"servers": [{"id": "a", "name": "alpha", "tools": [{"name": "t"}]}]}"#,
        )
        .unwrap();
        let config = EmbedderConfig::hashed(32);
        let first = open_catalog(registry.clone(), &config, Some(&snapshot), true).unwrap();
        assert!(snapshot.exists());
        let grown = registry
            .with_schema(
                serde_json::from_str(r#"{"id": "b", "name": "beta", "tools": [{"name": "t"}]}"#).unwrap(),
                false,
            )
            .unwrap();
        let second = open_catalog(grown, &config, Some(&snapshot), true).unwrap();
        assert_eq!(second.len(), 2);
        assert_eq!(read_snapshot(&snapshot).unwrap(), *second.index());
        assert_ne!(first.index(), second.index());
    }
}
