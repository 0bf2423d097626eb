//! `stress run`: a sweep over a distractor bank, written out as a grid and a metrics report.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ragmcp_core::harness::{
    run_sweep, write_grid_csv, ControlledFixture, DistractorSource, MetricsReport, SweepConfig, SyntheticBenchmark,
    SyntheticConfig, Task, TrialOutcome,
};
use ragmcp_core::{EmbedderConfig, Selector};
use serde::Deserialize;

use crate::config::{read_registry, write_atomic};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BankSpec {
    Synthetic(SyntheticConfig),
    /// A registry file; the sweep must list its tasks.
    Registry { path: PathBuf },
    TokenDisjoint {
        #[serde(default)]
        seed: u64,
    },
    Degradation {
        #[serde(default)]
        seed: u64,
    },
}

impl Default for BankSpec {
    fn default() -> Self {
        BankSpec::Synthetic(SyntheticConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StressConfig {
    #[serde(flatten)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub bank: BankSpec,
    #[serde(default)]
    pub embedder: EmbedderConfig,
}

impl StressConfig {
    /// The desk-scale default sweep over the default synthetic bank. Tasks
    /// are filled in from the bank.
    pub fn desk_default() -> Self {
        StressConfig {
            sweep: SweepConfig::desk_default(Vec::new()),
            bank: BankSpec::default(),
            embedder: EmbedderConfig::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: StressConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let BankSpec::Registry { path: registry } = &mut config.bank {
            *registry = path.parent().unwrap_or(Path::new(".")).join(&*registry);
        }
        Ok(config)
    }
}

enum Bank {
    Synthetic(SyntheticBenchmark),
    Registry(ragmcp_core::Registry),
    Fixture(ControlledFixture),
}

impl Bank {
    fn open(spec: &BankSpec, max_pool: usize) -> Result<Self> {
        Ok(match spec {
            BankSpec::Synthetic(config) => Bank::Synthetic(SyntheticBenchmark::generate(config)),
            BankSpec::Registry { path } => Bank::Registry(read_registry(path)?),
            BankSpec::TokenDisjoint { seed } => Bank::Fixture(ControlledFixture::token_disjoint(max_pool, *seed)),
            BankSpec::Degradation { seed } => Bank::Fixture(ControlledFixture::degradation(max_pool, *seed)),
        })
    }

    fn tasks(&self) -> &[Task] {
        match self {
            Bank::Synthetic(b) => &b.tasks,
            Bank::Registry(_) => &[],
            Bank::Fixture(f) => &f.tasks,
        }
    }

    fn source(&self) -> &dyn DistractorSource {
        match self {
            Bank::Synthetic(b) => &b.bank,
            Bank::Registry(r) => r,
            Bank::Fixture(f) => f,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StressRun {
    pub outcomes: Vec<TrialOutcome>,
    pub report: MetricsReport,
}

impl StressRun {
    /// Writes `grid.csv`, `metrics.json` and `metrics.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_atomic(&dir.join("grid.csv"), |w| Ok(write_grid_csv(&self.outcomes, w)?))?;
        write_atomic(&dir.join("metrics.json"), |w| Ok(w.write_all(self.report.to_json().as_bytes())?))?;
        write_atomic(&dir.join("metrics.txt"), |w| Ok(w.write_all(self.report.to_table().as_bytes())?))?;
        Ok(())
    }
}

pub fn run_stress(config: &StressConfig, selector: &dyn Selector) -> Result<StressRun> {
    let max_pool = config.sweep.pool_sizes.iter().copied().max().unwrap_or(1);
    let bank = Bank::open(&config.bank, max_pool)?;
    let mut sweep = config.sweep.clone();
    if sweep.tasks.is_empty() {
        if bank.tasks().is_empty() {
            bail!("the sweep lists no tasks and the bank provides none");
        }
        sweep.tasks = bank.tasks().to_vec();
    }
    let outcomes = run_sweep(&sweep, bank.source(), &config.embedder, selector)?;
    let report = MetricsReport::from_outcomes(&outcomes)?;
    Ok(StressRun { outcomes, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ragmcp_core::LexicalSelector;

    #[test]
    fn shipped_default_config_matches_builtin() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk_default.json");
        assert_eq!(StressConfig::load(&path).unwrap(), StressConfig::desk_default());
    }

    #[test]
    fn bank_kinds_parse() {
        let c: StressConfig = serde_json::from_str(
            r#"{"pool_sizes": [1], "positions": "all", "bank": {"kind": "degradation", "seed": 9}}"#,
        )
        .unwrap();
        assert_eq!(c.bank, BankSpec::Degradation { seed: 9 });
        let c: StressConfig = serde_json::from_str(
            r#"{"pool_sizes": [1], "positions": "all", "bank": {"kind": "registry", "path": "r.json"}}"#,
        )
        .unwrap();
        assert_eq!(c.bank, BankSpec::Registry { path: "r.json".into() });
        let c: StressConfig = serde_json::from_str(r#"{"pool_sizes": [1], "positions": "all"}"#).unwrap();
        assert_eq!(c.bank, BankSpec::default());
    }

    #[test]
    fn registry_bank_needs_tasks() {
        let dir = tempfile::tempdir().unwrap();
        let registry = dir.path().join("r.json");
        std::fs::write(
            &registry,
            r#"{"servers": [{"id": "a", "name": "a", "tools": [{"name": "t"}]}]}"#,
        )
        .unwrap();
        let mut config = StressConfig::desk_default();
        config.sweep.pool_sizes = vec![1];
        config.bank = BankSpec::Registry { path: registry };
        assert!(run_stress(&config, &LexicalSelector).is_err());
        config.sweep.tasks = vec![Task { id: "t".into(), task: "a".into(), ground_truth_id: "a".into() }];
        let run = run_stress(&config, &LexicalSelector).unwrap();
        assert_eq!(run.outcomes.len(), 3);
    }
}
