//! Needle-in-a-haystack stress harness for tool selection.
//!
//! A trial hides one ground-truth schema among `N - 1` sampled distractors,
//! builds a fresh catalog over that pool and asks a strategy to pick. A sweep
//! runs every (task, pool size, ground-truth position, trial, strategy) cell
//! and emits a success grid plus per-strategy metrics.
//!
//! Everything is a pure function of the config, the distractor source and the
//! embedder config: each trial derives its own PRNG seed from the sweep seed
//! and its cell coordinates, so results do not depend on execution order or
//! on whether trials run in parallel.

pub mod report;
pub mod synthetic;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, CatalogError};
use crate::embedding::EmbedderConfig;
use crate::exec::{self, ExecMode};
use crate::registry::{McpSchema, Registry};
use crate::selection::{run_selection, Selector, Strategy, ValidationMode};

pub use report::{aggregate_metrics, grid_csv_string, read_grid_csv, write_grid_csv, GridRow, MetricsReport, MetricsRow};
pub use synthetic::{ControlledFixture, SyntheticBenchmark, SyntheticConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown ground truth {0:?}")]
    UnknownGroundTruth(String),
    #[error("insufficient distractors for pool size {pool_size}: need {needed}, have {available}")]
    InsufficientDistractors {
        pool_size: usize,
        needed: usize,
        available: usize,
    },
    #[error("position {position} out of range for pool size {pool_size}")]
    PositionOutOfRange { position: usize, pool_size: usize },
    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),
    #[error("no outcomes to aggregate")]
    EmptyOutcomes,
    #[error("outcomes mix strategies {0:?} and {1:?}")]
    MixedStrategies(String, String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A task and the schema that can satisfy it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub task: String,
    pub ground_truth_id: String,
}

/// Where ground truths and distractors come from.
pub trait DistractorSource: Sync {
    fn ground_truth(&self, id: &str) -> Option<&McpSchema>;

    /// Distractor candidates for a pool of `pool_size` around `ground_truth_id`.
    /// The pool samples `pool_size - 1` of them.
    fn distractors(&self, pool_size: usize, ground_truth_id: &str) -> Vec<&McpSchema>;
}

/// A plain registry serves as its own bank: every other schema is a candidate distractor.
impl DistractorSource for Registry {
    fn ground_truth(&self, id: &str) -> Option<&McpSchema> {
        self.get(id)
    }

    fn distractors(&self, _pool_size: usize, ground_truth_id: &str) -> Vec<&McpSchema> {
        self.iter().filter(|s| s.id != ground_truth_id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub task_id: String,
    pub task: String,
    pub ground_truth_id: String,
    pub pool_size: usize,
    pub position: usize,
    pub trial: usize,
    pub seed: u64,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub spec: TrialSpec,
    pub success: bool,
    pub chosen: Option<String>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Pool of exactly `pool_size` schemas: `pool_size - 1` distractors sampled
/// without replacement by a PRNG seeded from `spec.seed`, with the ground
/// truth inserted at `spec.position`.
pub fn build_pool(spec: &TrialSpec, source: &dyn DistractorSource) -> Result<Registry, HarnessError> {
    if spec.pool_size == 0 || spec.position >= spec.pool_size {
        return Err(HarnessError::PositionOutOfRange {
            position: spec.position,
            pool_size: spec.pool_size,
        });
    }
    let ground_truth = source
        .ground_truth(&spec.ground_truth_id)
        .ok_or_else(|| HarnessError::UnknownGroundTruth(spec.ground_truth_id.clone()))?;
    let mut candidates: Vec<&McpSchema> = source
        .distractors(spec.pool_size, &spec.ground_truth_id)
        .into_iter()
        .filter(|s| s.id != spec.ground_truth_id)
        .collect();
    let needed = spec.pool_size - 1;
    if candidates.len() < needed {
        return Err(HarnessError::InsufficientDistractors {
            pool_size: spec.pool_size,
            needed,
            available: candidates.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (sampled, _) = candidates.partial_shuffle(&mut rng, needed);
    let mut pool: Vec<McpSchema> = sampled.iter().map(|s| (*s).clone()).collect();
    pool.insert(spec.position, ground_truth.clone());
    Registry::from_schemas(pool).map_err(|e| HarnessError::Catalog(e.into()))
}

/// Builds the pool, indexes it and runs one selection. Selector failures
/// are recorded in `detail` as an unsuccessful trial.
pub fn run_trial(
    spec: &TrialSpec,
    source: &dyn DistractorSource,
    embedder: &EmbedderConfig,
    selector: &dyn Selector,
) -> Result<TrialOutcome, HarnessError> {
    let mut out = run_cell(std::slice::from_ref(spec), source, embedder, selector)?;
    Ok(out.remove(0))
}

/// Runs every spec of one cell against a single shared pool and catalog.
/// All specs must agree on everything except the strategy.
fn run_cell(
    specs: &[TrialSpec],
    source: &dyn DistractorSource,
    embedder: &EmbedderConfig,
    selector: &dyn Selector,
) -> Result<Vec<TrialOutcome>, HarnessError> {
    let started = Instant::now();
    let first = &specs[0];
    let pool = build_pool(first, source)?;
    let catalog = Catalog::build_with(ExecMode::Sequential, pool, embedder)?;
    let build_ms = started.elapsed().as_millis() as u64;
    let mut outcomes = Vec::with_capacity(specs.len());
    for spec in specs {
        let selecting = Instant::now();
        let result = run_selection(
            spec.strategy,
            &spec.task,
            catalog.registry(),
            catalog.index(),
            catalog.embedder().expect("pool is non-empty"),
            selector,
            ValidationMode::SchemaOnly,
        )
        .map_err(CatalogError::from)?;
        let success = result.chosen.as_deref() == Some(spec.ground_truth_id.as_str());
        outcomes.push(TrialOutcome {
            spec: spec.clone(),
            success,
            chosen: result.chosen,
            prompt_tokens: result.prompt_tokens,
            completion_tokens: result.completion_tokens,
            latency_ms: build_ms + selecting.elapsed().as_millis() as u64,
            detail: result.selector_error,
        });
    }
    Ok(outcomes)
}

/// Which ground-truth positions to test in a pool of size N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionRule {
    /// Every position `0..N`.
    All,
    /// `0, s, 2s, ...` below N.
    Stride(usize),
    /// `count` positions spread evenly from the top (0) to the bottom (N - 1).
    Spread(usize),
}

impl PositionRule {
    pub fn positions(self, pool_size: usize) -> Vec<usize> {
        match self {
            PositionRule::All => (0..pool_size).collect(),
            PositionRule::Stride(s) => (0..pool_size).step_by(s.max(1)).collect(),
            PositionRule::Spread(count) => {
                if count >= pool_size {
                    return (0..pool_size).collect();
                }
                if count <= 1 {
                    return vec![0];
                }
                let mut out: Vec<usize> = (0..count).map(|i| i * (pool_size - 1) / (count - 1)).collect();
                out.dedup();
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub pool_sizes: Vec<usize>,
    pub positions: PositionRule,
    #[serde(default)]
    pub tasks: Vec<Task>,
    #[serde(default = "default_trials")]
    pub trials_per_cell: usize,
    #[serde(default)]
    pub seed: u64,
    /// Single strategy; merged with `strategies` when both are given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strategies: Vec<Strategy>,
    /// Wall-clock latency in the grid. Off by default so grids are byte-reproducible.
    #[serde(default)]
    pub record_latency: bool,
}

fn default_trials() -> usize {
    1
}

pub const DESK_POOL_SIZES: [usize; 8] = [1, 3, 10, 30, 100, 300, 1000, 3000];

impl SweepConfig {
    /// Desk-scale default: N in {1, 3, 10, ..., 3000}, three positions per
    /// pool (top, middle, bottom), one trial per cell, all three strategies.
    pub fn desk_default(tasks: Vec<Task>) -> Self {
        SweepConfig {
            pool_sizes: DESK_POOL_SIZES.to_vec(),
            positions: PositionRule::Spread(3),
            tasks,
            trials_per_cell: 1,
            seed: 42,
            strategy: None,
            strategies: vec![Strategy::rag(1), Strategy::actual_match(), Strategy::blank()],
            record_latency: false,
        }
    }

    pub fn strategies(&self) -> Vec<Strategy> {
        let mut out: Vec<Strategy> = self.strategy.iter().copied().collect();
        for s in &self.strategies {
            if !out.contains(s) {
                out.push(*s);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_owned()));
        if self.pool_sizes.is_empty() || self.pool_sizes.contains(&0) {
            return bad("pool sizes must be positive and non-empty");
        }
        if self.pool_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("pool sizes must be strictly ascending");
        }
        match self.positions {
            PositionRule::Stride(0) => return bad("stride must be at least 1"),
            PositionRule::Spread(0) => return bad("spread count must be at least 1"),
            _ => {}
        }
        if self.tasks.is_empty() {
            return bad("no tasks");
        }
        if self.trials_per_cell == 0 {
            return bad("trials_per_cell must be at least 1");
        }
        let strategies = self.strategies();
        if strategies.is_empty() {
            return bad("no strategy");
        }
        if strategies.iter().any(|s| s.k == 0) {
            return bad("k must be at least 1");
        }
        Ok(())
    }

    /// Every trial of the sweep in (task, N, position, trial, strategy) order.
    pub fn trial_specs(&self) -> Vec<TrialSpec> {
        let strategies = self.strategies();
        let mut specs = Vec::new();
        for (task_index, task) in self.tasks.iter().enumerate() {
            for &pool_size in &self.pool_sizes {
                for position in self.positions.positions(pool_size) {
                    for trial in 0..self.trials_per_cell {
                        // same distractors for every strategy in a cell
                        let seed = cell_seed(self.seed, task_index, pool_size, position, trial);
                        for &strategy in &strategies {
                            specs.push(TrialSpec {
                                task_id: task.id.clone(),
                                task: task.task.clone(),
                                ground_truth_id: task.ground_truth_id.clone(),
                                pool_size,
                                position,
                                trial,
                                seed,
                                strategy,
                            });
                        }
                    }
                }
            }
        }
        specs
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Per-cell PRNG seed, a splitmix64 chain over the sweep seed and cell coordinates.
pub fn cell_seed(seed: u64, task_index: usize, pool_size: usize, position: usize, trial: usize) -> u64 {
    [task_index, pool_size, position, trial]
        .into_iter()
        .fold(splitmix64(seed), |acc, v| splitmix64(acc ^ v as u64))
}

pub fn run_sweep(
    config: &SweepConfig,
    source: &dyn DistractorSource,
    embedder: &EmbedderConfig,
    selector: &dyn Selector,
) -> Result<Vec<TrialOutcome>, HarnessError> {
    run_sweep_with(ExecMode::default(), config, source, embedder, selector)
}

/// Runs all trials (in parallel when `mode` allows) and returns them in
/// grid order: task id, pool size, position, trial, strategy.
pub fn run_sweep_with(
    mode: ExecMode,
    config: &SweepConfig,
    source: &dyn DistractorSource,
    embedder: &EmbedderConfig,
    selector: &dyn Selector,
) -> Result<Vec<TrialOutcome>, HarnessError> {
    config.validate()?;
    embedder.validate().map_err(CatalogError::from)?;
    let specs = config.trial_specs();
    // trial_specs emits the strategies of a cell consecutively
    let cells: Vec<&[TrialSpec]> = specs.chunks(config.strategies().len()).collect();
    let results = exec::map_slice_with(mode, &cells, |cell| run_cell(cell, source, embedder, selector));
    let mut outcomes = Vec::with_capacity(specs.len());
    for cell in results {
        outcomes.extend(cell?);
    }
    if !config.record_latency {
        for o in &mut outcomes {
            o.latency_ms = 0;
        }
    }
    outcomes.sort_by(|a, b| {
        let key = |o: &TrialOutcome| {
            (
                o.spec.task_id.clone(),
                o.spec.pool_size,
                o.spec.position,
                o.spec.trial,
                o.spec.strategy.to_string(),
            )
        };
        key(a).cmp(&key(b))
    });
    Ok(outcomes)
}
