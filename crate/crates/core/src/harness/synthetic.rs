//! Synthetic registries for stress runs.
//!
//! Three shapes are provided:
//!
//! * [`SyntheticBenchmark`]: twenty tasks, each with one ground-truth server
//!   named after two domain words, plus a bank of distractors that each carry
//!   a tunable number of generic words ("find", "online", "data", ...) the
//!   queries also use. Generic words give distractors a high raw keyword
//!   overlap but low idf, which is where keyword matching and tf-idf
//!   retrieval disagree.
//! * [`ControlledFixture::token_disjoint`]: every query is the verbatim
//!   document of its ground truth and no distractor shares a token with any
//!   query. Retrieval must be perfect at every pool size.
//! * [`ControlledFixture::degradation`]: as above, but from pool size 2 on a
//!   growing share of tasks also gets a "confuser" whose document is exactly
//!   the query while the ground truth carries extra words. Confusers outscore
//!   the ground truth, so retrieval accuracy falls as pools grow.
//!
//! Distractor vocabulary is made of generated three-syllable words that
//! never collide with task words.

use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DistractorSource, Task};
use crate::registry::{McpSchema, ParamDef, ParamKind, Registry, ToolDef};

const SYLLABLES: [&str; 16] = [
    "ka", "zo", "qu", "vex", "ri", "dun", "pla", "mor", "tis", "bex", "lum", "yor", "fen", "gau", "shi", "wob",
];

/// Generated words `[0, FILLER_WORDS)` feed distractors; the rest is reserved
/// for task-specific words.
const FILLER_WORDS: usize = 3584;
const GENERATED_WORDS: usize = 4096;

pub const GENERIC_WORDS: [&str; 14] = [
    "find", "search", "online", "information", "data", "web", "tool", "service", "results", "query", "lookup",
    "get", "using", "api",
];

pub const DOMAINS: [(&str, &str); 20] = [
    ("weather", "forecast"),
    ("stock", "quotes"),
    ("flight", "booking"),
    ("recipe", "cooking"),
    ("translation", "language"),
    ("calendar", "meeting"),
    ("email", "inbox"),
    ("currency", "exchange"),
    ("news", "headlines"),
    ("map", "directions"),
    ("music", "playlist"),
    ("movie", "showtimes"),
    ("hotel", "reservation"),
    ("package", "tracking"),
    ("dictionary", "definitions"),
    ("sports", "scores"),
    ("crypto", "wallet"),
    ("pdf", "documents"),
    ("image", "captioning"),
    ("github", "repositories"),
];

const KINDS: [ParamKind; 6] = [
    ParamKind::String,
    ParamKind::Integer,
    ParamKind::Number,
    ParamKind::Boolean,
    ParamKind::Array,
    ParamKind::Object,
];

/// Generated word number `index` (0..4096): three syllables, base 16.
pub fn generated_word(index: usize) -> String {
    debug_assert!(index < GENERATED_WORDS);
    let (a, b, c) = (index / 256 % 16, index / 16 % 16, index % 16);
    format!("{}{}{}", SYLLABLES[a], SYLLABLES[b], SYLLABLES[c])
}

fn reserved_word(task: usize, slot: usize) -> String {
    generated_word(FILLER_WORDS + task * 8 + slot)
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn filler(rng: &mut ChaCha8Rng) -> String {
    generated_word(rng.random_range(0..FILLER_WORDS))
}

fn fillers(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| filler(rng)).collect()
}

/// One distractor carrying `generic` distinct generic words in its description.
fn distractor(id: String, generic: usize, rng: &mut ChaCha8Rng) -> McpSchema {
    let mut words: Vec<String> = GENERIC_WORDS
        .choose_multiple(rng, generic.min(GENERIC_WORDS.len()))
        .map(|w| (*w).to_owned())
        .collect();
    words.extend(fillers(rng, 4));
    words.shuffle(rng);
    let n_params = rng.random_range(1..=3);
    let params = (0..n_params)
        .map(|i| ParamDef {
            name: format!("{}{}", filler(rng), i),
            kind: *KINDS.choose(rng).expect("non-empty"),
            required: i == 0,
            description: String::new(),
        })
        .collect();
    McpSchema {
        id,
        name: format!("{} {}", capitalize(&filler(rng)), capitalize(&filler(rng))),
        description: capitalize(&words.join(" ")),
        tags: vec![filler(rng)],
        endpoint: None,
        tools: vec![ToolDef {
            name: filler(rng),
            description: fillers(rng, 2).join(" "),
            params,
        }],
    }
}

fn filler_bank(count: usize, seed: u64) -> Vec<McpSchema> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| distractor(format!("d-{i:05}"), 0, &mut rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Number of distractor schemas in the bank, on top of the 20 ground truths.
    #[serde(default = "default_distractors")]
    pub distractors: usize,
    /// Distinct generic words per distractor description; the query-overlap knob.
    #[serde(default = "default_generic")]
    pub generic_words: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_distractors() -> usize {
    3000
}

fn default_generic() -> usize {
    3
}

fn default_seed() -> u64 {
    7
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            distractors: default_distractors(),
            generic_words: default_generic(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub tasks: Vec<Task>,
    /// Ground truths first, then distractors.
    pub bank: Registry,
}

impl SyntheticBenchmark {
    pub fn generate(config: &SyntheticConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut schemas = Vec::with_capacity(DOMAINS.len() + config.distractors);
        let mut tasks = Vec::with_capacity(DOMAINS.len());
        for (i, (a, b)) in DOMAINS.iter().enumerate() {
            let id = format!("gt-{a}-{b}");
            let mut generic: Vec<&str> = GENERIC_WORDS.choose_multiple(&mut rng, 6).copied().collect();
            generic.shuffle(&mut rng);
            let query = format!(
                "{} {} {} {a} {b} {} {} {}",
                generic[0], generic[1], generic[2], generic[3], generic[4], generic[5]
            );
            schemas.push(McpSchema {
                id: id.clone(),
                name: format!("{} {}", capitalize(a), capitalize(b)),
                description: format!("{} {a} {b} service", capitalize(&reserved_word(i, 0))),
                tags: vec![(*a).to_owned()],
                endpoint: None,
                tools: vec![ToolDef {
                    name: format!("get_{a}"),
                    description: format!("{} {b}", reserved_word(i, 1)),
                    params: vec![ParamDef {
                        name: format!("{a}_{}", reserved_word(i, 2)),
                        kind: ParamKind::String,
                        required: true,
                        description: String::new(),
                    }],
                }],
            });
            tasks.push(Task {
                id: format!("t{i:02}"),
                task: query,
                ground_truth_id: id,
            });
        }
        for i in 0..config.distractors {
            schemas.push(distractor(format!("d-{i:05}"), config.generic_words, &mut rng));
        }
        SyntheticBenchmark {
            tasks,
            bank: Registry::from_schemas(schemas).expect("generated schemas are valid"),
        }
    }
}

/// Pool-size-aware distractor source with exact control over query overlap.
#[derive(Debug, Clone)]
pub struct ControlledFixture {
    pub tasks: Vec<Task>,
    ground_truths: Registry,
    confusers: HashMap<String, McpSchema>,
    fillers: Vec<McpSchema>,
    degrade: bool,
}

impl ControlledFixture {
    /// Ground-truth documents equal their queries; fillers share no token with any query.
    pub fn token_disjoint(max_pool: usize, seed: u64) -> Self {
        Self::build(max_pool, seed, false)
    }

    /// Like `token_disjoint`, plus confusers for [`Self::confused_tasks`] tasks.
    pub fn degradation(max_pool: usize, seed: u64) -> Self {
        Self::build(max_pool, seed, true)
    }

    /// Number of tasks (out of 20) that get a confuser at `pool_size`:
    /// `round(20 · log10(N) / 3.3)`, capped at 20. 0 at N = 1, 12 at N = 100,
    /// 18 at N = 1000.
    pub fn confused_tasks(pool_size: usize) -> usize {
        if pool_size < 2 {
            return 0;
        }
        let n = (DOMAINS.len() as f64 * (pool_size as f64).log10() / 3.3).round() as usize;
        n.min(DOMAINS.len())
    }

    fn build(max_pool: usize, seed: u64, degrade: bool) -> Self {
        let mut tasks = Vec::new();
        let mut gts = Vec::new();
        let mut confusers = HashMap::new();
        for (i, (a, b)) in DOMAINS.iter().enumerate() {
            let (w3, w4, w5) = (reserved_word(i, 0), reserved_word(i, 1), reserved_word(i, 2));
            let gt_id = format!("gt-{i:02}");
            let tool = |name: &str, params: Vec<ParamDef>| ToolDef {
                name: name.to_owned(),
                description: String::new(),
                params,
            };
            let mut gt = McpSchema {
                id: gt_id.clone(),
                name: format!("{a} {b}"),
                description: format!("{w3} {w4}"),
                tags: vec![],
                endpoint: None,
                tools: vec![tool(&w5, vec![])],
            };
            // The confuser's document is the query; the ground truth adds extra words.
            let query = crate::registry::canonical_document(&gt).text;
            if degrade {
                confusers.insert(
                    gt_id.clone(),
                    McpSchema { id: format!("cf-{i:02}"), ..gt.clone() },
                );
                gt.description = format!("{w3} {w4} {} {}", reserved_word(i, 3), reserved_word(i, 4));
                gt.tools[0].params.push(ParamDef {
                    name: reserved_word(i, 5),
                    kind: ParamKind::String,
                    required: true,
                    description: String::new(),
                });
            }
            tasks.push(Task { id: format!("t{i:02}"), task: query, ground_truth_id: gt_id });
            gts.push(gt);
        }
        ControlledFixture {
            tasks,
            ground_truths: Registry::from_schemas(gts).expect("fixture schemas are valid"),
            confusers,
            fillers: filler_bank(max_pool.saturating_sub(1), seed),
            degrade,
        }
    }

    fn task_rank(&self, ground_truth_id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.ground_truth_id == ground_truth_id)
    }
}

impl DistractorSource for ControlledFixture {
    fn ground_truth(&self, id: &str) -> Option<&McpSchema> {
        self.ground_truths.get(id)
    }

    fn distractors(&self, pool_size: usize, ground_truth_id: &str) -> Vec<&McpSchema> {
        let wanted = pool_size.saturating_sub(1);
        let confused = self.degrade
            && self
                .task_rank(ground_truth_id)
                .is_some_and(|rank| rank < Self::confused_tasks(pool_size));
        let mut out = Vec::with_capacity(wanted);
        if confused && wanted > 0 {
            out.push(&self.confusers[ground_truth_id]);
        }
        let rest = wanted - out.len();
        out.extend(self.fillers.iter().take(rest));
        out
    }
}
