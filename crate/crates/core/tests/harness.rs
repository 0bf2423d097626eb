use ragmcp_core::harness::{
    grid_csv_string, read_grid_csv, run_sweep, run_sweep_with, ControlledFixture, MetricsReport, PositionRule,
    SweepConfig, SyntheticBenchmark, SyntheticConfig, TrialOutcome,
};
use ragmcp_core::selection::{build_prompt, Strategy};
use ragmcp_core::{count_tokens, EmbedderConfig, ExecMode, LexicalSelector};

fn bench() -> SyntheticBenchmark {
    SyntheticBenchmark::generate(&SyntheticConfig { distractors: 400, ..Default::default() })
}

fn sweep(strategies: Vec<Strategy>, pool_sizes: Vec<usize>, bench: &SyntheticBenchmark) -> Vec<TrialOutcome> {
    let config = SweepConfig {
        pool_sizes,
        positions: PositionRule::Spread(2),
        tasks: bench.tasks.clone(),
        trials_per_cell: 1,
        seed: 11,
        strategy: None,
        strategies,
        record_latency: false,
    };
    run_sweep(&config, &bench.bank, &EmbedderConfig::default(), &LexicalSelector).unwrap()
}

fn mean_tokens(outcomes: &[TrialOutcome], n: usize) -> f64 {
    let sel: Vec<_> = outcomes.iter().filter(|o| o.spec.pool_size == n).collect();
    sel.iter().map(|o| o.prompt_tokens as f64).sum::<f64>() / sel.len() as f64
}

#[test]
fn blank_prompt_tokens_grow_with_pool_size() {
    let b = bench();
    let sizes = vec![1, 2, 3, 5, 10, 30, 100, 400];
    let out = sweep(vec![Strategy::blank()], sizes.clone(), &b);
    let means: Vec<f64> = sizes.iter().map(|&n| mean_tokens(&out, n)).collect();
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
}

#[test]
fn rag_prompt_tokens_do_not_depend_on_pool_size() {
    let b = bench();
    let k = 3;
    let out = sweep(vec![Strategy::rag(k)], vec![1, 10, 100, 400], &b);
    // bound: task line plus the k largest single-schema prompt blocks in the bank
    let mut blocks: Vec<u64> = b
        .bank
        .iter()
        .map(|s| count_tokens(&build_prompt("", &[s])).value() - count_tokens("TASK:").value())
        .collect();
    blocks.sort_unstable_by(|x, y| y.cmp(x));
    let block_budget: u64 = blocks[..k].iter().sum();
    for o in &out {
        let task_line = count_tokens(&format!("TASK: {}", o.spec.task)).value();
        assert!(o.prompt_tokens <= task_line + block_budget, "{o:?}");
    }
}

#[test]
fn rag_wins_over_baselines_on_the_synthetic_bank() {
    let b = bench();
    let out = sweep(vec![Strategy::rag(1), Strategy::actual_match(), Strategy::blank()], vec![100], &b);
    let report = MetricsReport::from_outcomes(&out).unwrap();
    let acc = |s: &str| report.row(s).unwrap().accuracy_pct;
    assert_eq!(acc("rag_mcp"), 100.0);
    assert!(acc("rag_mcp") > acc("actual_match"));
    assert!(acc("actual_match") >= acc("blank_conditioning"));
}

#[test]
fn sweeps_are_byte_reproducible() {
    let b = bench();
    let mut config = SweepConfig::desk_default(b.tasks[..6].to_vec());
    config.pool_sizes = vec![1, 3, 10, 30, 100];
    let runs: Vec<_> = [ExecMode::Sequential, ExecMode::Parallel, ExecMode::Parallel]
        .into_iter()
        .map(|mode| run_sweep_with(mode, &config, &b.bank, &EmbedderConfig::default(), &LexicalSelector).unwrap())
        .collect();
    let csv = grid_csv_string(&runs[0]);
    let json = MetricsReport::from_outcomes(&runs[0]).unwrap().to_json();
    for run in &runs[1..] {
        assert_eq!(grid_csv_string(run), csv);
        assert_eq!(MetricsReport::from_outcomes(run).unwrap().to_json(), json);
    }
    // the grid alone reproduces the metrics
    let rows = read_grid_csv(csv.as_bytes()).unwrap();
    assert_eq!(MetricsReport::from_rows(&rows).unwrap().to_json(), json);
}

#[test]
fn token_disjoint_fixture_is_always_solved() {
    let fixture = ControlledFixture::token_disjoint(1000, 3);
    for t in &fixture.tasks {
        assert_eq!(count_tokens(&t.task).value() as usize, t.task.split_whitespace().count());
    }
    let config = SweepConfig {
        pool_sizes: vec![1, 10, 100, 1000],
        positions: PositionRule::Spread(2),
        tasks: fixture.tasks.clone(),
        trials_per_cell: 1,
        seed: 5,
        strategy: Some(Strategy::rag(1)),
        strategies: vec![],
        record_latency: false,
    };
    let out = run_sweep(&config, &fixture, &EmbedderConfig::default(), &LexicalSelector).unwrap();
    assert!(out.iter().all(|o| o.success));
}

#[test]
fn degradation_fixture_follows_its_schedule() {
    let fixture = ControlledFixture::degradation(1000, 3);
    let sizes = [1, 10, 100, 1000];
    let config = SweepConfig {
        pool_sizes: sizes.to_vec(),
        positions: PositionRule::Spread(1),
        tasks: fixture.tasks.clone(),
        trials_per_cell: 1,
        seed: 5,
        strategy: Some(Strategy::rag(1)),
        strategies: vec![],
        record_latency: false,
    };
    let out = run_sweep(&config, &fixture, &EmbedderConfig::default(), &LexicalSelector).unwrap();
    for n in sizes {
        let wins = out.iter().filter(|o| o.spec.pool_size == n && o.success).count();
        assert_eq!(wins, 20 - ControlledFixture::confused_tasks(n), "N={n}");
    }
}
