use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ragmcp_core::harness::{read_grid_csv, MetricsReport};
use ragmcp_core::selection::StrategyKind;
use ragmcp_core::{Catalog, EmbedderConfig, RetrieveRequest};
use ragmcp_gateway::config::{self, ServeConfig};
use ragmcp_gateway::selector_from_env;
use ragmcp_gateway::server;
use ragmcp_gateway::stress::{run_stress, StressConfig};

#[derive(Parser)]
#[command(name = "ragmcp", version, about = "Retrieval-augmented MCP server selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP gateway.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Index snapshots.
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Retrieve candidates for one query and print the response as JSON.
    Retrieve(RetrieveArgs),
    /// Stress-test sweeps.
    Stress {
        #[command(subcommand)]
        command: StressCommand,
    },
    /// Print the metrics table for a grid CSV.
    Report {
        #[arg(long)]
        grid: PathBuf,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Embed a registry and write the index snapshot.
    Build {
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        embedder: EmbedderArgs,
    },
}

#[derive(Subcommand)]
enum StressCommand {
    /// Run a sweep and write grid.csv, metrics.json and metrics.txt.
    Run {
        /// Sweep config; the desk-scale default when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct EmbedderArgs {
    /// Hashed embedding dimension.
    #[arg(long, default_value_t = 1024)]
    dimension: usize,
}

impl EmbedderArgs {
    fn config(&self) -> EmbedderConfig {
        EmbedderConfig::hashed(self.dimension).with_env()
    }
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    registry: PathBuf,
    /// Reuse this index snapshot when it matches the registry.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value = "rag_mcp")]
    strategy: StrategyKind,
    #[arg(long)]
    no_validate: bool,
    #[command(flatten)]
    embedder: EmbedderArgs,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve { config } => {
            let config = ServeConfig::load(&config)?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(server::serve(config, selector_from_env()))
        }
        Command::Index { command: IndexCommand::Build { registry, out, embedder } } => {
            let registry = config::read_registry(&registry)?;
            let catalog = Catalog::build(registry, &embedder.config())?;
            config::write_snapshot(&catalog, &out)?;
            println!("indexed {} schemas (dimension {}) into {}", catalog.len(), catalog.index().dimension(), out.display());
            Ok(())
        }
        Command::Retrieve(args) => {
            let registry = config::read_registry(&args.registry)?;
            let catalog = config::open_catalog(registry, &args.embedder.config(), args.snapshot.as_deref(), false)?;
            let request = RetrieveRequest {
                query: args.query,
                k: args.k,
                strategy: args.strategy,
                validate: !args.no_validate,
            };
            let response = catalog.retrieve(&request, selector_from_env().as_ref())?;
            println!("{}", serde_json::to_string_pretty(&response)?);
            Ok(())
        }
        Command::Stress { command: StressCommand::Run { config, out } } => {
            let config = match config {
                Some(path) => StressConfig::load(&path)?,
                None => StressConfig::desk_default(),
            };
            let run = run_stress(&config, selector_from_env().as_ref())?;
            run.write(&out)?;
            print!("{}", run.report.to_table());
            Ok(())
        }
        Command::Report { grid, json } => {
            let file = File::open(&grid).with_context(|| format!("opening {}", grid.display()))?;
            let rows = read_grid_csv(BufReader::new(file))?;
            let report = MetricsReport::from_rows(&rows)?;
            if json {
                print!("{}", report.to_json());
            } else {
                print!("{}", report.to_table());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
