//! `hetrag`: ingest sources, build the index, ask questions, evaluate and
//! train the GNN re-ranker.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hetrag_core::config::{GeneratorKind, RerankStrategy};
use hetrag_core::Config;

#[derive(Debug, Parser)]
#[command(
    name = "hetrag",
    version,
    about = "Question answering over KG facts, tables and text"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML config file; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for evaluation.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_generator)]
    generator: Option<GeneratorKind>,
    /// Re-ranking strategy.
    #[arg(long, global = true, value_parser = parse_strategy)]
    rf: Option<RerankStrategy>,
    /// Evidence-presence cutoffs, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long = "pool-p", global = true)]
    pool_p: Option<usize>,
    /// Number of evidence pieces handed to the generator.
    #[arg(long = "topk-final", global = true)]
    topk_final: Option<usize>,
    /// GNN checkpoint(s), one per re-ranking round.
    #[arg(long, global = true, value_delimiter = ',')]
    model: Option<Vec<PathBuf>>,
}

fn parse_generator(s: &str) -> Result<GeneratorKind, String> {
    s.parse().map_err(|e: hetrag_core::Error| e.to_string())
}

fn parse_strategy(s: &str) -> Result<RerankStrategy, String> {
    s.parse().map_err(|e: hetrag_core::Error| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Verbalize KG facts, tables and text into an evidence pool.
    Ingest(commands::IngestArgs),
    /// Build and persist the BM25 index over the evidence pool.
    Index(commands::IndexArgs),
    /// Answer one question and print the supporting evidence.
    Ask(commands::AskArgs),
    /// Run a benchmark file and write a report.
    Eval(commands::EvalArgs),
    /// Train a GNN re-ranker from question-answer pairs.
    TrainRerank(commands::TrainArgs),
    /// Write a seeded synthetic benchmark.
    Synth(commands::SynthArgs),
}

impl GlobalArgs {
    fn load_config(&self) -> anyhow::Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        cfg.apply_process_env();
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(jobs) = self.jobs {
            cfg.eval.jobs = jobs;
        }
        if let Some(g) = self.generator {
            cfg.answer.generator = g;
        }
        if let Some(rf) = self.rf {
            cfg.rerank.strategy = rf;
        }
        if let Some(ks) = &self.k {
            cfg.eval.ks = ks.clone();
        }
        if let Some(p) = self.pool_p {
            cfg.retrieval.pool_p = p;
        }
        if let Some(k) = self.topk_final {
            cfg.rerank.stages = cfg.rerank.schedule().with_final_k(k).stages;
        }
        if let Some(models) = &self.model {
            cfg.rerank.model_paths = models.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Distinct exit status per error category.
fn exit_code(category: &str) -> u8 {
    match category {
        "io" => 10,
        "parse" => 11,
        "data" => 12,
        "model" => 13,
        "format" => 14,
        "config" => 15,
        "client" => 16,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = cli.global.load_config().and_then(|cfg| match &cli.command {
        Command::Ingest(a) => commands::ingest(a, &cfg),
        Command::Index(a) => commands::index(a, &cfg),
        Command::Ask(a) => commands::ask(a, &cfg),
        Command::Eval(a) => commands::eval(a, &cfg),
        Command::TrainRerank(a) => commands::train_rerank(a, &cfg),
        Command::Synth(a) => commands::synth(a, &cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let category = err
                .chain()
                .find_map(|e| e.downcast_ref::<hetrag_core::Error>())
                .map_or("internal", |e| e.category());
            eprintln!("error[{category}]: {err:#}");
            ExitCode::from(exit_code(category))
        }
    }
}
