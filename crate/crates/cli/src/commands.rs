use std::path::PathBuf;

use anyhow::Context;
use clap::Args;

use hetrag_core::eval::{run_benchmark, BenchmarkConfig};
use hetrag_core::ingest::Corpus;
use hetrag_core::jsonl::{read_records, write_records};
use hetrag_core::pipeline::load_store;
use hetrag_core::rerank::{gnn_train, GnnModel, HashedBowEncoder, TrainingGraph};
use hetrag_core::retrieval::bm25_build;
use hetrag_core::synth::{synth_benchmark, SynthConfig};
use hetrag_core::{si_concat, Catalog, Config, Entity, EvidencePiece, Pipeline, Question, SourceType};

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Entity catalog (JSON lines); defaults to `data.entities`.
    #[arg(long)]
    entities: Option<PathBuf>,
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long)]
    tables: Option<PathBuf>,
    #[arg(long)]
    texts: Option<PathBuf>,
    /// Write `catalog.jsonl` and `pool.jsonl` here instead of the configured paths.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

pub fn ingest(args: &IngestArgs, cfg: &Config) -> anyhow::Result<()> {
    let entities_path = args
        .entities
        .clone()
        .or_else(|| cfg.data.entities.clone())
        .context("no entity catalog given (--entities or data.entities)")?;
    let entities: Vec<Entity> = read_records(&entities_path)?;
    let catalog = Catalog::new(entities)?;
    let pick = |flag: &Option<PathBuf>, configured: &Option<PathBuf>| flag.clone().or_else(|| configured.clone());
    let kg = pick(&args.kg, &cfg.data.kg_facts);
    let tables = pick(&args.tables, &cfg.data.tables);
    let texts = pick(&args.texts, &cfg.data.texts);
    let corpus = Corpus::load(kg.as_deref(), tables.as_deref(), texts.as_deref())?;
    let pieces = corpus.verbalize(&catalog, cfg.data.kg_depth)?;
    if pieces.is_empty() {
        log::warn!("no evidence produced; the pool is empty");
        eprintln!("warning: no evidence produced; the pool is empty");
    }

    let (catalog_out, pool_out) = match &args.out_dir {
        Some(dir) => (dir.join("catalog.jsonl"), dir.join("pool.jsonl")),
        None => (cfg.data.catalog.clone(), cfg.data.pool.clone()),
    };
    for path in [&catalog_out, &pool_out] {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let n_entities = write_records(&catalog_out, catalog.entities())?;
    let n_pieces = write_records(&pool_out, &pieces)?;
    let count = |s: SourceType| pieces.iter().filter(|p| p.source == s).count();
    println!(
        "pool: {n_pieces} pieces ({} KG, {} table, {} text) -> {}",
        count(SourceType::Kg),
        count(SourceType::Table),
        count(SourceType::Text),
        pool_out.display()
    );
    println!("catalog: {n_entities} entities -> {}", catalog_out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Evidence pool; defaults to `data.pool`.
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Index file; defaults to `data.index`.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn index(args: &IndexArgs, cfg: &Config) -> anyhow::Result<()> {
    let pool_path = args.pool.clone().unwrap_or_else(|| cfg.data.pool.clone());
    let out = args.out.clone().unwrap_or_else(|| cfg.data.index.clone());
    let pieces: Vec<EvidencePiece> = read_records(&pool_path)?;
    let index = bm25_build(&pieces, cfg.retrieval.bm25_params())?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    index.save(&out)?;
    println!(
        "index: {} documents, {} terms -> {}",
        index.doc_count,
        index.postings.len(),
        out.display()
    );
    Ok(())
}

fn build_pipeline(cfg: &Config) -> anyhow::Result<Pipeline> {
    let (catalog, store) = load_store(cfg)?;
    Ok(Pipeline::from_config(cfg, catalog, store)?)
}

#[derive(Debug, Args)]
pub struct AskArgs {
    /// The question.
    question: String,
    /// Print the full outcome as JSON.
    #[arg(long)]
    json: bool,
}

pub fn ask(args: &AskArgs, cfg: &Config) -> anyhow::Result<()> {
    let pipeline = build_pipeline(cfg)?;
    let outcome = pipeline.answer(&Question::new("ask", args.question.as_str()))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&outcome)?);
        return Ok(());
    }
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    println!("answer: {}", outcome.answer.answer());
    println!("refrained: {}", outcome.answer.refrained());
    println!("SI: {}", si_concat(&outcome.si, &args.question));
    println!("evidence ({} pieces, * = supports the answer):", outcome.evidence.len());
    let support = outcome.answer.supporting_evidence();
    for (rank, piece) in outcome.evidence.iter().enumerate() {
        let mark = if support.contains(&piece.id) { '*' } else { ' ' };
        println!(
            "{mark}{:>3}. [{:.4}] {}  ({})",
            rank + 1,
            piece.score,
            piece.text,
            piece.provenance
        );
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Benchmark file: JSON lines with id, question, answers.
    questions: PathBuf,
    #[arg(long, default_value = "reports")]
    out_dir: PathBuf,
    /// Report file stem.
    #[arg(long, default_value = "report")]
    name: String,
}

pub fn eval(args: &EvalArgs, cfg: &Config) -> anyhow::Result<()> {
    let questions: Vec<Question> = read_records(&args.questions)?;
    let pipeline = build_pipeline(cfg)?;
    let bench = BenchmarkConfig {
        ks: cfg.eval.ks.clone(),
        jobs: cfg.eval.jobs,
    };
    let report = run_benchmark(&pipeline, &questions, &bench)?;
    report.write(&args.out_dir, &args.name)?;
    print!("{}", report.to_table());
    println!(
        "report: {} and {}",
        args.out_dir.join(format!("{}.json", args.name)).display(),
        args.out_dir.join(format!("{}.txt", args.name)).display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training questions with gold answers.
    #[arg(long)]
    train: PathBuf,
    /// Dev questions for epoch selection.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
}

fn training_graphs(pipeline: &Pipeline, questions: &[Question], cfg: &Config) -> anyhow::Result<Vec<TrainingGraph>> {
    let caps = cfg.rerank.training_caps();
    let encoder = HashedBowEncoder { dim: cfg.rerank.dim };
    questions
        .iter()
        .map(|q| {
            let si = pipeline.understand(q)?;
            let mut pool = pipeline.retrieve(q, &si);
            pool.truncate(caps.evidence_cap);
            let query = si_concat(&si, &q.text);
            Ok(TrainingGraph::from_pool(
                &pool,
                &q.gold_answers,
                &query,
                pipeline.catalog(),
                caps,
                &encoder,
            ))
        })
        .collect()
}

pub fn train_rerank(args: &TrainArgs, cfg: &Config) -> anyhow::Result<()> {
    let (catalog, store) = load_store(cfg)?;
    // Only retrieval is needed here, so the configured re-ranker is not loaded.
    let pipeline = Pipeline::new(catalog, store).with_retrieval(cfg.retrieval.clone());
    let train: Vec<Question> = read_records(&args.train)?;
    let dev: Vec<Question> = match &args.dev {
        Some(path) => read_records(path)?,
        None => Vec::new(),
    };
    let train_graphs = training_graphs(&pipeline, &train, cfg)?;
    let dev_graphs = training_graphs(&pipeline, &dev, cfg)?;
    let model = GnnModel::new(cfg.rerank.layers, cfg.rerank.dim, cfg.seed);
    let mut train_cfg = cfg.rerank.train;
    train_cfg.shuffle_seed = cfg.seed;
    let outcome = gnn_train(model, &train_graphs, &dev_graphs, &train_cfg)?;
    println!("initial loss {:.6}", outcome.initial_loss);
    for epoch in &outcome.history {
        let dev = epoch
            .dev_ap_at_30
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        println!(
            "epoch {:>3}  loss {:.6}  dev AP@30 {dev}",
            epoch.epoch, epoch.train_loss
        );
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    outcome.model.save(&args.out)?;
    println!("best epoch {} -> {}", outcome.best_epoch, args.out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = SynthConfig::default().questions)]
    questions: usize,
    #[arg(long, default_value_t = SynthConfig::default().pool_size)]
    pool_size: usize,
    #[arg(long, default_value_t = SynthConfig::default().relevant_per_question)]
    relevant: usize,
    #[arg(long, default_value_t = SynthConfig::default().max_distractors)]
    max_distractors: usize,
}

pub fn synth(args: &SynthArgs, cfg: &Config) -> anyhow::Result<()> {
    let bench = synth_benchmark(&SynthConfig {
        questions: args.questions,
        pool_size: args.pool_size,
        relevant_per_question: args.relevant,
        max_distractors: args.max_distractors,
        seed: cfg.seed,
    })?;
    bench.write(&args.out_dir)?;
    println!(
        "synthetic benchmark: {} questions, {} pieces, {} entities -> {}",
        bench.items.len(),
        bench.items.iter().map(|i| i.pool.len()).sum::<usize>(),
        bench.catalog.len(),
        args.out_dir.display()
    );
    Ok(())
}
