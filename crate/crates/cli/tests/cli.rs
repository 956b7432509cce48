//! End-to-end runs of the `hetrag` binary on the bundled toy corpus and on
//! small synthetic benchmarks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

/// Config reading the toy sources and writing every artifact under `dir`.
fn toy_config(dir: &Path) -> PathBuf {
    let toy = toy_dir();
    let path = dir.join("config.toml");
    let text = format!(
        r#"seed = 7

[data]
entities = "{entities}"
kg_facts = "{kg}"
tables = "{tables}"
texts = "{texts}"
catalog = "build/catalog.jsonl"
pool = "build/pool.jsonl"
index = "build/index.bm25"
"#,
        entities = toy.join("entities.jsonl").display(),
        kg = toy.join("kg_facts.jsonl").display(),
        tables = toy.join("tables.jsonl").display(),
        texts = toy.join("text_docs.jsonl").display(),
    );
    fs::write(&path, text).unwrap();
    path
}

fn hetrag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetrag"))
        .args(args)
        .env_remove("QUASAR_GENERATOR_URL")
        .env_remove("QUASAR_SCORER_URL_1")
        .env_remove("QUASAR_SCORER_URL_2")
        .env_remove("QUASAR_SI_MODEL_URL")
        .output()
        .unwrap()
}

fn succeed(args: &[&str]) -> String {
    let out = hetrag(args);
    assert!(
        out.status.success(),
        "hetrag {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Ingests and indexes the toy corpus into a fresh directory.
fn built_toy() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let ingest = succeed(&["--config", s(&cfg), "ingest"]);
    assert!(ingest.contains("pool: 49 pieces"), "{ingest}");
    let index = succeed(&["--config", s(&cfg), "index"]);
    assert!(index.contains("49 documents"), "{index}");
    assert!(dir.path().join("build/index.bm25").exists());
    (dir, cfg)
}

#[test]
fn ask_answers_with_provenance() {
    let (_dir, cfg) = built_toy();
    let out = succeed(&["--config", s(&cfg), "ask", "Which Chinese player joined the NBA first?"]);
    assert!(out.starts_with("answer: Wang Zhizhi\n"), "{out}");
    assert!(out.contains("refrained: false"));
    assert!(out.contains("(table wang_career (\"Wang Zhizhi\") row 0)"));
    assert!(out.lines().any(|l| l.starts_with('*')));

    let json: Value = serde_json::from_str(&succeed(&[
        "--config",
        s(&cfg),
        "--topk-final",
        "5",
        "ask",
        "--json",
        "Which Chinese player joined the NBA first?",
    ]))
    .unwrap();
    assert_eq!(json["evidence"].as_array().unwrap().len(), 5);
}

#[test]
fn eval_is_deterministic_and_accurate() {
    let (dir, cfg) = built_toy();
    let questions = toy_dir().join("questions.jsonl");
    let reports = dir.path().join("reports");
    let run = |name: &str, jobs: &str| {
        succeed(&[
            "--config",
            s(&cfg),
            "--jobs",
            jobs,
            "eval",
            s(&questions),
            "--out-dir",
            s(&reports),
            "--name",
            name,
        ]);
        fs::read_to_string(reports.join(format!("{name}.json"))).unwrap()
    };
    let first = run("a", "1");
    assert_eq!(first, run("b", "1"));
    assert_eq!(first, run("c", "2"));
    let report: Value = serde_json::from_str(&first).unwrap();
    assert!(report["aggregates"]["p_at_1"].as_f64().unwrap() >= 0.9);
    assert_eq!(report["rows"].as_array().unwrap().len(), 10);
    assert!(reports.join("a.txt").exists());
}

#[test]
fn rules_are_overridable_from_flags() {
    let (dir, cfg) = built_toy();
    let reports = dir.path().join("reports");
    let out = succeed(&[
        "--config",
        s(&cfg),
        "--rf",
        "bm25",
        "--k",
        "5,10",
        "eval",
        s(&toy_dir().join("questions.jsonl")),
        "--out-dir",
        s(&reports),
    ]);
    assert!(
        out.contains("AP@5") && out.contains("AP@10") && !out.contains("AP@30"),
        "{out}"
    );
}

#[test]
fn error_categories_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(hetrag(&["--config", s(&missing), "index"]).status.code(), Some(10));

    let bad_key = dir.path().join("bad.toml");
    fs::write(&bad_key, "[nope]\nx = 1\n").unwrap();
    let out = hetrag(&["--config", s(&bad_key), "index"]);
    assert_eq!(out.status.code(), Some(15));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config]"));

    let garbled = dir.path().join("pool.jsonl");
    fs::write(&garbled, "{\"id\": \"x\"\nnot json\n").unwrap();
    let out = hetrag(&["index", "--pool", s(&garbled), "--out", s(&dir.path().join("i"))]);
    assert_eq!(out.status.code(), Some(11));

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = hetrag(&["index", "--pool", s(&empty), "--out", s(&dir.path().join("i"))]);
    assert_eq!(out.status.code(), Some(12));

    let (_toy, cfg) = built_toy();
    let out = hetrag(&["--config", s(&cfg), "--rf", "gnn", "ask", "anything"]);
    assert_eq!(out.status.code(), Some(15));

    // clap usage errors keep clap's own status
    assert_eq!(hetrag(&["--rf", "magic", "ask", "x"]).status.code(), Some(2));
}

/// Synthetic corpus plus a config pointing at it.
fn synthetic(dir: &Path, questions: usize, seed: &str) -> PathBuf {
    let data = dir.join("data");
    succeed(&[
        "--seed",
        seed,
        "synth",
        "--out-dir",
        s(&data),
        "--questions",
        &questions.to_string(),
        "--pool-size",
        "60",
        "--relevant",
        "2",
        "--max-distractors",
        "10",
    ]);
    let cfg = dir.join("config.toml");
    fs::write(
        &cfg,
        "seed = 3\n[data]\ncatalog = \"data/catalog.jsonl\"\npool = \"data/pool.jsonl\"\nindex = \"data/index.bm25\"\n[rerank]\ndim = 16\nlayers = 2\n[rerank.train]\nepochs = 2\n",
    )
    .unwrap();
    cfg
}

#[test]
fn train_rerank_is_reproducible_and_usable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic(dir.path(), 12, "5");
    let questions = dir.path().join("data/questions.jsonl");
    succeed(&["--config", s(&cfg), "index"]);
    let train = |out: &Path| {
        let log = succeed(&[
            "--config",
            s(&cfg),
            "train-rerank",
            "--train",
            s(&questions),
            "--dev",
            s(&questions),
            "--out",
            s(out),
        ]);
        assert!(log.contains("epoch   1") && log.contains("best epoch"), "{log}");
        fs::read(out).unwrap()
    };
    let a = train(&dir.path().join("a.ckpt"));
    let b = train(&dir.path().join("b.ckpt"));
    assert_eq!(a, b);

    let out = succeed(&[
        "--config",
        s(&cfg),
        "--rf",
        "gnn",
        "--model",
        s(&dir.path().join("a.ckpt")),
        "eval",
        s(&questions),
        "--out-dir",
        s(&dir.path().join("reports")),
    ]);
    assert!(out.contains("questions               12"), "{out}");
}

#[test]
fn synth_is_seeded() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synthetic(a.path(), 5, "9");
    synthetic(b.path(), 5, "9");
    for file in ["catalog.jsonl", "pool.jsonl", "questions.jsonl"] {
        assert_eq!(
            fs::read(a.path().join("data").join(file)).unwrap(),
            fs::read(b.path().join("data").join(file)).unwrap(),
            "{file} differs"
        );
    }
}
