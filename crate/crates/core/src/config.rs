//! TOML configuration with one section per stage, plus environment
//! overrides for service endpoints.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rerank::{GraphCaps, RerankSchedule, TrainConfig};
use crate::retrieval::RetrievalConfig;

pub const ENV_GENERATOR_URL: &str = "QUASAR_GENERATOR_URL";
pub const ENV_SCORER_URL_1: &str = "QUASAR_SCORER_URL_1";
pub const ENV_SCORER_URL_2: &str = "QUASAR_SCORER_URL_2";
pub const ENV_SI_MODEL_URL: &str = "QUASAR_SI_MODEL_URL";

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct Config {
    /// Seeds model initialization and training order.
    pub seed: u64,
    pub data: DataConfig,
    pub qu: QuConfig,
    pub retrieval: RetrievalConfig,
    pub rerank: RerankConfig,
    pub answer: AnswerConfig,
    pub eval: EvalConfig,
}

/// Artifact locations. Relative paths are resolved against the directory of
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Ingest inputs: entity catalog and raw sources.
    pub entities: Option<PathBuf>,
    pub kg_facts: Option<PathBuf>,
    pub tables: Option<PathBuf>,
    pub texts: Option<PathBuf>,
    /// Ingest outputs and index.
    pub catalog: PathBuf,
    pub pool: PathBuf,
    pub index: PathBuf,
    /// KG traversal depth at ingest time.
    pub kg_depth: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            entities: None,
            kg_facts: None,
            tables: None,
            texts: None,
            catalog: PathBuf::from("catalog.jsonl"),
            pool: PathBuf::from("pool.jsonl"),
            index: PathBuf::from("index.bm25"),
            kg_depth: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SiMode {
    #[default]
    Rules,
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuConfig {
    pub mode: SiMode,
    pub model_url: Option<String>,
    pub timeout_ms: u64,
}

impl Default for QuConfig {
    fn default() -> Self {
        QuConfig {
            mode: SiMode::Rules,
            model_url: None,
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RerankStrategy {
    Gnn,
    /// Cross-encoder endpoints, or the lexical fallback when none are set.
    #[default]
    Ce,
    /// Keep the retrieval order and only truncate.
    Bm25,
}

impl std::str::FromStr for RerankStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gnn" => Ok(RerankStrategy::Gnn),
            "ce" => Ok(RerankStrategy::Ce),
            "bm25" => Ok(RerankStrategy::Bm25),
            other => Err(Error::Config(format!("unknown re-ranking strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankConfig {
    pub strategy: RerankStrategy,
    /// `[input_k, output_k]` per round.
    pub stages: Vec<(usize, usize)>,
    pub evidence_cap: usize,
    pub entity_cap: usize,
    pub train_evidence_cap: usize,
    pub train_entity_cap: usize,
    pub layers: usize,
    pub dim: usize,
    /// One checkpoint per round; the last one serves any further rounds.
    pub model_paths: Vec<PathBuf>,
    pub stage1_scorer_url: Option<String>,
    pub stage2_scorer_url: Option<String>,
    pub timeout_ms: u64,
    pub train: TrainConfig,
}

impl Default for RerankConfig {
    fn default() -> Self {
        let schedule = RerankSchedule::default();
        let training = GraphCaps::training();
        RerankConfig {
            strategy: RerankStrategy::default(),
            stages: schedule.stages,
            evidence_cap: schedule.evidence_cap,
            entity_cap: schedule.entity_cap,
            train_evidence_cap: training.evidence_cap,
            train_entity_cap: training.entity_cap,
            layers: 3,
            dim: 64,
            model_paths: Vec::new(),
            stage1_scorer_url: None,
            stage2_scorer_url: None,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            train: TrainConfig::default(),
        }
    }
}

impl RerankConfig {
    pub fn schedule(&self) -> RerankSchedule {
        RerankSchedule {
            stages: self.stages.clone(),
            evidence_cap: self.evidence_cap,
            entity_cap: self.entity_cap,
        }
    }

    pub fn training_caps(&self) -> GraphCaps {
        GraphCaps {
            evidence_cap: self.train_evidence_cap,
            entity_cap: self.train_entity_cap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// Deterministic extractive generator; needs no network.
    #[default]
    Oracle,
    Remote,
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oracle" => Ok(GeneratorKind::Oracle),
            "remote" => Ok(GeneratorKind::Remote),
            other => Err(Error::Config(format!("unknown generator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnswerConfig {
    pub generator: GeneratorKind,
    pub generator_url: Option<String>,
    pub timeout_ms: u64,
    pub max_answer_tokens: usize,
    /// Use the extractive generator when the remote one fails.
    pub fallback_to_oracle: bool,
}

impl Default for AnswerConfig {
    fn default() -> Self {
        AnswerConfig {
            generator: GeneratorKind::Oracle,
            generator_url: None,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_answer_tokens: 32,
            fallback_to_oracle: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ks: crate::eval::DEFAULT_KS.to_vec(),
            jobs: 1,
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its data paths relative to it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for source in [
            &mut self.data.entities,
            &mut self.data.kg_facts,
            &mut self.data.tables,
            &mut self.data.texts,
        ] {
            source.iter_mut().for_each(fix);
        }
        fix(&mut self.data.catalog);
        fix(&mut self.data.pool);
        fix(&mut self.data.index);
        self.rerank.model_paths.iter_mut().for_each(fix);
    }

    /// Endpoint URLs from the environment replace configured ones.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        let set = |key: &str, slot: &mut Option<String>| {
            if let Some(v) = lookup(key).filter(|v| !v.trim().is_empty()) {
                *slot = Some(v);
            }
        };
        set(ENV_GENERATOR_URL, &mut self.answer.generator_url);
        set(ENV_SCORER_URL_1, &mut self.rerank.stage1_scorer_url);
        set(ENV_SCORER_URL_2, &mut self.rerank.stage2_scorer_url);
        set(ENV_SI_MODEL_URL, &mut self.qu.model_url);
    }

    pub fn apply_process_env(&mut self) {
        self.apply_env(|k| std::env::var(k).ok());
    }

    pub fn validate(&self) -> Result<()> {
        self.retrieval.validate()?;
        self.rerank.schedule().validate()?;
        if self.rerank.dim == 0 {
            return Err(Error::Config("rerank.dim must be positive".into()));
        }
        if self.rerank.train.learning_rate <= 0.0 || !self.rerank.train.learning_rate.is_finite() {
            return Err(Error::Config("rerank.train.learning_rate must be positive".into()));
        }
        if self.eval.ks.contains(&0) {
            return Err(Error::Config("eval.ks entries must be at least 1".into()));
        }
        if self.eval.jobs == 0 {
            return Err(Error::Config("eval.jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_file() {
        let cfg = Config::from_toml_str("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.rerank.stages, vec![(1000, 100), (100, 30)]);
        assert_eq!(cfg.retrieval.pool_p, 1000);
        assert_eq!(cfg.answer.generator, GeneratorKind::Oracle);
        assert_eq!(cfg.eval.ks, vec![30, 100, 1000]);
    }

    #[test]
    fn sections_parse() {
        let cfg = Config::from_toml_str(
            r#"
            seed = 7
            [retrieval]
            pool_p = 200
            [rerank]
            strategy = "bm25"
            stages = [[200, 10]]
            [rerank.train]
            epochs = 2
            [answer]
            generator = "remote"
            generator_url = "http://localhost:1"
            [eval]
            ks = [5, 30]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.retrieval.pool_p, 200);
        assert_eq!(cfg.retrieval.anchor_k, 10);
        assert_eq!(cfg.rerank.strategy, RerankStrategy::Bm25);
        assert_eq!(cfg.rerank.stages, vec![(200, 10)]);
        assert_eq!(cfg.rerank.train.epochs, 2);
        assert_eq!(cfg.rerank.train.learning_rate, 0.01);
        assert_eq!(cfg.answer.generator, GeneratorKind::Remote);
        assert_eq!(cfg.eval.ks, vec![5, 30]);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(
            Config::from_toml_str("[rerank]\nstages = [[10, 20]]"),
            Err(Error::Invalid(_)) | Err(Error::Config(_))
        ));
        assert!(matches!(
            Config::from_toml_str("[eval]\nks = [0]"),
            Err(Error::Config(_))
        ));
        assert!(matches!(Config::from_toml_str("[nope]\nx = 1"), Err(Error::Config(_))));
        assert!(matches!(
            Config::from_toml_str("[answer]\ngenerator = \"gpt\""),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn env_overrides_endpoints() {
        let mut cfg = Config::default();
        cfg.answer.generator_url = Some("http://config".into());
        cfg.apply_env(|k| match k {
            ENV_GENERATOR_URL => Some("http://env".into()),
            ENV_SCORER_URL_2 => Some("http://ce2".into()),
            ENV_SCORER_URL_1 => Some("  ".into()),
            _ => None,
        });
        assert_eq!(cfg.answer.generator_url.as_deref(), Some("http://env"));
        assert_eq!(cfg.rerank.stage1_scorer_url, None);
        assert_eq!(cfg.rerank.stage2_scorer_url.as_deref(), Some("http://ce2"));
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("quasar.toml");
        std::fs::write(&path, "[data]\npool = \"p.jsonl\"\nindex = \"/abs/idx\"\n").unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.data.pool, dir.path().join("p.jsonl"));
        assert_eq!(cfg.data.index, PathBuf::from("/abs/idx"));
    }

    #[test]
    fn toml_round_trip() {
        let cfg = Config::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(Config::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn strategy_names() {
        assert_eq!("GNN".parse::<RerankStrategy>().unwrap(), RerankStrategy::Gnn);
        assert!("x".parse::<RerankStrategy>().is_err());
    }
}
