//! End-to-end orchestration: understanding, retrieval, re-ranking, answering.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::answer::{
    attach_support, build_prompt, extractive_oracle_generate, generate, Generator, GeneratorRequest, HttpGenerator,
};
use crate::catalog::Catalog;
use crate::config::{Config, GeneratorKind, RerankStrategy, SiMode};
use crate::error::{Error, Result};
use crate::intent::{generate_si_model, generate_si_rules, HttpSiModelClient, SiModelClient};
use crate::jsonl::read_records;
use crate::rerank::{
    run_schedule, CrossEncoderScorers, GnnModel, GnnScorer, HttpScorer, RelevanceScorer, RerankContext, RerankSchedule,
    RetrievalOrder, StageScorer,
};
use crate::retrieval::{Anchorer, Bm25Index, EvidenceStore, LexicalAnchorer, RetrievalConfig};
use crate::types::{si_concat, AnswerResult, Entity, EvidencePiece, Question, StructuredIntent};

/// Everything produced for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub question_id: String,
    pub si: StructuredIntent,
    /// The retrieval pool, in BM25 order.
    pub pool: Vec<EvidencePiece>,
    /// The pool after re-ranking: survivors first, then dropped pieces.
    pub ranking: Vec<EvidencePiece>,
    /// Evidence given to the generator.
    pub evidence: Vec<EvidencePiece>,
    pub prompt: String,
    pub answer: AnswerResult,
    /// Non-fatal problems, such as a generator fallback.
    pub warnings: Vec<String>,
}

pub struct Pipeline {
    catalog: Catalog,
    store: EvidenceStore,
    retrieval: RetrievalConfig,
    schedule: RerankSchedule,
    anchorer: Box<dyn Anchorer>,
    si_client: Option<Box<dyn SiModelClient>>,
    reranker: Box<dyn StageScorer>,
    generator: Option<Box<dyn Generator>>,
    fallback_to_oracle: bool,
    max_answer_tokens: usize,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("catalog", &self.catalog.len())
            .field("pieces", &self.store.pieces().len())
            .field("retrieval", &self.retrieval)
            .field("schedule", &self.schedule)
            .field("si_model", &self.si_client.is_some())
            .field("generator", &self.generator.as_ref().map(|g| g.endpoint().to_string()))
            .finish()
    }
}

impl Pipeline {
    /// Offline defaults: rules-based SI, lexical anchoring, retrieval-order
    /// re-ranking and the extractive generator.
    pub fn new(catalog: Catalog, store: EvidenceStore) -> Self {
        Pipeline {
            catalog,
            store,
            retrieval: RetrievalConfig::default(),
            schedule: RerankSchedule::default(),
            anchorer: Box::new(LexicalAnchorer),
            si_client: None,
            reranker: Box::new(RetrievalOrder),
            generator: None,
            fallback_to_oracle: true,
            max_answer_tokens: 32,
        }
    }

    pub fn with_retrieval(mut self, cfg: RetrievalConfig) -> Self {
        self.retrieval = cfg;
        self
    }

    pub fn with_schedule(mut self, schedule: RerankSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_anchorer(mut self, anchorer: Box<dyn Anchorer>) -> Self {
        self.anchorer = anchorer;
        self
    }

    pub fn with_si_client(mut self, client: Box<dyn SiModelClient>) -> Self {
        self.si_client = Some(client);
        self
    }

    pub fn with_reranker(mut self, reranker: Box<dyn StageScorer>) -> Self {
        self.reranker = reranker;
        self
    }

    /// A remote generator; `fallback_to_oracle` decides what happens when it
    /// cannot be reached.
    pub fn with_generator(mut self, generator: Box<dyn Generator>, fallback_to_oracle: bool) -> Self {
        self.generator = Some(generator);
        self.fallback_to_oracle = fallback_to_oracle;
        self
    }

    pub fn with_max_answer_tokens(mut self, n: usize) -> Self {
        self.max_answer_tokens = n;
        self
    }

    /// Builds every stage from `cfg`, loading GNN checkpoints and creating
    /// HTTP clients as configured.
    pub fn from_config(cfg: &Config, catalog: Catalog, store: EvidenceStore) -> Result<Self> {
        cfg.validate()?;
        let mut pipeline = Pipeline::new(catalog, store)
            .with_retrieval(cfg.retrieval.clone())
            .with_schedule(cfg.rerank.schedule())
            .with_max_answer_tokens(cfg.answer.max_answer_tokens);

        if cfg.qu.mode == SiMode::Model {
            let url = cfg
                .qu
                .model_url
                .as_deref()
                .ok_or_else(|| Error::Config("qu.mode = \"model\" needs qu.model_url".into()))?;
            pipeline = pipeline.with_si_client(Box::new(HttpSiModelClient::new(url, cfg.qu.timeout_ms)?));
        }

        let reranker: Box<dyn StageScorer> = match cfg.rerank.strategy {
            RerankStrategy::Bm25 => Box::new(RetrievalOrder),
            RerankStrategy::Ce => {
                let mut stages: Vec<Option<Arc<dyn RelevanceScorer>>> = Vec::new();
                for url in [&cfg.rerank.stage1_scorer_url, &cfg.rerank.stage2_scorer_url] {
                    stages.push(match url {
                        Some(u) => Some(Arc::new(HttpScorer::new(u.as_str(), cfg.rerank.timeout_ms)?)),
                        None => None,
                    });
                }
                Box::new(CrossEncoderScorers::new(stages))
            }
            RerankStrategy::Gnn => {
                if cfg.rerank.model_paths.is_empty() {
                    return Err(Error::Config(
                        "rerank.strategy = \"gnn\" needs rerank.model_paths (see train-rerank)".into(),
                    ));
                }
                let models = cfg
                    .rerank
                    .model_paths
                    .iter()
                    .map(GnnModel::load)
                    .collect::<Result<Vec<_>>>()?;
                Box::new(GnnScorer::new(models)?)
            }
        };
        pipeline = pipeline.with_reranker(reranker);

        if cfg.answer.generator == GeneratorKind::Remote {
            let url = cfg.answer.generator_url.as_deref().ok_or_else(|| {
                Error::Config("answer.generator = \"remote\" needs answer.generator_url or QUASAR_GENERATOR_URL".into())
            })?;
            let client = HttpGenerator::new(url, cfg.answer.timeout_ms)?;
            pipeline = pipeline.with_generator(Box::new(client), cfg.answer.fallback_to_oracle);
        }
        Ok(pipeline)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn store(&self) -> &EvidenceStore {
        &self.store
    }

    pub fn schedule(&self) -> &RerankSchedule {
        &self.schedule
    }

    pub fn understand(&self, q: &Question) -> Result<StructuredIntent> {
        match &self.si_client {
            Some(client) => Ok(generate_si_model(q, client.as_ref(), &self.catalog)?),
            None => Ok(generate_si_rules(q, &self.catalog)),
        }
    }

    /// The BM25-ordered candidate pool for `q` under `si`.
    pub fn retrieve(&self, q: &Question, si: &StructuredIntent) -> Vec<EvidencePiece> {
        self.store
            .retrieve(q, si, &self.catalog, self.anchorer.as_ref(), &self.retrieval)
    }

    pub fn answer(&self, q: &Question) -> Result<QuestionOutcome> {
        let si = self.understand(q)?;
        let pool = self.retrieve(q, &si);
        let query = si_concat(&si, &q.text);
        let ctx = RerankContext {
            query: &query,
            catalog: &self.catalog,
            caps: self.schedule.caps(),
        };
        let reranked = run_schedule(&pool, &self.schedule, self.reranker.as_ref(), &ctx)?;
        let evidence = reranked.top;
        let prompt = build_prompt(&si, &q.text, &evidence);

        let mut warnings = Vec::new();
        let raw = match &self.generator {
            None => extractive_oracle_generate(&si, &evidence, &self.catalog),
            Some(generator) => {
                let request = GeneratorRequest {
                    prompt: prompt.clone(),
                    max_answer_tokens: self.max_answer_tokens,
                };
                match generate(generator.as_ref(), &request) {
                    Ok(text) => text,
                    Err(e) if self.fallback_to_oracle => {
                        let msg = format!("generator failed ({e}); used the extractive generator");
                        log::warn!("question {}: {msg}", q.id);
                        warnings.push(msg);
                        extractive_oracle_generate(&si, &evidence, &self.catalog)
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        };
        let answer = attach_support(&raw, &evidence, &self.catalog);
        Ok(QuestionOutcome {
            question_id: q.id.clone(),
            si,
            pool,
            ranking: reranked.ranking,
            evidence,
            prompt,
            answer,
            warnings,
        })
    }
}

/// Loads the catalog, evidence pool and (if present) the persisted index
/// named in `cfg.data`. A missing index file is rebuilt in memory.
pub fn load_store(cfg: &Config) -> Result<(Catalog, EvidenceStore)> {
    let entities: Vec<Entity> = read_records(&cfg.data.catalog)?;
    let catalog = Catalog::new(entities)?;
    let pieces: Vec<EvidencePiece> = read_records(&cfg.data.pool)?;
    let store = if cfg.data.index.exists() {
        EvidenceStore::with_index(pieces, Bm25Index::load(&cfg.data.index)?)?
    } else {
        EvidenceStore::build(pieces, cfg.retrieval.bm25_params())?
    };
    Ok((catalog, store))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ClientError;
    use crate::types::{Provenance, SourceType};

    fn fixture() -> (Catalog, EvidenceStore) {
        let catalog = Catalog::new(vec![
            Entity::new("China", "China"),
            Entity::new("NBA", "NBA"),
            Entity::new("Wang", "Wang Zhizhi"),
            Entity::new("Cook", "Cooking"),
        ])
        .unwrap();
        let piece = |id: &str, text: &str, ents: &[&str]| EvidencePiece {
            id: id.into(),
            source: SourceType::Text,
            text: text.into(),
            entity_ids: ents.iter().map(|s| s.to_string()).collect(),
            provenance: Provenance::Kg { fact: id.into() },
            score: 0.0,
        };
        let store = EvidenceStore::build(
            vec![
                piece(
                    "a",
                    "Wang Zhizhi was the first player from China in the NBA",
                    &["Wang", "China", "NBA"],
                ),
                piece("b", "Cooking rice needs water", &["Cook"]),
            ],
            Default::default(),
        )
        .unwrap();
        (catalog, store)
    }

    #[test]
    fn offline_answer() {
        let (catalog, store) = fixture();
        let p = Pipeline::new(catalog, store);
        let out = p
            .answer(&Question::new("q1", "Who was the first Chinese NBA player from China?"))
            .unwrap();
        assert_eq!(out.answer.answer(), "Wang Zhizhi");
        assert_eq!(out.answer.supporting_evidence(), &["a".to_string()]);
        assert!(out.prompt.starts_with("SI: person NBA China"), "{}", out.prompt);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn empty_store_refrains() {
        let (catalog, _) = fixture();
        let store = EvidenceStore::build(Vec::new(), Default::default()).unwrap();
        let out = Pipeline::new(catalog, store)
            .answer(&Question::new("q", "Who?"))
            .unwrap();
        assert!(out.answer.refrained());
        assert_eq!(out.answer.answer(), "unknown");
    }

    struct Down;
    impl Generator for Down {
        fn complete(&self, _r: &GeneratorRequest) -> std::result::Result<String, ClientError> {
            Err(ClientError::Transport {
                endpoint: "http://down".into(),
                cause: "connection refused".into(),
            })
        }
        fn endpoint(&self) -> &str {
            "http://down"
        }
    }

    #[test]
    fn generator_fallback() {
        let (catalog, store) = fixture();
        let q = Question::new("q1", "Who was the first NBA player from China?");
        let p = Pipeline::new(catalog.clone(), store.clone()).with_generator(Box::new(Down), true);
        let out = p.answer(&q).unwrap();
        assert_eq!(out.answer.answer(), "Wang Zhizhi");
        assert_eq!(out.warnings.len(), 1);

        let strict = Pipeline::new(catalog, store).with_generator(Box::new(Down), false);
        let err = strict.answer(&q).unwrap_err();
        assert_eq!(err.category(), "client");
        assert!(err.to_string().contains("http://down"));
    }

    #[test]
    fn gnn_without_checkpoint_is_a_config_error() {
        let (catalog, store) = fixture();
        let mut cfg = Config::default();
        cfg.rerank.strategy = RerankStrategy::Gnn;
        let err = Pipeline::from_config(&cfg, catalog, store).unwrap_err();
        assert_eq!(err.category(), "config");
    }
}
