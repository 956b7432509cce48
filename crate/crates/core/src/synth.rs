//! Seeded synthetic benchmark with planted answers and lexical distractors.
//!
//! Every question is "which <type> <relation> <name>?" and owns a pool of
//! evidence pieces:
//!
//! * relevant pieces name the question entity, the relation, the answer
//!   entity and the type, padded with longer context;
//! * distractors repeat the question terms in a short piece about some other
//!   entity, so BM25 ranks them above the relevant pieces;
//! * noise pieces share at most one query term.
//!
//! Relevant and distractor pieces carry different context vocabularies,
//! which a trained re-ranker can pick up and BM25 cannot.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::answer::extractive_oracle_generate;
use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::eval::answer_presence;
use crate::gold::GoldMatcher;
use crate::jsonl::write_records;
use crate::rerank::{
    gnn_train, run_schedule, EpochReport, GnnModel, GnnScorer, GraphCaps, HashedBowEncoder, NodeEncoder, RerankContext,
    RerankSchedule, TrainConfig, TrainingGraph,
};
use crate::retrieval::{bm25_build, Bm25Params};
use crate::types::{si_concat, Entity, EvidencePiece, Provenance, Question, SourceType, StructuredIntent};

const TYPES: [&str; 8] = ["team", "city", "award", "club", "band", "company", "river", "film"];
const RELATIONS: [&str; 8] = [
    "founded", "coached", "joined", "won", "hosted", "signed", "owned", "led",
];
const GOOD: [&str; 8] = [
    "official",
    "record",
    "confirmed",
    "archive",
    "season",
    "register",
    "documented",
    "history",
];
const BAD: [&str; 8] = [
    "rumor",
    "forum",
    "gossip",
    "unverified",
    "fan",
    "speculation",
    "blog",
    "alleged",
];
const NEUTRAL: [&str; 40] = [
    "weather", "music", "bridge", "garden", "market", "stone", "green", "window", "paper", "summer", "yellow",
    "coffee", "mountain", "silver", "engine", "pencil", "ocean", "forest", "candle", "mirror", "planet", "rocket",
    "violin", "tiger", "castle", "meadow", "harbor", "lantern", "marble", "orchard", "pepper", "quartz", "saddle",
    "thunder", "velvet", "walnut", "zephyr", "anchor", "blossom", "canyon",
];
const ONSETS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub questions: usize,
    pub pool_size: usize,
    pub relevant_per_question: usize,
    /// Distractor counts are drawn uniformly from `0..=max_distractors`.
    pub max_distractors: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            questions: 200,
            pool_size: 1000,
            relevant_per_question: 2,
            max_distractors: 60,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthItem {
    pub question: Question,
    pub si: StructuredIntent,
    /// Unscored pieces, relevant ones first.
    pub pool: Vec<EvidencePiece>,
    pub distractors: usize,
}

impl SynthItem {
    pub fn query(&self) -> String {
        si_concat(&self.si, &self.question.text)
    }

    /// The whole pool in BM25 order (index built over this pool), with
    /// zero-score pieces last by id.
    pub fn bm25_ranking(&self, params: Bm25Params) -> Result<Vec<EvidencePiece>> {
        let index = bm25_build(&self.pool, params)?;
        let query = self.query();
        let mut ranked: Vec<EvidencePiece> = self
            .pool
            .iter()
            .map(|p| p.clone().with_score(index.score_doc(&p.id, &query)))
            .collect();
        ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
        Ok(ranked)
    }
}

#[derive(Debug, Clone)]
pub struct SynthBenchmark {
    pub catalog: Catalog,
    pub items: Vec<SynthItem>,
}

struct Names {
    used: HashSet<String>,
}

impl Names {
    fn fresh(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let mut name = String::new();
            for _ in 0..3 {
                name.push(ONSETS[rng.gen_range(0..ONSETS.len())] as char);
                name.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
            }
            if self.used.insert(name.clone()) {
                let mut chars = name.chars();
                let first = chars.next().map(|c| c.to_ascii_uppercase()).unwrap_or('X');
                return std::iter::once(first).chain(chars).collect();
            }
        }
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str], n: usize) -> Vec<&'a str> {
    (0..n).map(|_| words[rng.gen_range(0..words.len())]).collect()
}

fn provenance(i: usize, id: &str, page: &str) -> (SourceType, Provenance) {
    match i % 3 {
        0 => (SourceType::Kg, Provenance::Kg { fact: id.into() }),
        1 => (
            SourceType::Text,
            Provenance::Text {
                doc: id.into(),
                sentence: 0,
                page_title: page.into(),
            },
        ),
        _ => (
            SourceType::Table,
            Provenance::Table {
                table: id.into(),
                row: 0,
                page_title: page.into(),
            },
        ),
    }
}

fn make_piece(i: usize, id: String, page: &str, words: Vec<&str>, entity_ids: Vec<String>) -> EvidencePiece {
    let (source, provenance) = provenance(i, &id, page);
    EvidencePiece {
        id,
        source,
        text: words.join(" "),
        entity_ids,
        provenance,
        score: 0.0,
    }
}

/// Generates the benchmark; identical configs give identical output.
pub fn synth_benchmark(cfg: &SynthConfig) -> Result<SynthBenchmark> {
    let planted = cfg.relevant_per_question + cfg.max_distractors;
    if cfg.relevant_per_question == 0 || planted > cfg.pool_size {
        return Err(Error::Config(format!(
            "pool of {} cannot hold {} relevant and up to {} distractor pieces",
            cfg.pool_size, cfg.relevant_per_question, cfg.max_distractors
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut names = Names {
        used: TYPES
            .iter()
            .chain(&RELATIONS)
            .chain(&GOOD)
            .chain(&BAD)
            .chain(&NEUTRAL)
            .map(|w| w.to_string())
            .collect(),
    };
    let mut entities = Vec::new();
    let mut items = Vec::with_capacity(cfg.questions);

    for qi in 0..cfg.questions {
        let qid = format!("s{qi:04}");
        let kind = TYPES[rng.gen_range(0..TYPES.len())];
        let relation = RELATIONS[rng.gen_range(0..RELATIONS.len())];
        let subject = names.fresh(&mut rng);
        let answer = format!(
            "{} {}{}",
            names.fresh(&mut rng),
            kind[..1].to_ascii_uppercase(),
            &kind[1..]
        );
        let subject_id = format!("{qid}-e");
        let answer_id = format!("{qid}-a");
        entities.push(Entity::new(&subject_id, &subject));
        entities.push(Entity::new(&answer_id, &answer));

        let mut pool = Vec::with_capacity(cfg.pool_size);
        for j in 0..cfg.relevant_per_question {
            let mut words = vec![subject.as_str(), relation, answer.as_str()];
            words.extend(pick(&mut rng, &GOOD, 3));
            let filler = rng.gen_range(6..=10);
            words.extend(pick(&mut rng, &NEUTRAL, filler));
            words[3..].shuffle(&mut rng);
            pool.push(make_piece(
                j,
                format!("{qid}-r{j:02}"),
                &subject,
                words,
                vec![subject_id.clone(), answer_id.clone()],
            ));
        }

        let distractors = rng.gen_range(0..=cfg.max_distractors);
        for j in 0..distractors {
            let other = names.fresh(&mut rng);
            let other_id = format!("{qid}-d{j:02}");
            entities.push(Entity::new(&other_id, &other));
            let mut words = vec![subject.as_str(), relation, subject.as_str(), kind, other.as_str()];
            let bad = rng.gen_range(1..=2);
            words.extend(pick(&mut rng, &BAD, bad));
            pool.push(make_piece(
                j,
                format!("{qid}-d{j:02}"),
                &other,
                words,
                vec![subject_id.clone(), other_id],
            ));
        }

        let mut j = 0;
        while pool.len() < cfg.pool_size {
            let filler = rng.gen_range(6..=12);
            let mut words = pick(&mut rng, &NEUTRAL, filler);
            let mut mentions = Vec::new();
            if rng.gen_bool(0.45) {
                match rng.gen_range(0..3) {
                    0 => {
                        words.push(subject.as_str());
                        mentions.push(subject_id.clone());
                    }
                    1 => words.push(relation),
                    _ => words.push(kind),
                }
            }
            if rng.gen_bool(0.2) {
                words.extend(pick(&mut rng, &BAD, 1));
            }
            if rng.gen_bool(0.1) {
                words.extend(pick(&mut rng, &GOOD, 1));
            }
            words.shuffle(&mut rng);
            pool.push(make_piece(j, format!("{qid}-n{j:03}"), "misc", words, mentions));
            j += 1;
        }

        let si = StructuredIntent {
            ans_type: vec![kind.to_string()],
            entities: vec![subject.clone()],
            relation: Some(relation.to_string()),
            time: None,
            location: None,
        };
        let question = Question::new(&qid, format!("Which {kind} {relation} {subject}?")).with_answers([answer]);
        items.push(SynthItem {
            question,
            si,
            pool,
            distractors,
        });
    }

    Ok(SynthBenchmark {
        catalog: Catalog::new(entities)?,
        items,
    })
}

impl SynthBenchmark {
    /// Writes `catalog.jsonl`, `pool.jsonl` (every item's pieces) and
    /// `questions.jsonl` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_records(dir.join("catalog.jsonl"), self.catalog.entities())?;
        write_records(dir.join("pool.jsonl"), self.items.iter().flat_map(|i| &i.pool))?;
        write_records(dir.join("questions.jsonl"), self.items.iter().map(|i| &i.question))?;
        Ok(())
    }

    /// Training graphs over the BM25 top-`top_n` of each item.
    pub fn training_graphs(
        &self,
        params: Bm25Params,
        top_n: usize,
        caps: GraphCaps,
        encoder: &dyn NodeEncoder,
    ) -> Result<Vec<TrainingGraph>> {
        self.items
            .par_iter()
            .map(|item| {
                let mut ranked = item.bm25_ranking(params)?;
                ranked.truncate(top_n);
                Ok(TrainingGraph::from_pool(
                    &ranked,
                    &item.question.gold_answers,
                    &item.query(),
                    &self.catalog,
                    caps,
                    encoder,
                ))
            })
            .collect()
    }
}

/// Answer presence at `k` for the raw BM25 order and after GNN re-ranking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub k: usize,
    pub bm25: f64,
    pub gnn: f64,
}

impl LiftReport {
    pub fn lift(&self) -> f64 {
        self.gnn - self.bm25
    }
}

pub fn rerank_lift(
    bench: &SynthBenchmark,
    scorer: &GnnScorer,
    schedule: &RerankSchedule,
    params: Bm25Params,
    k: usize,
) -> Result<LiftReport> {
    let hits: Vec<(bool, bool)> = bench
        .items
        .par_iter()
        .map(|item| {
            let ranked = item.bm25_ranking(params)?;
            let golds = &item.question.gold_answers;
            let query = item.query();
            let ctx = RerankContext {
                query: &query,
                catalog: &bench.catalog,
                caps: schedule.caps(),
            };
            let reranked = run_schedule(&ranked, schedule, scorer, &ctx)?;
            Ok((
                answer_presence(&ranked, golds, &bench.catalog, k),
                answer_presence(&reranked.ranking, golds, &bench.catalog, k),
            ))
        })
        .collect::<Result<_>>()?;
    let n = hits.len().max(1) as f64;
    Ok(LiftReport {
        k,
        bm25: hits.iter().filter(|h| h.0).count() as f64 / n,
        gnn: hits.iter().filter(|h| h.1).count() as f64 / n,
    })
}

/// Train-then-compare setup: a GNN is trained on one synthetic benchmark,
/// selected on another and compared with BM25 on a third.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftExperiment {
    pub eval: SynthConfig,
    pub train: SynthConfig,
    pub dev: SynthConfig,
    pub train_cfg: TrainConfig,
    pub layers: usize,
    pub dim: usize,
    /// Training graphs cover the BM25 top-`train_top_n` of each pool.
    pub train_top_n: usize,
    pub k: usize,
}

impl LiftExperiment {
    /// 200 evaluation questions over 1000-piece pools; 1000 training and 40
    /// dev questions over smaller pools, since training graphs only keep the
    /// BM25 top 100. All three benchmarks derive from `seed`.
    pub fn for_seed(seed: u64) -> Self {
        let eval = SynthConfig {
            relevant_per_question: 3,
            seed,
            ..SynthConfig::default()
        };
        let train = SynthConfig {
            questions: 1000,
            pool_size: 300,
            seed: seed.wrapping_add(10_000),
            ..eval
        };
        let dev = SynthConfig {
            questions: 40,
            seed: seed.wrapping_add(20_000),
            ..train
        };
        LiftExperiment {
            eval,
            train,
            dev,
            train_cfg: TrainConfig {
                shuffle_seed: seed,
                ..TrainConfig::default()
            },
            layers: 3,
            dim: 64,
            train_top_n: GraphCaps::training().evidence_cap,
            k: 30,
        }
    }

    pub fn run(&self) -> Result<LiftOutcome> {
        let params = Bm25Params::default();
        let encoder = HashedBowEncoder { dim: self.dim };
        let caps = GraphCaps::training();
        let train = synth_benchmark(&self.train)?.training_graphs(params, self.train_top_n, caps, &encoder)?;
        let dev = synth_benchmark(&self.dev)?.training_graphs(params, self.train_top_n, caps, &encoder)?;
        let model = GnnModel::new(self.layers, self.dim, self.eval.seed);
        let trained = gnn_train(model, &train, &dev, &self.train_cfg)?;
        let scorer = GnnScorer::new(vec![trained.model])?;
        let eval = synth_benchmark(&self.eval)?;
        let report = rerank_lift(&eval, &scorer, &RerankSchedule::default(), params, self.k)?;
        Ok(LiftOutcome {
            report,
            best_epoch: trained.best_epoch,
            history: trained.history,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftOutcome {
    pub report: LiftReport,
    pub best_epoch: usize,
    pub history: Vec<EpochReport>,
}

/// Sweep fixture: at most 25 distractors and 3 relevant pieces, so every
/// relevant piece sits within the BM25 top 28.
pub fn sweep_config(seed: u64) -> SynthConfig {
    SynthConfig {
        relevant_per_question: 3,
        max_distractors: 25,
        seed,
        ..SynthConfig::default()
    }
}

/// P@1 of the extractive generator fed the BM25 top-`k`, for each `k`.
pub fn evidence_sweep(bench: &SynthBenchmark, params: Bm25Params, ks: &[usize]) -> Result<Vec<(usize, f64)>> {
    let per_item: Vec<Vec<bool>> = bench
        .items
        .par_iter()
        .map(|item| {
            let ranked = item.bm25_ranking(params)?;
            let matcher = GoldMatcher::new(&item.question.gold_answers, &bench.catalog);
            Ok(ks
                .iter()
                .map(|&k| {
                    let top = &ranked[..k.min(ranked.len())];
                    matcher.matches_answer(&extractive_oracle_generate(&item.si, top, &bench.catalog))
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let n = per_item.len().max(1) as f64;
    Ok(ks
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, per_item.iter().filter(|row| row[i]).count() as f64 / n))
        .collect())
}
