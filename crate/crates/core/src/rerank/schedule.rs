//! Iterative pruning of the evidence pool (e.g. 1000 → 100 → 30).

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::types::EvidencePiece;

use super::ce::{ce_score, CrossEncoderScorers};
use super::encode::{encode_nodes, HashedBowEncoder, NodeEncoder};
use super::gnn::GnnModel;
use super::graph::{build_graph, GraphCaps};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RerankSchedule {
    /// (input_k, output_k) per round
    pub stages: Vec<(usize, usize)>,
    pub evidence_cap: usize,
    pub entity_cap: usize,
}

impl Default for RerankSchedule {
    fn default() -> Self {
        RerankSchedule {
            stages: vec![(1000, 100), (100, 30)],
            evidence_cap: 1000,
            entity_cap: 4000,
        }
    }
}

impl RerankSchedule {
    pub fn with_stages(stages: Vec<(usize, usize)>) -> Self {
        RerankSchedule {
            stages,
            ..RerankSchedule::default()
        }
    }

    pub fn caps(&self) -> GraphCaps {
        GraphCaps {
            evidence_cap: self.evidence_cap,
            entity_cap: self.entity_cap,
        }
    }

    /// Size of the final list, or `None` for the identity schedule.
    pub fn final_k(&self) -> Option<usize> {
        self.stages.last().map(|s| s.1)
    }

    /// Shrinks every round so the last one keeps `k` pieces, dropping
    /// rounds that would no longer prune.
    pub fn with_final_k(&self, k: usize) -> Self {
        let Some(&(first_input, _)) = self.stages.first() else {
            return self.clone();
        };
        let mut stages = Vec::new();
        let mut input = first_input;
        for &(_, output) in &self.stages[..self.stages.len() - 1] {
            if output > k {
                stages.push((input, output));
                input = output;
            }
        }
        if k >= 1 && k < input {
            stages.push((input, k));
        }
        RerankSchedule { stages, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &(input, output)) in self.stages.iter().enumerate() {
            if output == 0 || output >= input {
                return Err(Error::Config(format!(
                    "rerank stage {i}: output_k {output} must be in 1..{input}"
                )));
            }
            if let Some(&(_, prev_out)) = i.checked_sub(1).and_then(|p| self.stages.get(p)) {
                if prev_out != input {
                    return Err(Error::Config(format!(
                        "rerank stage {i}: input_k {input} does not match previous output_k {prev_out}"
                    )));
                }
            }
        }
        if self.evidence_cap == 0 {
            return Err(Error::Config("evidence_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// What a scorer may consult besides the pieces themselves.
#[derive(Debug, Clone, Copy)]
pub struct RerankContext<'a> {
    /// The concatenated SI of the question.
    pub query: &'a str,
    pub catalog: &'a Catalog,
    pub caps: GraphCaps,
}

/// Scores the survivors of one round; higher is better. Returns one score per
/// input piece, in input order.
pub trait StageScorer: Send + Sync {
    fn score_stage(&self, stage: usize, ctx: &RerankContext<'_>, pieces: &[EvidencePiece]) -> Result<Vec<f64>>;
}

impl StageScorer for CrossEncoderScorers {
    fn score_stage(&self, stage: usize, ctx: &RerankContext<'_>, pieces: &[EvidencePiece]) -> Result<Vec<f64>> {
        let scorer = self.for_stage(stage);
        pieces
            .par_iter()
            .map(|p| ce_score(ctx.query, p, scorer).map_err(Error::from))
            .collect()
    }
}

/// Stage-indexed GNN models; rounds beyond the list reuse the last model.
#[derive(Debug, Clone)]
pub struct GnnScorer<E = HashedBowEncoder> {
    pub models: Vec<GnnModel>,
    pub encoder: E,
}

impl GnnScorer<HashedBowEncoder> {
    pub fn new(models: Vec<GnnModel>) -> Result<Self> {
        let dim = models
            .first()
            .ok_or_else(|| Error::Config("GNN re-ranking needs at least one model".into()))?
            .dim;
        if models.iter().any(|m| m.dim != dim) {
            return Err(Error::Dimension("GNN stage models disagree on dim".into()));
        }
        Ok(GnnScorer {
            models,
            encoder: HashedBowEncoder { dim },
        })
    }
}

impl<E: NodeEncoder> StageScorer for GnnScorer<E> {
    fn score_stage(&self, stage: usize, ctx: &RerankContext<'_>, pieces: &[EvidencePiece]) -> Result<Vec<f64>> {
        let model = &self.models[stage.min(self.models.len().saturating_sub(1))];
        let graph = build_graph(pieces, ctx.caps);
        let encodings = encode_nodes(&graph, ctx.query, pieces, ctx.catalog, &self.encoder);
        let scores = model.forward(&graph, &encodings)?;
        let by_id: HashMap<&str, f64> = scores.evidence_by_id(&graph).into_iter().collect();
        // pieces cut by the evidence cap rank below every graph node
        Ok(pieces
            .iter()
            .map(|p| by_id.get(p.id.as_str()).copied().unwrap_or(f64::NEG_INFINITY))
            .collect())
    }
}

/// Keeps the retrieval (BM25) scores: the schedule only truncates.
#[derive(Debug, Clone, Copy, Default)]
pub struct RetrievalOrder;

impl StageScorer for RetrievalOrder {
    fn score_stage(&self, _stage: usize, _ctx: &RerankContext<'_>, pieces: &[EvidencePiece]) -> Result<Vec<f64>> {
        Ok(pieces.iter().map(|p| p.score).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankOutcome {
    /// Final survivors, best first, carrying their last-round scores.
    pub top: Vec<EvidencePiece>,
    /// The whole input pool: survivors first, then the pieces dropped in each
    /// earlier round, later rounds first, each in its round's order.
    pub ranking: Vec<EvidencePiece>,
}

/// Runs every round: score all survivors, order by descending score (ties
/// keep the prior rank), keep `output_k`. An empty schedule returns the pool
/// as is; a pool smaller than a round's `output_k` is re-ordered, not padded.
pub fn run_schedule(
    pool: &[EvidencePiece],
    schedule: &RerankSchedule,
    scorer: &dyn StageScorer,
    ctx: &RerankContext<'_>,
) -> Result<RerankOutcome> {
    schedule.validate()?;
    let mut survivors = pool.to_vec();
    let mut dropped: Vec<Vec<EvidencePiece>> = Vec::new();
    for (stage, &(input_k, output_k)) in schedule.stages.iter().enumerate() {
        if survivors.len() > input_k {
            dropped.push(survivors.split_off(input_k));
        }
        let scores = scorer.score_stage(stage, ctx, &survivors)?;
        if scores.len() != survivors.len() {
            return Err(Error::Dimension(format!(
                "stage {stage} scorer returned {} scores for {} pieces",
                scores.len(),
                survivors.len()
            )));
        }
        let mut order: Vec<usize> = (0..survivors.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut reordered: Vec<EvidencePiece> = order
            .into_iter()
            .map(|i| survivors[i].clone().with_score(scores[i]))
            .collect();
        if reordered.len() > output_k {
            dropped.push(reordered.split_off(output_k));
        }
        survivors = reordered;
    }
    let mut ranking = survivors.clone();
    for tail in dropped.into_iter().rev() {
        ranking.extend(tail);
    }
    Ok(RerankOutcome {
        top: survivors,
        ranking,
    })
}
