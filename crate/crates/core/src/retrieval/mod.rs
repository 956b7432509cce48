//! Evidence retrieval: anchoring, scoping and BM25 pooling.

mod anchor;
mod bm25;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use anchor::{anchor_entities, Anchorer, LexicalAnchorer};
pub use bm25::{bm25_build, bm25_search, Bm25Index, Bm25Params, Posting};

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::types::{si_concat, Entity, EvidencePiece, Question, StructuredIntent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub anchor_k: usize,
    pub pool_p: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            anchor_k: 10,
            pool_p: 1000,
            bm25_k1: 1.2,
            bm25_b: 0.75,
        }
    }
}

impl RetrievalConfig {
    pub fn bm25_params(&self) -> Bm25Params {
        Bm25Params {
            k1: self.bm25_k1,
            b: self.bm25_b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.anchor_k == 0 || self.pool_p == 0 {
            return Err(Error::Config("anchor_k and pool_p must be at least 1".into()));
        }
        self.bm25_params().validate()
    }
}

/// Pieces that belong to an anchor: a page titled after an anchor (label or
/// alias, case-insensitive) or any mention of an anchor. With no anchors the
/// whole pool is in scope.
pub fn scope_evidence<'p>(anchors: &[&Entity], pool: &'p [EvidencePiece]) -> Vec<&'p EvidencePiece> {
    if anchors.is_empty() {
        return pool.iter().collect();
    }
    let anchor_ids: HashSet<&str> = anchors.iter().map(|e| e.id.as_str()).collect();
    let titles: HashSet<String> = anchors.iter().flat_map(|e| e.names()).map(str::to_lowercase).collect();
    pool.iter()
        .filter(|p| {
            p.entity_ids.iter().any(|id| anchor_ids.contains(id.as_str()))
                || p.provenance
                    .page_title()
                    .is_some_and(|t| titles.contains(&t.to_lowercase()))
        })
        .collect()
}

/// An indexed evidence pool.
#[derive(Debug, Clone)]
pub struct EvidenceStore {
    pieces: Vec<EvidencePiece>,
    by_id: HashMap<String, usize>,
    index: Bm25Index,
}

impl EvidenceStore {
    /// Indexes `pieces`; an empty pool yields an empty store.
    pub fn build(pieces: Vec<EvidencePiece>, params: Bm25Params) -> Result<Self> {
        let index = if pieces.is_empty() {
            params.validate()?;
            Bm25Index::empty(params)
        } else {
            bm25_build(&pieces, params)?
        };
        Self::with_index(pieces, index)
    }

    /// Pairs a pool with a previously persisted index over it.
    pub fn with_index(pieces: Vec<EvidencePiece>, index: Bm25Index) -> Result<Self> {
        let by_id: HashMap<String, usize> = pieces.iter().enumerate().map(|(i, p)| (p.id.clone(), i)).collect();
        if by_id.len() != pieces.len() {
            return Err(Error::Invalid("duplicate evidence ids in pool".into()));
        }
        if index.doc_count != pieces.len() || index.doc_lengths.keys().any(|id| !by_id.contains_key(id)) {
            return Err(Error::Invalid("index does not match the evidence pool".into()));
        }
        Ok(EvidenceStore { pieces, by_id, index })
    }

    pub fn pieces(&self) -> &[EvidencePiece] {
        &self.pieces
    }

    pub fn index(&self) -> &Bm25Index {
        &self.index
    }

    pub fn get(&self, id: &str) -> Option<&EvidencePiece> {
        self.by_id.get(id).map(|&i| &self.pieces[i])
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Candidate pool for a question: anchor-scoped pieces united with the
    /// global BM25 hits, ranked uniformly by BM25 score regardless of source
    /// type (ties by id) and cut to `pool_p`. Scoping only applies when
    /// anchoring found something.
    pub fn retrieve(
        &self,
        q: &Question,
        si: &StructuredIntent,
        catalog: &Catalog,
        anchorer: &dyn Anchorer,
        cfg: &RetrievalConfig,
    ) -> Vec<EvidencePiece> {
        if self.is_empty() {
            return Vec::new();
        }
        let query = si_concat(si, &q.text);
        let mut scored: HashMap<&str, f64> = bm25_search(&self.index, &query, cfg.pool_p)
            .into_iter()
            .map(|(id, s)| (self.pieces[self.by_id[&id]].id.as_str(), s))
            .collect();
        let anchors = anchorer.anchor(&query, catalog, cfg.anchor_k);
        if !anchors.is_empty() {
            for piece in scope_evidence(&anchors, &self.pieces) {
                scored
                    .entry(piece.id.as_str())
                    .or_insert_with(|| self.index.score_doc(&piece.id, &query));
            }
        }
        let mut ranked: Vec<(&str, f64)> = scored.into_iter().collect();
        ranked.sort_by(|a, b| bm25::rank_order(*a, *b));
        ranked.truncate(cfg.pool_p);
        ranked
            .into_iter()
            .map(|(id, s)| self.pieces[self.by_id[id]].clone().with_score(s))
            .collect()
    }
}
