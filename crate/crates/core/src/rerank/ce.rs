//! Cross-encoder relevance scoring: an external scorer contract plus an
//! embedded lexical fallback.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ClientError;
use crate::http::JsonEndpoint;
use crate::text::tokenize;
use crate::types::EvidencePiece;

/// Scores how related a passage is to a query. Must tolerate concurrent calls.
pub trait RelevanceScorer: Send + Sync {
    fn score(&self, query: &str, passage: &str) -> Result<f64, ClientError>;
}

/// Jaccard similarity of the query and passage token sets. Never fails.
#[derive(Debug, Clone, Copy, Default)]
pub struct JaccardScorer;

impl JaccardScorer {
    pub fn similarity(query: &str, passage: &str) -> f64 {
        let a: HashSet<String> = tokenize(query).into_iter().collect();
        let b: HashSet<String> = tokenize(passage).into_iter().collect();
        let union = a.union(&b).count();
        if union == 0 {
            return 0.0;
        }
        a.intersection(&b).count() as f64 / union as f64
    }
}

impl RelevanceScorer for JaccardScorer {
    fn score(&self, query: &str, passage: &str) -> Result<f64, ClientError> {
        Ok(Self::similarity(query, passage))
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    query: &'a str,
    passage: &'a str,
}

#[derive(Deserialize)]
struct ScoreReply {
    score: f64,
}

/// `POST {"query": ..., "passage": ...}` → `{"score": <real>}`.
#[derive(Debug, Clone)]
pub struct HttpScorer {
    endpoint: JsonEndpoint,
}

impl HttpScorer {
    pub fn new(url: impl Into<String>, timeout_ms: u64) -> Result<Self, ClientError> {
        Ok(HttpScorer {
            endpoint: JsonEndpoint::new(url, timeout_ms)?,
        })
    }

    pub fn url(&self) -> &str {
        self.endpoint.url()
    }
}

impl RelevanceScorer for HttpScorer {
    fn score(&self, query: &str, passage: &str) -> Result<f64, ClientError> {
        let reply: ScoreReply = self.endpoint.post(&ScoreRequest { query, passage })?;
        Ok(reply.score)
    }
}

/// Scores one piece against the SI query, with `scorer` or the lexical
/// fallback when none is configured.
pub fn ce_score(query: &str, piece: &EvidencePiece, scorer: Option<&dyn RelevanceScorer>) -> Result<f64, ClientError> {
    match scorer {
        Some(s) => s.score(query, &piece.text),
        None => Ok(JaccardScorer::similarity(query, &piece.text)),
    }
}

/// Stage-indexed scorers (a smaller model for the first round, a larger one
/// afterwards). Stages without a configured scorer, and stages past the end
/// of the list, use the last configured entry or the fallback.
#[derive(Clone, Default)]
pub struct CrossEncoderScorers {
    stages: Vec<Option<Arc<dyn RelevanceScorer>>>,
}

impl CrossEncoderScorers {
    pub fn fallback_only() -> Self {
        CrossEncoderScorers::default()
    }

    pub fn new(stages: Vec<Option<Arc<dyn RelevanceScorer>>>) -> Self {
        CrossEncoderScorers { stages }
    }

    pub fn for_stage(&self, stage: usize) -> Option<&dyn RelevanceScorer> {
        if self.stages.is_empty() {
            return None;
        }
        let idx = stage.min(self.stages.len() - 1);
        self.stages[idx].as_deref()
    }
}

impl std::fmt::Debug for CrossEncoderScorers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CrossEncoderScorers")
            .field(
                "configured",
                &self.stages.iter().map(Option::is_some).collect::<Vec<_>>(),
            )
            .finish()
    }
}
