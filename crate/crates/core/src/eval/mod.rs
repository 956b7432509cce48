//! Evaluation: answer accuracy, evidence recall and refrain behaviour, plus
//! the benchmark runner and its report.

mod bench;
mod report;

pub use bench::{run_benchmark, BenchmarkConfig};
pub use report::{Aggregates, EvalReport, EvalRow};

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::gold::GoldMatcher;
use crate::types::EvidencePiece;

pub use crate::text::normalize_answer;

/// Evidence-presence cutoffs reported by default.
pub const DEFAULT_KS: [usize; 3] = [30, 100, 1000];

/// 1.0 when the normalized prediction equals a normalized gold answer (or a
/// catalog alias of one). `"unknown"` never counts.
pub fn p_at_1<S: AsRef<str>>(predicted: &str, golds: &[S], catalog: &Catalog) -> f64 {
    if GoldMatcher::new(golds, catalog).matches_answer(predicted) {
        1.0
    } else {
        0.0
    }
}

/// Whether any of the first `k` ranked pieces contains a gold answer.
pub fn answer_presence<S: AsRef<str>>(ranked: &[EvidencePiece], golds: &[S], catalog: &Catalog, k: usize) -> bool {
    presence_with(&GoldMatcher::new(golds, catalog), ranked, k)
}

/// Reciprocal rank of the first piece containing a gold answer within the
/// first `k`, 0 when there is none.
pub fn mrr_at_k<S: AsRef<str>>(ranked: &[EvidencePiece], golds: &[S], catalog: &Catalog, k: usize) -> f64 {
    reciprocal_rank_with(&GoldMatcher::new(golds, catalog), ranked, k)
}

/// 1-based rank of the first piece containing a gold answer.
pub fn first_hit_rank(matcher: &GoldMatcher, ranked: &[EvidencePiece]) -> Option<usize> {
    ranked.iter().position(|p| matcher.piece_contains(p)).map(|i| i + 1)
}

pub(crate) fn presence_with(matcher: &GoldMatcher, ranked: &[EvidencePiece], k: usize) -> bool {
    ranked.iter().take(k).any(|p| matcher.piece_contains(p))
}

pub(crate) fn reciprocal_rank_with(matcher: &GoldMatcher, ranked: &[EvidencePiece], k: usize) -> f64 {
    match first_hit_rank(matcher, &ranked[..k.min(ranked.len())]) {
        Some(r) => 1.0 / r as f64,
        None => 0.0,
    }
}

/// Minimal per-question facts needed for the refrain metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefrainObservation {
    pub refrained: bool,
    /// A gold answer was present in the evidence given to the generator.
    pub answer_in_evidence: bool,
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefrainMetrics {
    /// Share of questions answered with `"unknown"`.
    pub refrain_rate: f64,
    /// Among refusals, the share where the evidence indeed lacked the answer.
    /// `None` when there were no refusals.
    pub refrain_accuracy: Option<f64>,
    /// P@1 restricted to questions that were answered. `None` when every
    /// question was refused.
    pub p_at_1_answered: Option<f64>,
}

pub fn refrain_metrics(rows: &[RefrainObservation]) -> RefrainMetrics {
    let total = rows.len();
    let refused: Vec<_> = rows.iter().filter(|r| r.refrained).collect();
    let answered: Vec<_> = rows.iter().filter(|r| !r.refrained).collect();
    let ratio = |num: usize, den: usize| if den == 0 { None } else { Some(num as f64 / den as f64) };
    RefrainMetrics {
        refrain_rate: ratio(refused.len(), total).unwrap_or(0.0),
        refrain_accuracy: ratio(refused.iter().filter(|r| !r.answer_in_evidence).count(), refused.len()),
        p_at_1_answered: ratio(answered.iter().filter(|r| r.correct).count(), answered.len()),
    }
}
