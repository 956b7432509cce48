use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gold::GoldMatcher;
use crate::pipeline::Pipeline;
use crate::types::Question;

use super::report::{EvalReport, EvalRow};
use super::{presence_with, reciprocal_rank_with, DEFAULT_KS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkConfig {
    pub ks: Vec<usize>,
    /// Worker threads; 1 runs on the calling thread.
    pub jobs: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            ks: DEFAULT_KS.to_vec(),
            jobs: 1,
        }
    }
}

fn evaluate_one(pipeline: &Pipeline, q: &Question, ks: &[usize]) -> EvalRow {
    let outcome = match pipeline.answer(q) {
        Ok(o) => o,
        Err(e) => {
            log::warn!("question {} failed: {e}", q.id);
            return EvalRow::failed(&q.id, &q.gold_answers, ks, format!("[{}] {e}", e.category()));
        }
    };
    let matcher = GoldMatcher::new(&q.gold_answers, pipeline.catalog());
    EvalRow {
        question_id: q.id.clone(),
        predicted: outcome.answer.answer().to_string(),
        golds: q.gold_answers.clone(),
        correct: matcher.matches_answer(outcome.answer.answer()),
        refrained: outcome.answer.refrained(),
        answer_in_prompt_evidence: presence_with(&matcher, &outcome.evidence, outcome.evidence.len()),
        presence_at: ks
            .iter()
            .map(|&k| (k, presence_with(&matcher, &outcome.ranking, k)))
            .collect(),
        reciprocal_rank_at: ks
            .iter()
            .map(|&k| (k, reciprocal_rank_with(&matcher, &outcome.ranking, k)))
            .collect(),
        supporting_evidence: outcome.answer.supporting_evidence().to_vec(),
        error: None,
    }
}

/// Runs the pipeline over every question. Failures become incorrect rows
/// with an error note. Rows are ordered by question id whatever `jobs` is.
pub fn run_benchmark(pipeline: &Pipeline, questions: &[Question], cfg: &BenchmarkConfig) -> Result<EvalReport> {
    if cfg.ks.contains(&0) {
        return Err(Error::Config("presence cutoffs must be at least 1".into()));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = questions.iter().find(|q| !seen.insert(q.id.as_str())) {
        return Err(Error::Invalid(format!("duplicate question id {}", dup.id)));
    }
    let rows: Vec<EvalRow> = if cfg.jobs <= 1 {
        questions.iter().map(|q| evaluate_one(pipeline, q, &cfg.ks)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.jobs)))?;
        pool.install(|| {
            questions
                .par_iter()
                .map(|q| evaluate_one(pipeline, q, &cfg.ks))
                .collect()
        })
    };
    Ok(EvalReport::from_rows(rows, &cfg.ks))
}
