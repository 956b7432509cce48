//! Answer generation: prompt assembly, generator clients, the extractive
//! offline generator, faithful ("unknown") targets and evidence attachment.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{ClientError, Result};
use crate::eval::answer_presence;
use crate::gold::GoldMatcher;
use crate::http::JsonEndpoint;
use crate::jsonl::write_records;
use crate::text::normalize_answer;
use crate::types::{is_unknown, si_concat, AnswerResult, EvidencePiece, StructuredIntent, UNKNOWN_ANSWER};

/// Separator between evidence pieces inside a prompt.
pub const EVIDENCE_SEPARATOR: &str = " | ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorRequest {
    pub prompt: String,
    pub max_answer_tokens: usize,
}

/// `SI: <concatenated SI> Evidence: <piece 1> | <piece 2> | ...`, with no
/// instruction text. `fallback` is the raw question, used for an empty SI.
pub fn build_prompt(si: &StructuredIntent, fallback: &str, evidence: &[EvidencePiece]) -> String {
    let joined = evidence
        .iter()
        .map(|p| p.text.as_str())
        .collect::<Vec<_>>()
        .join(EVIDENCE_SEPARATOR);
    format!("SI: {} Evidence: {}", si_concat(si, fallback), joined)
}

/// A text generator behind the answer stage. Must accept concurrent calls.
pub trait Generator: Send + Sync {
    fn complete(&self, request: &GeneratorRequest) -> Result<String, ClientError>;
    fn endpoint(&self) -> &str;
}

#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct WireReply {
    text: String,
}

/// `POST {"prompt": ..., "max_tokens": n}` → `{"text": ...}`.
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    endpoint: JsonEndpoint,
}

impl HttpGenerator {
    pub fn new(url: impl Into<String>, timeout_ms: u64) -> Result<Self, ClientError> {
        Ok(HttpGenerator {
            endpoint: JsonEndpoint::new(url, timeout_ms)?,
        })
    }
}

impl Generator for HttpGenerator {
    fn complete(&self, request: &GeneratorRequest) -> Result<String, ClientError> {
        let reply: WireReply = self.endpoint.post(&WireRequest {
            prompt: &request.prompt,
            max_tokens: request.max_answer_tokens,
        })?;
        Ok(reply.text)
    }

    fn endpoint(&self) -> &str {
        self.endpoint.url()
    }
}

/// Calls the generator and keeps the first line of its reply. An empty reply
/// means the model refrained.
pub fn generate(client: &dyn Generator, request: &GeneratorRequest) -> Result<String, ClientError> {
    let reply = client.complete(request)?;
    let first = reply.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    Ok(if first.is_empty() {
        UNKNOWN_ANSWER.to_string()
    } else {
        first.to_string()
    })
}

/// Catalog ids of the entities named in the SI.
fn question_entities(si: &StructuredIntent, catalog: &Catalog) -> HashSet<String> {
    si.entities
        .iter()
        .flat_map(|name| catalog.lookup_normalized(&normalize_answer(name)))
        .map(|e| e.id.clone())
        .collect()
}

/// Deterministic offline generator: among entities mentioned in the evidence
/// but not named by the question, answer with the one whose mentioning
/// pieces have the largest total score. Ties go to the entity first seen at
/// a better rank, then to the smaller id. `"unknown"` when nothing is left.
pub fn extractive_oracle_generate(si: &StructuredIntent, evidence: &[EvidencePiece], catalog: &Catalog) -> String {
    let excluded = question_entities(si, catalog);
    let mut totals: HashMap<&str, (f64, usize)> = HashMap::new();
    for (rank, piece) in evidence.iter().enumerate() {
        let mut seen = HashSet::new();
        for id in &piece.entity_ids {
            if excluded.contains(id) || !seen.insert(id.as_str()) {
                continue;
            }
            let entry = totals.entry(id.as_str()).or_insert((0.0, rank));
            entry.0 += piece.score;
        }
    }
    totals
        .into_iter()
        .min_by(|a, b| {
            b.1 .0
                .total_cmp(&a.1 .0)
                .then(a.1 .1.cmp(&b.1 .1))
                .then_with(|| a.0.cmp(b.0))
        })
        .map(|(id, _)| catalog.label_of(id).to_string())
        .unwrap_or_else(|| UNKNOWN_ANSWER.to_string())
}

/// Fine-tuning example for the answer generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub question_id: String,
    pub question: String,
    pub si: StructuredIntent,
    pub evidence: Vec<EvidencePiece>,
    pub target_answer: String,
}

impl TrainingRecord {
    pub fn prompt(&self) -> String {
        build_prompt(&self.si, &self.question, &self.evidence)
    }
}

/// Replaces the target with `"unknown"` when no gold answer is present in the
/// record's evidence. Idempotent.
pub fn faithful_transform<S: AsRef<str>>(record: TrainingRecord, golds: &[S], catalog: &Catalog) -> TrainingRecord {
    let present = answer_presence(&record.evidence, golds, catalog, record.evidence.len().max(1));
    if present {
        record
    } else {
        TrainingRecord {
            target_answer: UNKNOWN_ANSWER.to_string(),
            ..record
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTarget {
    pub prompt: String,
    pub target: String,
}

/// Writes `{prompt, target}` lines for external fine-tuning.
pub fn export_training_records(path: impl AsRef<Path>, records: &[TrainingRecord]) -> Result<usize> {
    let pairs: Vec<PromptTarget> = records
        .iter()
        .map(|r| PromptTarget {
            prompt: r.prompt(),
            target: r.target_answer.clone(),
        })
        .collect();
    write_records(path, &pairs)
}

/// Wraps an answer with the ids of the pieces that contain it (label or
/// alias). A refusal carries no support; an answer found nowhere keeps an
/// empty support list and `refrained = false`.
pub fn attach_support(answer: &str, evidence: &[EvidencePiece], catalog: &Catalog) -> AnswerResult {
    let support = if is_unknown(answer) {
        Vec::new()
    } else {
        let matcher = GoldMatcher::new(&[answer], catalog);
        evidence
            .iter()
            .filter(|p| matcher.piece_contains(p))
            .map(|p| p.id.clone())
            .collect()
    };
    AnswerResult::new(answer.trim(), support, evidence.len())
}
