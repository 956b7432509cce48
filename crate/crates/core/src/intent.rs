//! Question understanding: turning a question into a structured intent.
//!
//! Two generators are provided. [`generate_si_rules`] is a deterministic,
//! total rule set (wh-word typing, lexical entity linking, temporal cues).
//! [`generate_si_model`] asks an external sequence-to-sequence model for a
//! slot-tagged string such as
//!
//! ```text
//! Ans-Type: film | Entities: Disney | Relation: first color movie | Time: first
//! ```
//!
//! and falls back to the rules when the reply cannot be parsed.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::ClientError;
use crate::http::JsonEndpoint;
use crate::types::{Question, StructuredIntent};

const AUXILIARIES: &[&str] = &[
    "is", "was", "are", "were", "be", "been", "did", "does", "do", "has", "have", "had", "can", "could", "will",
    "would", "should", "shall", "may", "might", "must",
];
const DETERMINERS: &[&str] = &["the", "a", "an", "of"];
const TIME_CUES: &[&str] = &[
    "first",
    "second",
    "third",
    "last",
    "latest",
    "earliest",
    "recent",
    "recently",
    "current",
    "currently",
    "previous",
    "next",
    "final",
];
const RELATIVE_TIME_CUES: &[&str] = &["before", "after", "since", "until", "during"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WhWord {
    Who,
    When,
    Where,
    WhichWhat,
}

fn wh_word(token: &str) -> Option<WhWord> {
    match token {
        "who" | "whom" | "whose" => Some(WhWord::Who),
        "when" => Some(WhWord::When),
        "where" => Some(WhWord::Where),
        "which" | "what" => Some(WhWord::WhichWhat),
        _ => None,
    }
}

/// Alphanumeric runs of `text` with their original casing.
fn raw_tokens(text: &str) -> Vec<&str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect()
}

fn is_year(token: &str) -> bool {
    token.len() == 4 && token.bytes().all(|b| b.is_ascii_digit())
}

/// Rules-based intent generator. Deterministic and total: the worst case is
/// an SI with every slot empty.
pub fn generate_si_rules(q: &Question, catalog: &Catalog) -> StructuredIntent {
    let raw = raw_tokens(&q.text);
    let lower: Vec<String> = raw.iter().map(|t| t.to_lowercase()).collect();

    let spans = catalog.mention_spans(&lower);
    let mut in_entity = vec![false; lower.len()];
    for (start, end, _) in &spans {
        in_entity[*start..*end].iter_mut().for_each(|b| *b = true);
    }

    let mut seen = HashSet::new();
    let mut entities = Vec::new();
    let mut locations = Vec::new();
    for (_, _, id) in &spans {
        if !seen.insert(id.as_str()) {
            continue;
        }
        if let Some(entity) = catalog.get(id) {
            entities.push(entity.label.clone());
            if entity.location {
                locations.push(entity.label.clone());
            }
        }
    }

    let wh = lower
        .iter()
        .enumerate()
        .find_map(|(i, t)| (!in_entity[i]).then(|| wh_word(t).map(|w| (i, w))).flatten());
    let mut ans_type = Vec::new();
    if let Some((pos, word)) = wh {
        match word {
            WhWord::Who => ans_type.push("person".to_string()),
            WhWord::When => ans_type.push("date".to_string()),
            WhWord::Where => ans_type.push("location".to_string()),
            WhWord::WhichWhat => {
                let head = (pos + 1..lower.len())
                    .filter(|&i| !in_entity[i])
                    .map(|i| lower[i].as_str())
                    .find(|t| !DETERMINERS.contains(t));
                if let Some(head) = head {
                    if !AUXILIARIES.contains(&head) && wh_word(head).is_none() {
                        ans_type.push(head.to_string());
                    }
                }
            }
        }
    }

    let mut time_cues = Vec::new();
    let mut i = 0;
    while i < lower.len() {
        let token = lower[i].as_str();
        if RELATIVE_TIME_CUES.contains(&token) && i + 1 < lower.len() {
            time_cues.push(format!("{} {}", raw[i], raw[i + 1]));
            i += 2;
            continue;
        }
        if TIME_CUES.contains(&token) || is_year(token) {
            time_cues.push(raw[i].to_string());
        }
        i += 1;
    }

    let wh_pos = wh.map(|(p, _)| p);
    let relation = raw
        .iter()
        .enumerate()
        .filter(|(i, _)| !in_entity[*i] && Some(*i) != wh_pos)
        .map(|(_, t)| *t)
        .collect::<Vec<_>>()
        .join(" ");

    StructuredIntent {
        ans_type,
        entities,
        relation: Some(relation),
        time: Some(time_cues.join(" ")),
        location: Some(locations.join(" ")),
    }
    .sanitized()
}

/// Canonical slot-tagged serialization; only present slots are written.
pub fn format_slot_tagged(si: &StructuredIntent) -> String {
    let mut parts = Vec::new();
    if !si.ans_type.is_empty() {
        parts.push(format!("Ans-Type: {}", si.ans_type.join(", ")));
    }
    if !si.entities.is_empty() {
        parts.push(format!("Entities: {}", si.entities.join(", ")));
    }
    for (label, value) in [
        ("Relation", &si.relation),
        ("Time", &si.time),
        ("Location", &si.location),
    ] {
        if let Some(v) = value {
            parts.push(format!("{label}: {v}"));
        }
    }
    parts.join(" | ")
}

/// Parses a slot-tagged reply. Unknown labels are ignored; missing labels
/// leave their slot empty. Returns `None` when no known slot carries a value.
pub fn parse_slot_tagged(reply: &str) -> Option<StructuredIntent> {
    let mut si = StructuredIntent::default();
    let mut recognized = false;
    for segment in reply.split('|') {
        let Some((label, value)) = segment.split_once(':') else {
            continue;
        };
        let value = value.trim();
        let list = || {
            value
                .split(',')
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect::<Vec<_>>()
        };
        match label.trim().to_ascii_lowercase().as_str() {
            "ans-type" | "ans type" | "answer type" => si.ans_type = list(),
            "entities" => si.entities = list(),
            "relation" => si.relation = Some(value.to_string()),
            "time" => si.time = Some(value.to_string()),
            "location" => si.location = Some(value.to_string()),
            _ => continue,
        }
        recognized = true;
    }
    let si = si.sanitized();
    (recognized && !si.is_empty()).then_some(si)
}

/// An external model producing slot-tagged intents. Implementations must be
/// callable from several threads at once.
pub trait SiModelClient: Send + Sync {
    fn complete(&self, question: &str) -> Result<String, ClientError>;
}

#[derive(Debug, Serialize)]
struct SiRequest<'a> {
    question: &'a str,
}

#[derive(Debug, Deserialize)]
struct SiReply {
    si: String,
}

/// `POST {"question": ...}` → `{"si": "<slot-tagged string>"}`.
#[derive(Debug, Clone)]
pub struct HttpSiModelClient {
    endpoint: JsonEndpoint,
}

impl HttpSiModelClient {
    pub fn new(url: impl Into<String>, timeout_ms: u64) -> Result<Self, ClientError> {
        Ok(HttpSiModelClient {
            endpoint: JsonEndpoint::new(url, timeout_ms)?,
        })
    }
}

impl SiModelClient for HttpSiModelClient {
    fn complete(&self, question: &str) -> Result<String, ClientError> {
        let reply: SiReply = self.endpoint.post(&SiRequest { question })?;
        Ok(reply.si)
    }
}

/// Model-backed generator. Transport failures are returned to the caller; an
/// unparseable reply is logged and replaced by the rules-based SI.
pub fn generate_si_model(
    q: &Question,
    client: &dyn SiModelClient,
    catalog: &Catalog,
) -> Result<StructuredIntent, ClientError> {
    let reply = client.complete(&q.text)?;
    Ok(parse_slot_tagged(&reply).unwrap_or_else(|| {
        log::warn!("malformed SI reply for question {}: {reply:?}; using rules", q.id);
        generate_si_rules(q, catalog)
    }))
}
