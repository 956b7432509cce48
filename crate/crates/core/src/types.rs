//! Data model shared by every pipeline stage.
//!
//! All records serialize as one JSON object per line; the field names below
//! are part of the interchange contract.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Literal answer token meaning "the evidence does not support an answer".
pub const UNKNOWN_ANSWER: &str = "unknown";

/// True when `answer` is the refrain sentinel (case-insensitive, trimmed).
pub fn is_unknown(answer: &str) -> bool {
    answer.trim().eq_ignore_ascii_case(UNKNOWN_ANSWER)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    /// Marks the entity as a place; the rules-based intent generator fills
    /// the location slot from these.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub location: bool,
}

impl Entity {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        Entity {
            id: id.into(),
            label: label.into(),
            aliases: Vec::new(),
            location: false,
        }
    }

    pub fn with_aliases<I, S>(mut self, aliases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.aliases = aliases.into_iter().map(Into::into).collect();
        self
    }

    pub fn as_location(mut self) -> Self {
        self.location = true;
        self
    }

    /// Label followed by aliases.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.label.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SourceType {
    Kg,
    Text,
    Table,
}

impl fmt::Display for SourceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceType::Kg => "KG",
            SourceType::Text => "TEXT",
            SourceType::Table => "TABLE",
        })
    }
}

/// Where an evidence piece was verbalized from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Kg {
        fact: String,
    },
    Text {
        doc: String,
        sentence: usize,
        page_title: String,
    },
    Table {
        table: String,
        row: usize,
        page_title: String,
    },
}

impl Provenance {
    pub fn page_title(&self) -> Option<&str> {
        match self {
            Provenance::Kg { .. } => None,
            Provenance::Text { page_title, .. } | Provenance::Table { page_title, .. } => Some(page_title),
        }
    }

    /// Evidence id derived from the origin unit; injective over provenances.
    pub fn evidence_id(&self) -> String {
        match self {
            Provenance::Kg { fact } => format!("kg:{fact}"),
            Provenance::Text { doc, sentence, .. } => format!("text:{doc}:{sentence}"),
            Provenance::Table { table, row, .. } => format!("table:{table}:{row}"),
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Kg { fact } => write!(f, "kg fact {fact}"),
            Provenance::Text {
                doc,
                sentence,
                page_title,
            } => write!(f, "text {doc} (\"{page_title}\") sentence {sentence}"),
            Provenance::Table { table, row, page_title } => write!(f, "table {table} (\"{page_title}\") row {row}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidencePiece {
    pub id: String,
    pub source: SourceType,
    pub text: String,
    #[serde(default)]
    pub entity_ids: Vec<String>,
    pub provenance: Provenance,
    #[serde(default)]
    pub score: f64,
}

impl EvidencePiece {
    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }
}

/// Five-slot decomposition of a question.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredIntent {
    #[serde(default)]
    pub ans_type: Vec<String>,
    #[serde(default)]
    pub entities: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

impl StructuredIntent {
    /// No slot carries a value; downstream stages use the raw question text.
    pub fn is_empty(&self) -> bool {
        self.ans_type.is_empty()
            && self.entities.is_empty()
            && self.relation.is_none()
            && self.time.is_none()
            && self.location.is_none()
    }

    /// Trims every value and drops the ones left empty.
    pub fn sanitized(self) -> Self {
        fn list(values: Vec<String>) -> Vec<String> {
            values
                .into_iter()
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect()
        }
        fn opt(value: Option<String>) -> Option<String> {
            value.map(|v| v.trim().to_string()).filter(|v| !v.is_empty())
        }
        StructuredIntent {
            ans_type: list(self.ans_type),
            entities: list(self.entities),
            relation: opt(self.relation),
            time: opt(self.time),
            location: opt(self.location),
        }
    }

    /// Slot values in the fixed order Ans-Type, Entities, Relation, Time,
    /// Location.
    pub fn slot_values(&self) -> impl Iterator<Item = &str> {
        self.ans_type
            .iter()
            .chain(self.entities.iter())
            .map(String::as_str)
            .chain(self.relation.as_deref())
            .chain(self.time.as_deref())
            .chain(self.location.as_deref())
    }
}

/// Keyword query for a question: the SI slot values joined by single spaces,
/// or `fallback` (the raw question) when the SI is empty.
pub fn si_concat(si: &StructuredIntent, fallback: &str) -> String {
    let joined = si
        .slot_values()
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    if joined.is_empty() {
        fallback.to_string()
    } else {
        joined
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    #[serde(alias = "question")]
    pub text: String,
    #[serde(default, alias = "answers")]
    pub gold_answers: Vec<String>,
}

impl Question {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Question {
            id: id.into(),
            text: text.into(),
            gold_answers: Vec::new(),
        }
    }

    pub fn with_answers<I, S>(mut self, answers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.gold_answers = answers.into_iter().map(Into::into).collect();
        self
    }
}

/// Final output for one question. The `refrained` flag is derived from the
/// answer string and cannot be set independently.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "RawAnswerResult")]
pub struct AnswerResult {
    answer: String,
    refrained: bool,
    supporting_evidence: Vec<String>,
    prompt_evidence_count: usize,
}

#[derive(Deserialize)]
struct RawAnswerResult {
    answer: String,
    #[serde(default)]
    supporting_evidence: Vec<String>,
    #[serde(default)]
    prompt_evidence_count: usize,
}

impl From<RawAnswerResult> for AnswerResult {
    fn from(raw: RawAnswerResult) -> Self {
        AnswerResult::new(raw.answer, raw.supporting_evidence, raw.prompt_evidence_count)
    }
}

impl AnswerResult {
    pub fn new(answer: impl Into<String>, supporting_evidence: Vec<String>, prompt_evidence_count: usize) -> Self {
        let answer = answer.into();
        let refrained = is_unknown(&answer);
        AnswerResult {
            answer,
            refrained,
            // a refusal is never grounded in evidence
            supporting_evidence: if refrained { Vec::new() } else { supporting_evidence },
            prompt_evidence_count,
        }
    }

    pub fn answer(&self) -> &str {
        &self.answer
    }

    pub fn refrained(&self) -> bool {
        self.refrained
    }

    pub fn supporting_evidence(&self) -> &[String] {
        &self.supporting_evidence
    }

    pub fn prompt_evidence_count(&self) -> usize {
        self.prompt_evidence_count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn si(ans: &[&str], ents: &[&str], rel: Option<&str>, time: Option<&str>) -> StructuredIntent {
        StructuredIntent {
            ans_type: ans.iter().map(|s| s.to_string()).collect(),
            entities: ents.iter().map(|s| s.to_string()).collect(),
            relation: rel.map(String::from),
            time: time.map(String::from),
            location: None,
        }
    }

    #[test]
    fn concat_follows_slot_order() {
        let intent = si(&["person"], &["China", "NBA"], None, Some("first"));
        assert_eq!(si_concat(&intent, "q"), "person China NBA first");
    }

    #[test]
    fn concat_falls_back_on_empty_intent() {
        assert_eq!(si_concat(&StructuredIntent::default(), "who won?"), "who won?");
    }

    #[test]
    fn concat_single_slot() {
        let intent = si(&[], &[], Some("plays for"), None);
        assert_eq!(si_concat(&intent, "q"), "plays for");
    }

    #[test]
    fn concat_skips_blank_values() {
        let intent = si(&[" "], &[], Some(""), Some("2018"));
        assert_eq!(si_concat(&intent, "q"), "2018");
        assert!(intent.sanitized().relation.is_none());
    }

    #[test]
    fn answer_result_refrain_flag() {
        let r = AnswerResult::new(" Unknown ", vec!["e1".into()], 3);
        assert!(r.refrained());
        assert!(r.supporting_evidence().is_empty());
        let r = AnswerResult::new("Yao Ming", vec!["e1".into()], 3);
        assert!(!r.refrained());
        // deserializing ignores any stored flag
        let parsed: AnswerResult = serde_json::from_str(r#"{"answer":"UNKNOWN","refrained":false}"#).unwrap();
        assert!(parsed.refrained());
    }

    #[test]
    fn provenance_ids_are_distinct_per_unit() {
        let a = Provenance::Text {
            doc: "d".into(),
            sentence: 1,
            page_title: "P".into(),
        };
        let b = Provenance::Table {
            table: "d".into(),
            row: 1,
            page_title: "P".into(),
        };
        assert_ne!(a.evidence_id(), b.evidence_id());
    }

    #[test]
    fn interchange_field_names() {
        let piece = EvidencePiece {
            id: "kg:f1".into(),
            source: SourceType::Kg,
            text: "a b c".into(),
            entity_ids: vec!["Q1".into()],
            provenance: Provenance::Kg { fact: "f1".into() },
            score: 0.5,
        };
        let json = serde_json::to_string(&piece).unwrap();
        assert_eq!(
            json,
            r#"{"id":"kg:f1","source":"KG","text":"a b c","entity_ids":["Q1"],"provenance":{"kind":"kg","fact":"f1"},"score":0.5}"#
        );
        let q: Question = serde_json::from_str(r#"{"id":"q1","question":"who?","answers":["x"]}"#).unwrap();
        assert_eq!(q.text, "who?");
        assert_eq!(q.gold_answers, vec!["x"]);
    }

    fn arb_string() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9 ]{1,12}"
    }

    fn arb_intent() -> impl Strategy<Value = StructuredIntent> {
        (
            proptest::collection::vec(arb_string(), 0..3),
            proptest::collection::vec(arb_string(), 0..3),
            proptest::option::of(arb_string()),
            proptest::option::of(arb_string()),
            proptest::option::of(arb_string()),
        )
            .prop_map(|(ans_type, entities, relation, time, location)| StructuredIntent {
                ans_type,
                entities,
                relation,
                time,
                location,
            })
    }

    proptest! {
        #[test]
        fn records_round_trip(intent in arb_intent(), id in arb_string(), text in arb_string(),
                              score in -1e6f64..1e6, row in 0usize..1000) {
            let json = serde_json::to_string(&intent).unwrap();
            prop_assert_eq!(serde_json::from_str::<StructuredIntent>(&json).unwrap(), intent);

            let piece = EvidencePiece {
                id: id.clone(),
                source: SourceType::Table,
                text: text.clone(),
                entity_ids: vec![id.clone()],
                provenance: Provenance::Table { table: id.clone(), row, page_title: text.clone() },
                score,
            };
            let json = serde_json::to_string(&piece).unwrap();
            prop_assert_eq!(serde_json::from_str::<EvidencePiece>(&json).unwrap(), piece);

            let entity = Entity::new(id.clone(), text.clone()).with_aliases([id.clone()]);
            let json = serde_json::to_string(&entity).unwrap();
            prop_assert_eq!(serde_json::from_str::<Entity>(&json).unwrap(), entity);

            let answer = AnswerResult::new(text.clone(), vec![id.clone()], row);
            let json = serde_json::to_string(&answer).unwrap();
            prop_assert_eq!(serde_json::from_str::<AnswerResult>(&json).unwrap(), answer);
        }

        #[test]
        fn concat_order_is_category_stable(intent in arb_intent()) {
            let out = si_concat(&intent, "fallback");
            let expected: Vec<&str> = intent.slot_values().map(str::trim).filter(|v| !v.is_empty()).collect();
            if expected.is_empty() {
                prop_assert_eq!(out, "fallback");
            } else {
                prop_assert_eq!(out, expected.join(" "));
            }
        }

        #[test]
        fn refrain_flag_matches_answer(answer in "[ a-zA-Z]{0,10}") {
            let r = AnswerResult::new(answer.clone(), vec![], 0);
            prop_assert_eq!(r.refrained(), answer.trim().eq_ignore_ascii_case("unknown"));
        }
    }
}
