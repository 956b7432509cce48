//! Matching predictions and evidence against gold answers.

use std::collections::HashSet;

use crate::catalog::Catalog;
use crate::text::{contains_phrase, normalize_answer};
use crate::types::{is_unknown, EvidencePiece};

/// Gold answers expanded through the catalog: every gold string plus every
/// label and alias of an entity that one of the golds names.
#[derive(Debug, Clone, Default)]
pub struct GoldMatcher {
    phrases: Vec<String>,
    entity_ids: HashSet<String>,
}

impl GoldMatcher {
    pub fn new<S: AsRef<str>>(golds: &[S], catalog: &Catalog) -> Self {
        let mut phrases = Vec::new();
        let mut entity_ids = HashSet::new();
        let push = |p: String, phrases: &mut Vec<String>| {
            if !p.is_empty() && !phrases.contains(&p) {
                phrases.push(p);
            }
        };
        for gold in golds {
            let norm = normalize_answer(gold.as_ref());
            for entity in catalog.lookup_normalized(&norm) {
                entity_ids.insert(entity.id.clone());
                for name in entity.names() {
                    push(normalize_answer(name), &mut phrases);
                }
            }
            push(norm, &mut phrases);
        }
        GoldMatcher { phrases, entity_ids }
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// Normalized gold strings and aliases.
    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    /// Catalog entities that are gold answers.
    pub fn answer_entities(&self) -> &HashSet<String> {
        &self.entity_ids
    }

    /// Exact match after normalization; the refrain token never matches.
    pub fn matches_answer(&self, predicted: &str) -> bool {
        if is_unknown(predicted) {
            return false;
        }
        let norm = normalize_answer(predicted);
        self.phrases.contains(&norm)
    }

    /// The piece mentions a gold entity or contains a gold phrase.
    pub fn piece_contains(&self, piece: &EvidencePiece) -> bool {
        if piece.entity_ids.iter().any(|id| self.entity_ids.contains(id)) {
            return true;
        }
        let text = normalize_answer(&piece.text);
        self.phrases.iter().any(|p| contains_phrase(&text, p))
    }
}
