//! Entity catalog with a lexical alias dictionary.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::text::{normalize_answer, tokenize};
use crate::types::Entity;

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    entities: Vec<Entity>,
    by_id: HashMap<String, usize>,
    /// space-joined token phrase -> entity indices, label matches first
    phrases: HashMap<String, Vec<usize>>,
    max_phrase_tokens: usize,
    /// normalized label/alias -> entity indices
    by_normalized: HashMap<String, Vec<usize>>,
}

impl Catalog {
    /// Builds a catalog. Ids must be unique and labels non-empty; aliases
    /// are de-duplicated case-insensitively (and against the label).
    pub fn new(entities: Vec<Entity>) -> Result<Self> {
        let mut catalog = Catalog::default();
        for mut entity in entities {
            if entity.id.trim().is_empty() {
                return Err(Error::Invalid("entity with empty id".into()));
            }
            if entity.label.trim().is_empty() {
                return Err(Error::Invalid(format!("entity {} has an empty label", entity.id)));
            }
            if catalog.by_id.contains_key(&entity.id) {
                return Err(Error::Invalid(format!("duplicate entity id {}", entity.id)));
            }
            let mut seen = HashSet::new();
            seen.insert(entity.label.to_lowercase());
            entity
                .aliases
                .retain(|a| !a.trim().is_empty() && seen.insert(a.to_lowercase()));

            let idx = catalog.entities.len();
            catalog.by_id.insert(entity.id.clone(), idx);
            for name in entity.names() {
                let tokens = tokenize(name);
                if !tokens.is_empty() {
                    catalog.max_phrase_tokens = catalog.max_phrase_tokens.max(tokens.len());
                    push_unique(catalog.phrases.entry(tokens.join(" ")).or_default(), idx);
                }
                let norm = normalize_answer(name);
                if !norm.is_empty() {
                    push_unique(catalog.by_normalized.entry(norm).or_default(), idx);
                }
            }
            catalog.entities.push(entity);
        }
        Ok(catalog)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn get(&self, id: &str) -> Option<&Entity> {
        self.by_id.get(id).map(|&i| &self.entities[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn label_of<'a>(&'a self, id: &'a str) -> &'a str {
        self.get(id).map_or(id, |e| e.label.as_str())
    }

    /// Entities whose label or an alias normalizes to `normalized`.
    pub fn lookup_normalized(&self, normalized: &str) -> impl Iterator<Item = &Entity> {
        self.by_normalized
            .get(normalized)
            .into_iter()
            .flatten()
            .map(|&i| &self.entities[i])
    }

    /// Case-insensitive longest-match scan of `text` against labels and
    /// aliases. Shorter matches overlapping a longer one are suppressed;
    /// results are de-duplicated in first-occurrence order.
    pub fn extract_mentions(&self, text: &str) -> Vec<String> {
        if self.is_empty() {
            return Vec::new();
        }
        let mut seen = HashSet::new();
        self.mention_spans(&tokenize(text))
            .into_iter()
            .filter_map(|(_, _, id)| seen.insert(id.clone()).then_some(id))
            .collect()
    }

    /// Token spans `[start, end)` of every longest-match mention, in order.
    pub(crate) fn mention_spans(&self, tokens: &[String]) -> Vec<(usize, usize, String)> {
        let mut spans = Vec::new();
        let mut pos = 0;
        while pos < tokens.len() {
            let longest = self.max_phrase_tokens.min(tokens.len() - pos);
            let hit = (1..=longest).rev().find_map(|len| {
                self.phrases
                    .get(&tokens[pos..pos + len].join(" "))
                    .map(|ids| (len, ids[0]))
            });
            match hit {
                Some((len, idx)) => {
                    spans.push((pos, pos + len, self.entities[idx].id.clone()));
                    pos += len;
                }
                None => pos += 1,
            }
        }
        spans
    }
}

fn push_unique(v: &mut Vec<usize>, idx: usize) {
    if !v.contains(&idx) {
        v.push(idx);
    }
}
