//! Lexical entity anchoring.

use std::collections::HashSet;

use crate::catalog::Catalog;
use crate::text::tokenize;
use crate::types::Entity;

/// Picks the catalog entities a query is about. Implementations may be
/// swapped for a full disambiguation service.
pub trait Anchorer: Send + Sync {
    fn anchor<'c>(&self, query: &str, catalog: &'c Catalog, k: usize) -> Vec<&'c Entity>;
}

/// Token-overlap anchoring: an entity scores the best, over its label and
/// aliases, of |name tokens ∩ query tokens| / |name tokens|.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalAnchorer;

impl Anchorer for LexicalAnchorer {
    fn anchor<'c>(&self, query: &str, catalog: &'c Catalog, k: usize) -> Vec<&'c Entity> {
        anchor_entities(query, catalog, k)
    }
}

pub(crate) fn overlap_ratio(query_tokens: &HashSet<String>, name: &str) -> f64 {
    let name_tokens: HashSet<String> = tokenize(name).into_iter().collect();
    if name_tokens.is_empty() {
        return 0.0;
    }
    let shared = name_tokens.intersection(query_tokens).count();
    shared as f64 / name_tokens.len() as f64
}

/// Top-`k` entities by overlap ratio. Ties go to the label with fewer tokens,
/// then to the smaller id. Entities scoring zero are never returned.
pub fn anchor_entities<'c>(query: &str, catalog: &'c Catalog, k: usize) -> Vec<&'c Entity> {
    let query_tokens: HashSet<String> = tokenize(query).into_iter().collect();
    if query_tokens.is_empty() || k == 0 {
        return Vec::new();
    }
    let mut scored: Vec<(f64, usize, &Entity)> = catalog
        .entities()
        .iter()
        .filter_map(|e| {
            let best = e.names().map(|n| overlap_ratio(&query_tokens, n)).fold(0.0, f64::max);
            (best > 0.0).then(|| (best, tokenize(&e.label).len(), e))
        })
        .collect();
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.cmp(&b.1))
            .then_with(|| a.2.id.cmp(&b.2.id))
    });
    scored.into_iter().take(k).map(|(_, _, e)| e).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: Vec<&Entity>) -> Vec<&str> {
        v.into_iter().map(|e| e.id.as_str()).collect()
    }

    #[test]
    fn overlap_ranking_excludes_zero() {
        let catalog = Catalog::new(vec![
            Entity::new("Chile", "Chile"),
            Entity::new("NBA", "NBA"),
            Entity::new("China", "China"),
        ])
        .unwrap();
        // exhaustive scores: China 1, NBA 1, Chile 0
        assert_eq!(ids(anchor_entities("China NBA", &catalog, 10)), vec!["China", "NBA"]);
        assert!(anchor_entities("volleyball", &catalog, 10).is_empty());
    }

    #[test]
    fn partial_overlap_and_tie_breaks() {
        let catalog = Catalog::new(vec![
            Entity::new("b", "Dallas Mavericks"),
            Entity::new("a", "Dallas"),
            Entity::new("c", "Houston Rockets").with_aliases(["Mavericks fans"]),
        ])
        .unwrap();
        // a: 1.0; b: 0.5; c: alias 0.5, label has 2 tokens -> id tie-break
        assert_eq!(ids(anchor_entities("dallas", &catalog, 5)), vec!["a", "b"]);
        assert_eq!(ids(anchor_entities("mavericks", &catalog, 5)), vec!["b", "c"]);
        assert_eq!(ids(anchor_entities("dallas", &catalog, 1)), vec!["a"]);
    }

    #[test]
    fn single_entity_catalog() {
        let catalog = Catalog::new(vec![Entity::new("x", "Yao Ming")]).unwrap();
        assert_eq!(ids(anchor_entities("yao", &catalog, 1)), vec!["x"]);
        assert!(anchor_entities("yao", &Catalog::default(), 3).is_empty());
    }
}
