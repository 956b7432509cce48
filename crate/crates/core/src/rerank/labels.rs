use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::gold::GoldMatcher;
use crate::types::EvidencePiece;

use super::gnn::NodeTargets;
use super::graph::BipartiteGraph;

/// Distant supervision derived from question-answer pairs alone.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakLabels {
    /// evidence id -> relevant
    pub evidence: BTreeMap<String, bool>,
    /// entity id -> is a gold answer
    pub entities: BTreeMap<String, bool>,
}

impl WeakLabels {
    pub fn has_positive(&self) -> bool {
        self.evidence.values().any(|&r| r)
    }

    pub fn targets(&self, graph: &BipartiteGraph) -> NodeTargets {
        NodeTargets {
            evidence: graph
                .evidence_nodes
                .iter()
                .map(|id| {
                    if self.evidence.get(id).copied().unwrap_or(false) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
            answers: graph
                .entity_nodes
                .iter()
                .map(|id| self.entities.get(id).copied().unwrap_or(false))
                .collect(),
        }
    }
}

/// An entity is an answer when its label or an alias normalizes to a gold
/// answer; a piece is relevant when it mentions an answer entity.
pub fn weak_label<S: AsRef<str>>(pool: &[EvidencePiece], gold_answers: &[S], catalog: &Catalog) -> WeakLabels {
    let matcher = GoldMatcher::new(gold_answers, catalog);
    let answers = matcher.answer_entities();
    let mut labels = WeakLabels::default();
    for piece in pool {
        let mut relevant = false;
        for id in &piece.entity_ids {
            let is_answer = answers.contains(id);
            relevant |= is_answer;
            labels.entities.insert(id.clone(), is_answer);
        }
        labels.evidence.insert(piece.id.clone(), relevant);
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{contains_phrase, normalize_answer};
    use crate::types::{Entity, Provenance, SourceType};

    fn catalog() -> Catalog {
        Catalog::new(vec![
            Entity::new("DAL", "Dallas Mavericks").with_aliases(["Mavs"]),
            Entity::new("YAO", "Yao Ming"),
            Entity::new("NBA", "NBA"),
        ])
        .unwrap()
    }

    fn piece(id: &str, ents: &[&str]) -> EvidencePiece {
        EvidencePiece {
            id: id.into(),
            source: SourceType::Text,
            text: id.into(),
            entity_ids: ents.iter().map(|s| s.to_string()).collect(),
            provenance: Provenance::Kg { fact: id.into() },
            score: 0.0,
        }
    }

    #[test]
    fn gold_entity_makes_piece_relevant() {
        let pool = vec![piece("p1", &["YAO", "DAL"]), piece("p2", &["NBA"])];
        let labels = weak_label(&pool, &["Dallas Mavericks"], &catalog());
        assert!(labels.evidence["p1"]);
        assert!(!labels.evidence["p2"]);
        assert!(labels.entities["DAL"]);
        assert!(!labels.entities["YAO"]);
    }

    #[test]
    fn unmatched_gold_gives_all_negative() {
        let pool = vec![piece("p1", &["YAO", "DAL"])];
        let labels = weak_label(&pool, &["Boston Celtics"], &catalog());
        assert!(!labels.has_positive());
        assert!(labels.entities.values().all(|&a| !a));
    }

    #[test]
    fn alias_gold_matches() {
        let labels = weak_label(&[piece("p1", &["DAL"])], &["mavs"], &catalog());
        assert!(labels.evidence["p1"]);
        // catalog alias scan
        let c = catalog();
        let expected: Vec<&str> = c
            .entities()
            .iter()
            .filter(|e| e.names().any(|n| normalize_answer(n) == normalize_answer("mavs")))
            .map(|e| e.id.as_str())
            .collect();
        assert_eq!(expected, vec!["DAL"]);
    }

    #[test]
    fn equals_brute_force_substring_matching() {
        let c = catalog();
        let pool = vec![piece("p1", &["YAO"]), piece("p2", &["NBA", "DAL"]), piece("p3", &[])];
        for gold in ["yao ming", "The Mavs", "nba", "celtics"] {
            let labels = weak_label(&pool, &[gold], &c);
            let g = normalize_answer(gold);
            for e in c.entities() {
                let brute = e.names().any(|n| {
                    let n = normalize_answer(n);
                    contains_phrase(&n, &g) && n.len() == g.len()
                });
                if let Some(&flag) = labels.entities.get(&e.id) {
                    assert_eq!(flag, brute, "{gold} vs {}", e.id);
                }
            }
        }
    }
}
