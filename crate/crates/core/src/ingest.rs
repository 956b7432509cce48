//! Source parsing and verbalization of KG facts, table rows and sentences into
//! evidence pieces.

use std::collections::{HashSet, VecDeque};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::jsonl::read_records;
use crate::types::{Entity, EvidencePiece, Provenance, SourceType};

/// Separator between page title, DOM-path labels and unit content.
pub const PATH_SEPARATOR: &str = " / ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgFact {
    pub id: String,
    pub subject: String,
    pub predicate: String,
    /// Entity id when it resolves against the catalog, literal otherwise.
    pub object: String,
    #[serde(default)]
    pub qualifiers: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDoc {
    pub id: String,
    pub page_title: String,
    #[serde(default)]
    pub dom_path: Vec<String>,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TableDoc {
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.headers.len() {
                return Err(Error::Invalid(format!(
                    "table {} row {i} has {} cells for {} headers",
                    self.id,
                    row.len(),
                    self.headers.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextDoc {
    pub id: String,
    pub page_title: String,
    #[serde(default)]
    pub dom_path: Vec<String>,
    pub sentences: Vec<String>,
}

fn page_prefix(page_title: &str, dom_path: &[String]) -> String {
    std::iter::once(page_title)
        .chain(dom_path.iter().map(String::as_str))
        .collect::<Vec<_>>()
        .join(PATH_SEPARATOR)
}

fn verbalize_fact(fact: &KgFact, catalog: &Catalog) -> Result<EvidencePiece> {
    let subject = catalog
        .get(&fact.subject)
        .ok_or_else(|| Error::UnknownEntity(fact.subject.clone()))?;
    let mut entity_ids = vec![subject.id.clone()];
    let object_label = match catalog.get(&fact.object) {
        Some(object) => {
            if object.id != subject.id {
                entity_ids.push(object.id.clone());
            }
            object.label.as_str()
        }
        None => fact.object.as_str(),
    };
    let mut text = format!("{} {} {}", subject.label, fact.predicate, object_label);
    for (key, value) in &fact.qualifiers {
        if key.trim().is_empty() {
            return Err(Error::Invalid(format!("fact {} has an empty qualifier key", fact.id)));
        }
        let value_label = match catalog.get(value) {
            Some(entity) => {
                if !entity_ids.contains(&entity.id) {
                    entity_ids.push(entity.id.clone());
                }
                entity.label.as_str()
            }
            None => value.as_str(),
        };
        text.push_str(&format!(", {key}: {value_label}"));
    }
    let provenance = Provenance::Kg { fact: fact.id.clone() };
    Ok(EvidencePiece {
        id: provenance.evidence_id(),
        source: SourceType::Kg,
        text,
        entity_ids,
        provenance,
        score: 0.0,
    })
}

/// One piece per fact reachable from `anchor` in a single hop, in input order.
pub fn verbalize_kg(anchor: &Entity, facts: &[KgFact], catalog: &Catalog) -> Result<Vec<EvidencePiece>> {
    verbalize_kg_bfs(anchor, facts, catalog, 1)
}

/// Breadth-first linearization of the fact graph around `anchor`, up to
/// `max_depth` hops. Facts at equal depth keep their input order; facts
/// unreachable within the depth are skipped.
pub fn verbalize_kg_bfs(
    anchor: &Entity,
    facts: &[KgFact],
    catalog: &Catalog,
    max_depth: usize,
) -> Result<Vec<EvidencePiece>> {
    let mut visited_entities: HashSet<&str> = HashSet::from([anchor.id.as_str()]);
    let mut emitted = vec![false; facts.len()];
    let mut frontier: VecDeque<&str> = VecDeque::from([anchor.id.as_str()]);
    let mut pieces = Vec::new();
    for _ in 0..max_depth {
        if frontier.is_empty() {
            break;
        }
        let current: HashSet<&str> = frontier.drain(..).collect();
        for (i, fact) in facts.iter().enumerate() {
            if emitted[i] {
                continue;
            }
            let touches = current.contains(fact.subject.as_str()) || current.contains(fact.object.as_str());
            if !touches {
                continue;
            }
            emitted[i] = true;
            pieces.push(verbalize_fact(fact, catalog)?);
            for next in [fact.subject.as_str(), fact.object.as_str()] {
                if catalog.contains(next) && visited_entities.insert(next) {
                    frontier.push_back(next);
                }
            }
        }
    }
    Ok(pieces)
}

pub fn verbalize_table_row(table: &TableDoc, row_index: usize, catalog: &Catalog) -> Result<EvidencePiece> {
    let row = table.rows.get(row_index).ok_or(Error::OutOfRange {
        what: "table row",
        index: row_index,
        len: table.rows.len(),
    })?;
    let cells = table
        .headers
        .iter()
        .zip(row)
        .filter(|(_, cell)| !cell.trim().is_empty())
        .map(|(header, cell)| format!("{header}: {cell}"))
        .collect::<Vec<_>>()
        .join(", ");
    let mut text = page_prefix(&table.page_title, &table.dom_path);
    if !cells.is_empty() {
        text.push_str(PATH_SEPARATOR);
        text.push_str(&cells);
    }
    let provenance = Provenance::Table {
        table: table.id.clone(),
        row: row_index,
        page_title: table.page_title.clone(),
    };
    Ok(EvidencePiece {
        id: provenance.evidence_id(),
        source: SourceType::Table,
        entity_ids: catalog.extract_mentions(&text),
        text,
        provenance,
        score: 0.0,
    })
}

pub fn verbalize_text_sentence(doc: &TextDoc, sentence_index: usize, catalog: &Catalog) -> Result<EvidencePiece> {
    let sentence = doc.sentences.get(sentence_index).ok_or(Error::OutOfRange {
        what: "sentence",
        index: sentence_index,
        len: doc.sentences.len(),
    })?;
    if sentence.trim().is_empty() {
        return Err(Error::Invalid(format!(
            "doc {} sentence {sentence_index} is empty",
            doc.id
        )));
    }
    let text = format!(
        "{}{PATH_SEPARATOR}{}",
        page_prefix(&doc.page_title, &doc.dom_path),
        sentence
    );
    let provenance = Provenance::Text {
        doc: doc.id.clone(),
        sentence: sentence_index,
        page_title: doc.page_title.clone(),
    };
    Ok(EvidencePiece {
        id: provenance.evidence_id(),
        source: SourceType::Text,
        entity_ids: catalog.extract_mentions(&text),
        text,
        provenance,
        score: 0.0,
    })
}

/// Lexical entity linking over `text`; see [`Catalog::extract_mentions`].
pub fn extract_entity_mentions(text: &str, catalog: &Catalog) -> Vec<String> {
    catalog.extract_mentions(text)
}

/// Raw source collections awaiting verbalization.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub kg_facts: Vec<KgFact>,
    pub tables: Vec<TableDoc>,
    pub texts: Vec<TextDoc>,
}

impl Corpus {
    pub fn load(kg: Option<&Path>, tables: Option<&Path>, texts: Option<&Path>) -> Result<Self> {
        Ok(Corpus {
            kg_facts: kg.map(read_records).transpose()?.unwrap_or_default(),
            tables: tables.map(read_records).transpose()?.unwrap_or_default(),
            texts: texts.map(read_records).transpose()?.unwrap_or_default(),
        })
    }

    /// Verbalizes every unit. Output order: KG pieces grouped by subject in
    /// order of first appearance, then table rows, then sentences, each by
    /// (document, unit index). Duplicate evidence ids are rejected.
    pub fn verbalize(&self, catalog: &Catalog, kg_depth: usize) -> Result<Vec<EvidencePiece>> {
        let mut subjects: Vec<&str> = Vec::new();
        let mut seen = HashSet::new();
        for fact in &self.kg_facts {
            if seen.insert(fact.subject.as_str()) {
                subjects.push(&fact.subject);
            }
        }
        let mut pieces = Vec::new();
        let mut emitted_facts = HashSet::new();
        for subject in subjects {
            let anchor = catalog
                .get(subject)
                .ok_or_else(|| Error::UnknownEntity(subject.to_string()))?;
            let own: Vec<KgFact> = self
                .kg_facts
                .iter()
                .filter(|f| f.subject == subject || kg_depth > 1)
                .filter(|f| !emitted_facts.contains(&f.id))
                .cloned()
                .collect();
            for piece in verbalize_kg_bfs(anchor, &own, catalog, kg_depth)? {
                if let Provenance::Kg { fact } = &piece.provenance {
                    emitted_facts.insert(fact.clone());
                }
                pieces.push(piece);
            }
        }

        for table in &self.tables {
            table.validate()?;
        }
        let table_pieces: Vec<Vec<EvidencePiece>> = self
            .tables
            .par_iter()
            .map(|t| (0..t.rows.len()).map(|r| verbalize_table_row(t, r, catalog)).collect())
            .collect::<Result<_>>()?;
        let text_pieces: Vec<Vec<EvidencePiece>> = self
            .texts
            .par_iter()
            .map(|d| {
                (0..d.sentences.len())
                    .map(|s| verbalize_text_sentence(d, s, catalog))
                    .collect()
            })
            .collect::<Result<_>>()?;
        pieces.extend(table_pieces.into_iter().flatten());
        pieces.extend(text_pieces.into_iter().flatten());

        let mut ids = HashSet::new();
        for piece in &pieces {
            if !ids.insert(piece.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate evidence id {}", piece.id)));
            }
        }
        Ok(pieces)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Catalog {
        Catalog::new(vec![
            Entity::new("WangZhizhi", "Wang Zhizhi"),
            Entity::new("DallasMavericks", "Dallas Mavericks").with_aliases(["Dallas"]),
            Entity::new("NBA", "NBA"),
            Entity::new("YaoMing", "Yao Ming"),
            Entity::new("Rockets", "Houston Rockets").with_aliases(["Rockets"]),
        ])
        .unwrap()
    }

    fn fact(id: &str, s: &str, p: &str, o: &str, q: &[(&str, &str)]) -> KgFact {
        KgFact {
            id: id.into(),
            subject: s.into(),
            predicate: p.into(),
            object: o.into(),
            qualifiers: q.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    #[test]
    fn kg_fact_with_qualifier() {
        let c = catalog();
        let f = fact(
            "f1",
            "WangZhizhi",
            "member of sports team",
            "DallasMavericks",
            &[("start time", "2000")],
        );
        let pieces = verbalize_kg(c.get("WangZhizhi").unwrap(), &[f], &c).unwrap();
        // manual concatenation: subject label, predicate, object label, ", key: value"
        let expected = ["Wang Zhizhi", "member of sports team", "Dallas Mavericks"].join(" ")
            + &[", ", "start time", ": ", "2000"].concat();
        assert_eq!(pieces[0].text, expected);
        assert_eq!(
            pieces[0].text,
            "Wang Zhizhi member of sports team Dallas Mavericks, start time: 2000"
        );
        assert_eq!(pieces[0].entity_ids, vec!["WangZhizhi", "DallasMavericks"]);
        assert_eq!(pieces[0].source, SourceType::Kg);
    }

    #[test]
    fn kg_fact_without_qualifiers_and_literal_object() {
        let c = catalog();
        let f = fact("f2", "YaoMing", "height", "2.29 m", &[]);
        let p = verbalize_kg(c.get("YaoMing").unwrap(), &[f], &c).unwrap();
        assert_eq!(p[0].text, "Yao Ming height 2.29 m");
        assert_eq!(p[0].entity_ids, vec!["YaoMing"]);
    }

    #[test]
    fn kg_order_and_errors() {
        let c = catalog();
        let facts = vec![
            fact("a", "YaoMing", "league", "NBA", &[]),
            fact("b", "YaoMing", "team", "Rockets", &[]),
            fact("c", "NBA", "founded", "1946", &[]),
        ];
        let p = verbalize_kg(c.get("YaoMing").unwrap(), &facts, &c).unwrap();
        assert_eq!(
            p.iter().map(|x| x.id.as_str()).collect::<Vec<_>>(),
            vec!["kg:a", "kg:b"]
        );
        let deep = verbalize_kg_bfs(c.get("YaoMing").unwrap(), &facts, &c, 2).unwrap();
        assert_eq!(deep.len(), 3);

        let bad = fact("x", "Nobody", "p", "NBA", &[]);
        assert!(matches!(
            verbalize_kg(c.get("NBA").unwrap(), &[bad], &c),
            Err(Error::UnknownEntity(_))
        ));
        let bad_key = fact("y", "NBA", "p", "o", &[(" ", "v")]);
        assert!(verbalize_kg(c.get("NBA").unwrap(), &[bad_key], &c).is_err());
    }

    fn wang_table() -> TableDoc {
        TableDoc {
            id: "t1".into(),
            page_title: "Wang Zhizhi".into(),
            dom_path: vec!["NBA Career".into()],
            headers: vec!["Season".into(), "Team".into(), "Games Played".into()],
            rows: vec![
                vec!["2000-2001".into(), "Dallas".into(), "5".into()],
                vec!["2001-2002".into(), "".into(), "55".into()],
            ],
        }
    }

    #[test]
    fn table_row_verbalization() {
        let c = catalog();
        let p = verbalize_table_row(&wang_table(), 0, &c).unwrap();
        assert_eq!(
            p.text,
            "Wang Zhizhi / NBA Career / Season: 2000-2001, Team: Dallas, Games Played: 5"
        );
        assert_eq!(p.entity_ids, vec!["WangZhizhi", "NBA", "DallasMavericks"]);
        assert_eq!(p.id, "table:t1:0");

        let skipped = verbalize_table_row(&wang_table(), 1, &c).unwrap();
        assert_eq!(
            skipped.text,
            "Wang Zhizhi / NBA Career / Season: 2001-2002, Games Played: 55"
        );

        let mut flat = wang_table();
        flat.dom_path.clear();
        assert_eq!(
            verbalize_table_row(&flat, 0, &c).unwrap().text,
            "Wang Zhizhi / Season: 2000-2001, Team: Dallas, Games Played: 5"
        );
        assert!(matches!(
            verbalize_table_row(&flat, 2, &c),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn ragged_table_rejected() {
        let mut t = wang_table();
        t.rows.push(vec!["x".into()]);
        assert!(t.validate().is_err());
    }

    #[test]
    fn sentence_verbalization() {
        let c = catalog();
        let doc = TextDoc {
            id: "d1".into(),
            page_title: "Yao Ming".into(),
            dom_path: vec!["Career".into(), "NBA".into()],
            sentences: vec!["He joined the Rockets in 2002.".into(), "Yao Ming".into()],
        };
        let p = verbalize_text_sentence(&doc, 0, &c).unwrap();
        let expected = ["Yao Ming", "Career", "NBA", "He joined the Rockets in 2002."].join(" / ");
        assert_eq!(p.text, expected);
        assert_eq!(p.entity_ids, vec!["YaoMing", "NBA", "Rockets"]);
        assert_eq!(
            verbalize_text_sentence(&doc, 1, &c).unwrap().text,
            "Yao Ming / Career / NBA / Yao Ming"
        );

        let flat = TextDoc {
            dom_path: vec![],
            ..doc.clone()
        };
        assert_eq!(
            verbalize_text_sentence(&flat, 0, &c).unwrap().text,
            "Yao Ming / He joined the Rockets in 2002."
        );
        assert!(verbalize_text_sentence(&doc, 5, &c).is_err());
    }

    #[test]
    fn corpus_ids_are_unique_and_resolve() {
        let c = catalog();
        let corpus = Corpus {
            kg_facts: vec![
                fact("f1", "WangZhizhi", "member of sports team", "DallasMavericks", &[]),
                fact("f2", "YaoMing", "league", "NBA", &[]),
                fact("f3", "WangZhizhi", "league", "NBA", &[]),
            ],
            tables: vec![wang_table()],
            texts: vec![TextDoc {
                id: "d1".into(),
                page_title: "Yao Ming".into(),
                dom_path: vec![],
                sentences: vec!["a".into(), "b".into()],
            }],
        };
        let pool = corpus.verbalize(&c, 1).unwrap();
        assert_eq!(pool.len(), 3 + 2 + 2);
        let ids: HashSet<_> = pool.iter().map(|p| &p.id).collect();
        assert_eq!(ids.len(), pool.len());
        assert_eq!(pool[0].id, "kg:f1");
        assert_eq!(pool[1].id, "kg:f3");
        for piece in &pool {
            assert!(!piece.text.is_empty());
            assert!(piece.entity_ids.iter().all(|id| c.contains(id)));
        }
        // the same facts with deeper traversal still yield one piece per fact
        assert_eq!(corpus.verbalize(&c, 3).unwrap().len(), 7);
    }
}
