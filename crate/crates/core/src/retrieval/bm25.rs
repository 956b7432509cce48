//! Okapi BM25 over verbalized evidence.
//!
//! ```text
//! score(D, Q) = Σ_{q ∈ Q} idf(q) · tf(q, D) · (k1 + 1) / (tf(q, D) + k1 · (1 − b + b · |D| / avgdl))
//! idf(q)      = ln(1 + (N − n(q) + 0.5) / (n(q) + 0.5))
//! ```
//!
//! The sum runs over query token occurrences, so a repeated query term counts
//! twice. The idf variant is the non-negative one, which keeps every score
//! of a matching document strictly positive.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;
use crate::types::EvidencePiece;

const INDEX_FORMAT: &str = "hetrag-bm25";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    // written negated so that NaN is rejected
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0) || !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!(
                "bm25 parameters out of range: k1={} b={}",
                self.k1, self.b
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub id: String,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Index {
    pub params: Bm25Params,
    /// term -> postings sorted by evidence id
    pub postings: BTreeMap<String, Vec<Posting>>,
    pub doc_lengths: BTreeMap<String, usize>,
    pub avg_doc_length: f64,
    pub doc_count: usize,
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    format: String,
    version: u32,
}

impl Bm25Index {
    pub fn empty(params: Bm25Params) -> Self {
        Bm25Index {
            params,
            postings: BTreeMap::new(),
            doc_lengths: BTreeMap::new(),
            avg_doc_length: 0.0,
            doc_count: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.doc_count == 0
    }

    fn idf(&self, doc_freq: usize) -> f64 {
        let n = self.doc_count as f64;
        let df = doc_freq as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, tf: u32, doc_len: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let norm = if self.avg_doc_length > 0.0 {
            doc_len as f64 / self.avg_doc_length
        } else {
            0.0
        };
        tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm))
    }

    /// Scores every document matching at least one query token.
    fn score_all(&self, query_tokens: &[String]) -> HashMap<&str, f64> {
        let mut scores: HashMap<&str, f64> = HashMap::new();
        for token in query_tokens {
            let Some(postings) = self.postings.get(token) else {
                continue;
            };
            let idf = self.idf(postings.len());
            for posting in postings {
                let len = self.doc_lengths[&posting.id];
                *scores.entry(posting.id.as_str()).or_insert(0.0) += idf * self.term_weight(posting.tf, len);
            }
        }
        scores
    }

    /// BM25 score of one document; 0 when it shares no token with the query
    /// or is not indexed.
    pub fn score_doc(&self, id: &str, query: &str) -> f64 {
        let Some(&len) = self.doc_lengths.get(id) else {
            return 0.0;
        };
        let mut score = 0.0;
        for token in tokenize(query) {
            let Some(postings) = self.postings.get(&token) else {
                continue;
            };
            if let Ok(pos) = postings.binary_search_by(|p| p.id.as_str().cmp(id)) {
                score += self.idf(postings.len()) * self.term_weight(postings[pos].tf, len);
            }
        }
        score
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = IndexHeader {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
        };
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            serde_json::to_writer(&mut *w, &header)?;
            w.write_all(b"\n")?;
            serde_json::to_writer(&mut *w, self)?;
            w.write_all(b"\n")?;
            w.flush()
        };
        write(&mut w).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let mut next_line = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Format(format!("{}: missing {what}", path.display())))?
                .map_err(|e| Error::io(path, e))
        };
        let header: IndexHeader = serde_json::from_str(&next_line("header")?)
            .map_err(|e| Error::Format(format!("{}: bad index header: {e}", path.display())))?;
        if header.format != INDEX_FORMAT || header.version != INDEX_VERSION {
            return Err(Error::Format(format!(
                "{}: expected {INDEX_FORMAT} v{INDEX_VERSION}, found {} v{}",
                path.display(),
                header.format,
                header.version
            )));
        }
        serde_json::from_str(&next_line("index body")?)
            .map_err(|e| Error::Format(format!("{}: bad index body: {e}", path.display())))
    }
}

/// Builds the inverted index. Evidence ids must be unique.
pub fn bm25_build(pieces: &[EvidencePiece], params: Bm25Params) -> Result<Bm25Index> {
    params.validate()?;
    if pieces.is_empty() {
        return Err(Error::Invalid("cannot index an empty evidence pool".into()));
    }
    let mut index = Bm25Index::empty(params);
    let mut seen = HashSet::new();
    let mut total_len = 0usize;
    for piece in pieces {
        if !seen.insert(piece.id.as_str()) {
            return Err(Error::Invalid(format!("duplicate evidence id {}", piece.id)));
        }
        let tokens = tokenize(&piece.text);
        total_len += tokens.len();
        index.doc_lengths.insert(piece.id.clone(), tokens.len());
        let mut tf: BTreeMap<String, u32> = BTreeMap::new();
        for token in tokens {
            *tf.entry(token).or_insert(0) += 1;
        }
        for (term, count) in tf {
            index.postings.entry(term).or_default().push(Posting {
                id: piece.id.clone(),
                tf: count,
            });
        }
    }
    for postings in index.postings.values_mut() {
        postings.sort_by(|a, b| a.id.cmp(&b.id));
    }
    index.doc_count = pieces.len();
    index.avg_doc_length = total_len as f64 / pieces.len() as f64;
    Ok(index)
}

/// Descending by score, ascending by id on ties.
pub(crate) fn rank_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Top `limit` documents with a positive score.
pub fn bm25_search(index: &Bm25Index, query: &str, limit: usize) -> Vec<(String, f64)> {
    let tokens = tokenize(query);
    if tokens.is_empty() || limit == 0 {
        return Vec::new();
    }
    let mut ranked: Vec<(&str, f64)> = index.score_all(&tokens).into_iter().filter(|(_, s)| *s > 0.0).collect();
    ranked.sort_by(|a, b| rank_order(*a, *b));
    ranked.truncate(limit);
    ranked.into_iter().map(|(id, s)| (id.to_string(), s)).collect()
}
