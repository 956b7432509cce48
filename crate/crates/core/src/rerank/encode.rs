//! Initial node encodings: signed feature hashing of node text plus the
//! question's SI query, L2-normalized.

use std::collections::HashMap;

use ndarray::{Array1, Array2};

use crate::catalog::Catalog;
use crate::text::tokenize;
use crate::types::EvidencePiece;

use super::graph::BipartiteGraph;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over the UTF-8 bytes of `token`.
pub fn fnv1a64(token: &str) -> u64 {
    token
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Produces a fixed-width vector for a node's text in the context of a query.
pub trait NodeEncoder: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, text: &str, query: &str) -> Array1<f64>;
}

/// Bucket = hash mod dim; sign = top bit of the hash (set means negative).
#[derive(Debug, Clone, Copy)]
pub struct HashedBowEncoder {
    pub dim: usize,
}

impl NodeEncoder for HashedBowEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str, query: &str) -> Array1<f64> {
        let mut v = Array1::zeros(self.dim);
        if self.dim == 0 {
            return v;
        }
        for token in tokenize(text).iter().chain(tokenize(query).iter()) {
            let h = fnv1a64(token);
            let bucket = (h % self.dim as u64) as usize;
            v[bucket] += if h >> 63 == 1 { -1.0 } else { 1.0 };
        }
        let norm = v.dot(&v).sqrt();
        if norm > 0.0 {
            v /= norm;
        }
        v
    }
}

/// Encodings for every node of `graph`, rows in node-index order. Evidence
/// nodes use their verbalized text, entity nodes their catalog label.
pub fn encode_nodes(
    graph: &BipartiteGraph,
    query: &str,
    pool: &[EvidencePiece],
    catalog: &Catalog,
    encoder: &dyn NodeEncoder,
) -> Array2<f64> {
    let texts: HashMap<&str, &str> = pool.iter().map(|p| (p.id.as_str(), p.text.as_str())).collect();
    let mut out = Array2::zeros((graph.node_count(), encoder.dim()));
    let node_texts = graph
        .evidence_nodes
        .iter()
        .map(|id| texts.get(id.as_str()).copied().unwrap_or(""))
        .chain(graph.entity_nodes.iter().map(|id| catalog.label_of(id)));
    for (i, text) in node_texts.enumerate() {
        out.row_mut(i).assign(&encoder.encode(text, query));
    }
    out
}
