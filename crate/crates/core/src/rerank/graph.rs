use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::types::EvidencePiece;

/// Node caps for graph construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphCaps {
    pub evidence_cap: usize,
    pub entity_cap: usize,
}

impl Default for GraphCaps {
    fn default() -> Self {
        GraphCaps {
            evidence_cap: 1000,
            entity_cap: 4000,
        }
    }
}

impl GraphCaps {
    /// Caps used for training graphs.
    pub fn training() -> Self {
        GraphCaps {
            evidence_cap: 100,
            entity_cap: 400,
        }
    }
}

/// Evidence nodes and entity nodes joined by occurrence edges. In node-index
/// space evidence nodes come first (`0..evidence_count`), then entities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub evidence_nodes: Vec<String>,
    pub entity_nodes: Vec<String>,
    /// (evidence index, entity index)
    pub edges: Vec<(usize, usize)>,
}

impl BipartiteGraph {
    pub fn evidence_count(&self) -> usize {
        self.evidence_nodes.len()
    }

    pub fn entity_count(&self) -> usize {
        self.entity_nodes.len()
    }

    pub fn node_count(&self) -> usize {
        self.evidence_nodes.len() + self.entity_nodes.len()
    }

    /// Neighbour lists in node-index space.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let offset = self.evidence_count();
        let mut adj = vec![Vec::new(); self.node_count()];
        for &(e, n) in &self.edges {
            adj[e].push(offset + n);
            adj[offset + n].push(e);
        }
        adj
    }
}

/// Builds the graph over the highest-scoring `evidence_cap` pieces (stable
/// on ties). If more than `entity_cap` entities occur, the lowest-degree ones
/// are dropped (ties: larger id dropped first) together with their edges.
pub fn build_graph(pool: &[EvidencePiece], caps: GraphCaps) -> BipartiteGraph {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool[b].score.total_cmp(&pool[a].score));
    order.truncate(caps.evidence_cap);
    let evidence: Vec<&EvidencePiece> = order.iter().map(|&i| &pool[i]).collect();

    let mut first_seen: Vec<&str> = Vec::new();
    let mut degree: HashMap<&str, usize> = HashMap::new();
    for piece in &evidence {
        let mut local = Vec::new();
        for id in &piece.entity_ids {
            if local.contains(&id.as_str()) {
                continue;
            }
            local.push(id.as_str());
            let d = degree.entry(id.as_str()).or_insert(0);
            if *d == 0 {
                first_seen.push(id.as_str());
            }
            *d += 1;
        }
    }

    let kept: Vec<&str> = if first_seen.len() > caps.entity_cap {
        let mut by_degree = first_seen.clone();
        by_degree.sort_by(|a, b| degree[b].cmp(&degree[a]).then(a.cmp(b)));
        let survivors: HashSet<&str> = by_degree.into_iter().take(caps.entity_cap).collect();
        first_seen.into_iter().filter(|id| survivors.contains(id)).collect()
    } else {
        first_seen
    };
    let entity_index: HashMap<&str, usize> = kept.iter().enumerate().map(|(i, id)| (*id, i)).collect();

    let mut edges = Vec::new();
    for (e, piece) in evidence.iter().enumerate() {
        let mut local = Vec::new();
        for id in &piece.entity_ids {
            if let Some(&n) = entity_index.get(id.as_str()) {
                if !local.contains(&n) {
                    local.push(n);
                    edges.push((e, n));
                }
            }
        }
    }

    BipartiteGraph {
        evidence_nodes: evidence.iter().map(|p| p.id.clone()).collect(),
        entity_nodes: kept.into_iter().map(String::from).collect(),
        edges,
    }
}
