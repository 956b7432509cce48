//! Weakly supervised GNN training with epoch-wise model selection.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::Result;
use crate::types::EvidencePiece;

use super::encode::{encode_nodes, NodeEncoder};
use super::gnn::{GnnModel, NodeTargets};
use super::graph::{build_graph, BipartiteGraph, GraphCaps};
use super::labels::{weak_label, WeakLabels};

/// Cutoff for the dev metric used to pick the best epoch.
pub const DEV_PRESENCE_K: usize = 30;

#[derive(Debug, Clone)]
pub struct TrainingGraph {
    pub graph: BipartiteGraph,
    pub encodings: Array2<f64>,
    pub labels: WeakLabels,
}

impl TrainingGraph {
    /// Builds the capped graph of a retrieval pool (best first), encodes it
    /// against `query` and labels it from the gold answers.
    pub fn from_pool<S: AsRef<str>>(
        pool: &[EvidencePiece],
        golds: &[S],
        query: &str,
        catalog: &Catalog,
        caps: GraphCaps,
        encoder: &dyn NodeEncoder,
    ) -> Self {
        let graph = build_graph(pool, caps);
        let encodings = encode_nodes(&graph, query, pool, catalog, encoder);
        let labels = weak_label(pool, golds, catalog);
        TrainingGraph {
            graph,
            encodings,
            labels,
        }
    }

    pub fn targets(&self) -> NodeTargets {
        self.labels.targets(&self.graph)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Seeds the per-epoch visiting order of training graphs.
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            learning_rate: 0.01,
            shuffle_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Mean loss over the epoch's training graphs, each taken just before
    /// its update.
    pub train_loss: f64,
    /// Answer presence in the top evidence of dev graphs, if a dev set exists.
    pub dev_ap_at_30: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GnnModel,
    pub initial_loss: f64,
    pub history: Vec<EpochReport>,
    /// 0 means no training happened and the initial model was returned.
    pub best_epoch: usize,
}

fn mean_loss(model: &GnnModel, data: &[TrainingGraph]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for example in data {
        total += model.loss(&example.graph, &example.encodings, &example.targets())?;
    }
    Ok(total / data.len() as f64)
}

/// Fraction of graphs whose top-`k` evidence (by model score) contains a
/// relevant piece.
pub fn graph_answer_presence(model: &GnnModel, data: &[TrainingGraph], k: usize) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for example in data {
        let scores = model.forward(&example.graph, &example.encodings)?;
        let targets = example.targets();
        let mut order: Vec<usize> = (0..scores.evidence.len()).collect();
        order.sort_by(|&a, &b| scores.evidence[b].total_cmp(&scores.evidence[a]));
        if order.iter().take(k).any(|&i| targets.evidence[i] > 0.5) {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Per-graph gradient descent for `cfg.epochs` epochs. After each epoch the
/// model is evaluated on `dev`; the snapshot with the best dev presence is
/// returned (earliest on ties, last epoch when there is no dev set).
pub fn gnn_train(
    model: GnnModel,
    train: &[TrainingGraph],
    dev: &[TrainingGraph],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if !train.iter().any(|t| t.labels.has_positive()) {
        log::warn!("training data has no relevant evidence; all evidence targets are negative");
    }
    let initial_loss = mean_loss(&model, train)?;
    let mut current = model.clone();
    let mut best = (model, f64::NEG_INFINITY, 0usize);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let example = &train[i];
            let (loss, grads) = current.loss_and_gradients(&example.graph, &example.encodings, &example.targets())?;
            epoch_loss += loss;
            current.apply_gradients(&grads, cfg.learning_rate);
        }
        let train_loss = epoch_loss / train.len().max(1) as f64;
        let dev_metric = if dev.is_empty() {
            None
        } else {
            Some(graph_answer_presence(&current, dev, DEV_PRESENCE_K)?)
        };
        log::info!("epoch {epoch}: train loss {train_loss:.6}, dev AP@{DEV_PRESENCE_K} {dev_metric:?}");
        history.push(EpochReport {
            epoch,
            train_loss,
            dev_ap_at_30: dev_metric,
        });
        let metric = dev_metric.unwrap_or(epoch as f64);
        if metric > best.1 {
            best = (current.clone(), metric, epoch);
        }
    }

    Ok(TrainOutcome {
        model: best.0,
        initial_loss,
        history,
        best_epoch: best.2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rerank::encode::HashedBowEncoder;
    use crate::types::{Entity, Provenance, SourceType};

    fn catalog() -> Catalog {
        Catalog::new(vec![
            Entity::new("Q", "Velmora"),
            Entity::new("A", "Tarsun Club"),
            Entity::new("D1", "Kopari"),
            Entity::new("D2", "Nefeli"),
        ])
        .unwrap()
    }

    fn piece(id: &str, text: &str, ents: &[&str]) -> EvidencePiece {
        EvidencePiece {
            id: id.into(),
            source: SourceType::Text,
            text: text.into(),
            entity_ids: ents.iter().map(|s| s.to_string()).collect(),
            provenance: Provenance::Kg { fact: id.into() },
            score: 0.0,
        }
    }

    fn data() -> Vec<TrainingGraph> {
        let c = catalog();
        let pool = vec![
            piece("d1", "Velmora joined Velmora club Kopari rumor", &["Q", "D1"]),
            piece("r1", "Velmora joined Tarsun Club official record", &["Q", "A"]),
            piece("d2", "Velmora joined Velmora club Nefeli gossip", &["Q", "D2"]),
            piece("n1", "green window paper", &[]),
        ];
        let enc = HashedBowEncoder { dim: 16 };
        vec![TrainingGraph::from_pool(
            &pool,
            &["Tarsun Club"],
            "club Velmora joined",
            &c,
            GraphCaps::training(),
            &enc,
        )]
    }

    #[test]
    fn loss_decreases_over_first_epochs() {
        let data = data();
        let cfg = TrainConfig {
            epochs: 2,
            ..Default::default()
        };
        let out = gnn_train(GnnModel::new(3, 16, 3), &data, &[], &cfg).unwrap();
        assert_eq!(out.history.len(), 2);
        assert_eq!(out.history[0].train_loss, out.initial_loss);
        assert!(out.history[1].train_loss < out.history[0].train_loss);
        let after = out
            .model
            .loss(&data[0].graph, &data[0].encodings, &data[0].targets())
            .unwrap();
        assert!(after < out.history[1].train_loss);
        assert_eq!(out.best_epoch, 2);
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let model = GnnModel::new(3, 16, 9);
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let out = gnn_train(model.clone(), &data(), &data(), &cfg).unwrap();
        assert_eq!(out.model.flat_params(), model.flat_params());
        assert_eq!(out.best_epoch, 0);
        assert!(out.history.is_empty());
    }

    #[test]
    fn all_negative_labels_push_scores_down() {
        let mut data = data();
        data[0].labels.evidence.values_mut().for_each(|v| *v = false);
        data[0].labels.entities.values_mut().for_each(|v| *v = false);
        let model = GnnModel::new(3, 16, 1);
        let before = model.forward(&data[0].graph, &data[0].encodings).unwrap().evidence;
        let cfg = TrainConfig {
            epochs: 3,
            ..Default::default()
        };
        let out = gnn_train(model, &data, &[], &cfg).unwrap();
        let after = out.model.forward(&data[0].graph, &data[0].encodings).unwrap().evidence;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&after) < mean(&before));
    }

    #[test]
    fn best_epoch_never_worse_than_first() {
        let data = data();
        let cfg = TrainConfig {
            epochs: 4,
            ..Default::default()
        };
        let out = gnn_train(GnnModel::new(2, 16, 5), &data, &data, &cfg).unwrap();
        let first = out.history[0].dev_ap_at_30.unwrap();
        let chosen = out.history[out.best_epoch - 1].dev_ap_at_30.unwrap();
        assert!(chosen >= first);
        assert_eq!(
            graph_answer_presence(&out.model, &data, DEV_PRESENCE_K).unwrap(),
            chosen
        );
    }

    #[test]
    fn training_is_reproducible() {
        let data = data();
        let cfg = TrainConfig::default();
        let a = gnn_train(GnnModel::new(3, 16, 4), &data, &data, &cfg).unwrap();
        let b = gnn_train(GnnModel::new(3, 16, 4), &data, &data, &cfg).unwrap();
        assert_eq!(a.model.flat_params(), b.model.flat_params());
        assert_eq!(a.history, b.history);
    }
}
