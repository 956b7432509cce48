//! Message-passing network over the evidence/entity graph.
//!
//! Each layer updates every node as
//!
//! ```text
//! h' = tanh(W_self · h + W_msg · mean_{u ∈ N(v)} h_u)
//! ```
//!
//! with a zero message for isolated nodes. Evidence nodes are scored with a
//! logistic head, entity nodes with a softmax over all entities. The training
//! loss is the mean binary cross-entropy over evidence nodes plus the entity
//! cross-entropy against a uniform target over answer entities.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::graph::BipartiteGraph;

const CHECKPOINT_FORMAT: &str = "hetrag-gnn";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GnnLayer {
    pub w_self: Array2<f64>,
    pub w_msg: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub dim: usize,
    pub layers: Vec<GnnLayer>,
    pub w_evidence: Array1<f64>,
    pub w_entity: Array1<f64>,
    pub seed: u64,
}

/// Gradients with the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnGradients {
    pub layers: Vec<GnnLayer>,
    pub w_evidence: Array1<f64>,
    pub w_entity: Array1<f64>,
}

/// Scores in node order: `evidence[i]` belongs to `graph.evidence_nodes[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnScores {
    pub evidence: Vec<f64>,
    pub entities: Vec<f64>,
}

impl GnnScores {
    pub fn evidence_by_id<'g>(&self, graph: &'g BipartiteGraph) -> Vec<(&'g str, f64)> {
        graph
            .evidence_nodes
            .iter()
            .map(String::as_str)
            .zip(self.evidence.iter().copied())
            .collect()
    }

    pub fn entities_by_id<'g>(&self, graph: &'g BipartiteGraph) -> Vec<(&'g str, f64)> {
        graph
            .entity_nodes
            .iter()
            .map(String::as_str)
            .zip(self.entities.iter().copied())
            .collect()
    }
}

/// Supervision for one graph, in node order.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTargets {
    /// 1.0 relevant, 0.0 irrelevant
    pub evidence: Vec<f64>,
    pub answers: Vec<bool>,
}

struct ForwardCache {
    hidden: Vec<Array2<f64>>,
    messages: Vec<Array2<f64>>,
    evidence_logits: Array1<f64>,
    entity_logits: Array1<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn log_softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let lse = max + logits.mapv(|x| (x - max).exp()).sum().ln();
    logits.mapv(|x| x - lse)
}

fn mean_aggregate(adj: &[Vec<usize>], h: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(h.raw_dim());
    for (v, neighbours) in adj.iter().enumerate() {
        if neighbours.is_empty() {
            continue;
        }
        let mut row = out.row_mut(v);
        for &u in neighbours {
            row += &h.row(u);
        }
        row /= neighbours.len() as f64;
    }
    out
}

/// Transpose of [`mean_aggregate`]: routes message gradients back to senders.
fn mean_aggregate_transpose(adj: &[Vec<usize>], grad: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(grad.raw_dim());
    for (v, neighbours) in adj.iter().enumerate() {
        if neighbours.is_empty() {
            continue;
        }
        let share = grad.row(v).mapv(|x| x / neighbours.len() as f64);
        for &u in neighbours {
            let mut row = out.row_mut(u);
            row += &share;
        }
    }
    out
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    let dist = Uniform::new_inclusive(-bound, bound);
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

fn uniform_vector(rng: &mut ChaCha8Rng, len: usize, bound: f64) -> Array1<f64> {
    let dist = Uniform::new_inclusive(-bound, bound);
    Array1::from_shape_fn(len, |_| dist.sample(rng))
}

impl GnnModel {
    /// Glorot-uniform initialization from a seeded ChaCha stream.
    pub fn new(layer_count: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = (6.0 / (2 * dim.max(1)) as f64).sqrt();
        let layers = (0..layer_count)
            .map(|_| GnnLayer {
                w_self: uniform_matrix(&mut rng, dim, dim, bound),
                w_msg: uniform_matrix(&mut rng, dim, dim, bound),
            })
            .collect();
        let head_bound = (6.0 / (dim + 1) as f64).sqrt();
        GnnModel {
            dim,
            layers,
            w_evidence: uniform_vector(&mut rng, dim, head_bound),
            w_entity: uniform_vector(&mut rng, dim, head_bound),
            seed,
        }
    }

    pub fn zeros(layer_count: usize, dim: usize, seed: u64) -> Self {
        GnnModel {
            dim,
            layers: (0..layer_count)
                .map(|_| GnnLayer {
                    w_self: Array2::zeros((dim, dim)),
                    w_msg: Array2::zeros((dim, dim)),
                })
                .collect(),
            w_evidence: Array1::zeros(dim),
            w_entity: Array1::zeros(dim),
            seed,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    fn check_shapes(&self) -> Result<()> {
        let d = self.dim;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.w_self.dim() != (d, d) || layer.w_msg.dim() != (d, d) {
                return Err(Error::Dimension(format!("layer {i} weights are not {d}x{d}")));
            }
        }
        if self.w_evidence.len() != d || self.w_entity.len() != d {
            return Err(Error::Dimension(format!("scoring heads are not of length {d}")));
        }
        Ok(())
    }

    fn run(&self, graph: &BipartiteGraph, encodings: ArrayView2<f64>) -> Result<(ForwardCache, Vec<Vec<usize>>)> {
        self.check_shapes()?;
        if encodings.dim() != (graph.node_count(), self.dim) {
            return Err(Error::Dimension(format!(
                "encodings are {:?}, graph needs ({}, {})",
                encodings.dim(),
                graph.node_count(),
                self.dim
            )));
        }
        let adj = graph.adjacency();
        let mut hidden = vec![encodings.to_owned()];
        let mut messages = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let h = hidden.last().expect("input layer present");
            let m = mean_aggregate(&adj, h);
            let pre = h.dot(&layer.w_self.t()) + m.dot(&layer.w_msg.t());
            messages.push(m);
            hidden.push(pre.mapv(f64::tanh));
        }
        let last = hidden.last().expect("input layer present");
        let split = graph.evidence_count();
        let evidence_logits = last.slice(s![..split, ..]).dot(&self.w_evidence);
        let entity_logits = last.slice(s![split.., ..]).dot(&self.w_entity);
        Ok((
            ForwardCache {
                hidden,
                messages,
                evidence_logits,
                entity_logits,
            },
            adj,
        ))
    }

    /// Evidence relevance in (0, 1) and a probability distribution over entities.
    pub fn forward(&self, graph: &BipartiteGraph, encodings: &Array2<f64>) -> Result<GnnScores> {
        let (cache, _) = self.run(graph, encodings.view())?;
        Ok(GnnScores {
            evidence: cache.evidence_logits.iter().map(|&z| sigmoid(z)).collect(),
            entities: if cache.entity_logits.is_empty() {
                Vec::new()
            } else {
                log_softmax(&cache.entity_logits).mapv(f64::exp).to_vec()
            },
        })
    }

    fn loss_from_cache(cache: &ForwardCache, targets: &NodeTargets) -> f64 {
        let bce: f64 = cache
            .evidence_logits
            .iter()
            .zip(&targets.evidence)
            .map(|(&z, &y)| softplus(z) - y * z)
            .sum::<f64>()
            / cache.evidence_logits.len().max(1) as f64;
        let answers = targets.answers.iter().filter(|&&a| a).count();
        let ce = if answers == 0 || cache.entity_logits.is_empty() {
            0.0
        } else {
            let logp = log_softmax(&cache.entity_logits);
            -logp
                .iter()
                .zip(&targets.answers)
                .filter(|(_, &a)| a)
                .map(|(lp, _)| lp)
                .sum::<f64>()
                / answers as f64
        };
        bce + ce
    }

    fn check_targets(graph: &BipartiteGraph, targets: &NodeTargets) -> Result<()> {
        if targets.evidence.len() != graph.evidence_count() || targets.answers.len() != graph.entity_count() {
            return Err(Error::Dimension("targets do not cover the graph nodes".into()));
        }
        Ok(())
    }

    pub fn loss(&self, graph: &BipartiteGraph, encodings: &Array2<f64>, targets: &NodeTargets) -> Result<f64> {
        Self::check_targets(graph, targets)?;
        let (cache, _) = self.run(graph, encodings.view())?;
        Ok(Self::loss_from_cache(&cache, targets))
    }

    /// Multi-task loss and its exact gradient by reverse-mode differentiation.
    pub fn loss_and_gradients(
        &self,
        graph: &BipartiteGraph,
        encodings: &Array2<f64>,
        targets: &NodeTargets,
    ) -> Result<(f64, GnnGradients)> {
        Self::check_targets(graph, targets)?;
        let (cache, adj) = self.run(graph, encodings.view())?;
        let loss = Self::loss_from_cache(&cache, targets);
        let split = graph.evidence_count();
        let last = cache.hidden.last().expect("input layer present");

        let n_evidence = cache.evidence_logits.len().max(1) as f64;
        let evidence_grad: Array1<f64> = cache
            .evidence_logits
            .iter()
            .zip(&targets.evidence)
            .map(|(&z, &y)| (sigmoid(z) - y) / n_evidence)
            .collect();
        let answers = targets.answers.iter().filter(|&&a| a).count();
        let entity_grad: Array1<f64> = if answers == 0 || cache.entity_logits.is_empty() {
            Array1::zeros(graph.entity_count())
        } else {
            let p = log_softmax(&cache.entity_logits).mapv(f64::exp);
            p.iter()
                .zip(&targets.answers)
                .map(|(&p, &a)| p - if a { 1.0 / answers as f64 } else { 0.0 })
                .collect()
        };

        let w_evidence = last.slice(s![..split, ..]).t().dot(&evidence_grad);
        let w_entity = last.slice(s![split.., ..]).t().dot(&entity_grad);

        let mut d_hidden = Array2::zeros(last.raw_dim());
        d_hidden
            .slice_mut(s![..split, ..])
            .assign(&outer(&evidence_grad, &self.w_evidence));
        d_hidden
            .slice_mut(s![split.., ..])
            .assign(&outer(&entity_grad, &self.w_entity));

        let mut layer_grads = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let out = &cache.hidden[l + 1];
            let d_pre = &d_hidden * &out.mapv(|h| 1.0 - h * h);
            let w_self = d_pre.t().dot(&cache.hidden[l]);
            let w_msg = d_pre.t().dot(&cache.messages[l]);
            let d_msg = d_pre.dot(&layer.w_msg);
            d_hidden = d_pre.dot(&layer.w_self) + mean_aggregate_transpose(&adj, &d_msg);
            layer_grads.push(GnnLayer { w_self, w_msg });
        }
        layer_grads.reverse();

        Ok((
            loss,
            GnnGradients {
                layers: layer_grads,
                w_evidence,
                w_entity,
            },
        ))
    }

    /// Plain gradient-descent step.
    pub fn apply_gradients(&mut self, grads: &GnnGradients, learning_rate: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer.w_self.scaled_add(-learning_rate, &g.w_self);
            layer.w_msg.scaled_add(-learning_rate, &g.w_msg);
        }
        self.w_evidence.scaled_add(-learning_rate, &grads.w_evidence);
        self.w_entity.scaled_add(-learning_rate, &grads.w_entity);
    }

    /// All parameters, layer by layer (W_self then W_msg, row-major), then
    /// the evidence head and the entity head.
    pub fn flat_params(&self) -> Vec<f64> {
        flatten(&self.layers, &self.w_evidence, &self.w_entity)
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.flat_params().len() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.flat_params().len(),
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        for layer in &mut self.layers {
            layer.w_self.iter_mut().for_each(|w| *w = it.next().unwrap());
            layer.w_msg.iter_mut().for_each(|w| *w = it.next().unwrap());
        }
        self.w_evidence.iter_mut().for_each(|w| *w = it.next().unwrap());
        self.w_entity.iter_mut().for_each(|w| *w = it.next().unwrap());
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let body = CheckpointBody {
            layer_count: self.layers.len(),
            dim: self.dim,
            seed: self.seed,
            layers: self
                .layers
                .iter()
                .map(|l| CheckpointLayer {
                    w_self: l.w_self.iter().copied().collect(),
                    w_msg: l.w_msg.iter().copied().collect(),
                })
                .collect(),
            w_evidence: self.w_evidence.to_vec(),
            w_entity: self.w_entity.to_vec(),
        };
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
        };
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            serde_json::to_writer(&mut *w, &header)?;
            w.write_all(b"\n")?;
            serde_json::to_writer(&mut *w, &body)?;
            w.write_all(b"\n")?;
            w.flush()
        };
        write(&mut w).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Format(format!("{}: missing {what}", path.display())))?
                .map_err(|e| Error::io(path, e))
        };
        let header: CheckpointHeader = serde_json::from_str(&next("header")?)
            .map_err(|e| Error::Format(format!("{}: bad checkpoint header: {e}", path.display())))?;
        if header.format != CHECKPOINT_FORMAT || header.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "{}: expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}",
                path.display(),
                header.format,
                header.version
            )));
        }
        let body: CheckpointBody = serde_json::from_str(&next("weights")?)
            .map_err(|e| Error::Format(format!("{}: bad checkpoint body: {e}", path.display())))?;
        let d = body.dim;
        let matrix = |v: Vec<f64>| {
            Array2::from_shape_vec((d, d), v).map_err(|e| Error::Dimension(format!("checkpoint matrix: {e}")))
        };
        if body.layers.len() != body.layer_count {
            return Err(Error::Dimension("checkpoint layer count mismatch".into()));
        }
        let layers = body
            .layers
            .into_iter()
            .map(|l| {
                Ok(GnnLayer {
                    w_self: matrix(l.w_self)?,
                    w_msg: matrix(l.w_msg)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = GnnModel {
            dim: d,
            layers,
            w_evidence: Array1::from(body.w_evidence),
            w_entity: Array1::from(body.w_entity),
            seed: body.seed,
        };
        model.check_shapes()?;
        Ok(model)
    }
}

impl GnnGradients {
    pub fn flat(&self) -> Vec<f64> {
        flatten(&self.layers, &self.w_evidence, &self.w_entity)
    }
}

fn flatten(layers: &[GnnLayer], w_evidence: &Array1<f64>, w_entity: &Array1<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in layers {
        out.extend(layer.w_self.iter().copied());
        out.extend(layer.w_msg.iter().copied());
    }
    out.extend(w_evidence.iter().copied());
    out.extend(w_entity.iter().copied());
    out
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let col = a.view().insert_axis(Axis(1));
    let row = b.view().insert_axis(Axis(0));
    col.dot(&row)
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct CheckpointLayer {
    w_self: Vec<f64>,
    w_msg: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointBody {
    layer_count: usize,
    dim: usize,
    seed: u64,
    layers: Vec<CheckpointLayer>,
    w_evidence: Vec<f64>,
    w_entity: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn star_graph() -> BipartiteGraph {
        BipartiteGraph {
            evidence_nodes: vec!["e0".into(), "e1".into(), "e2".into()],
            entity_nodes: vec!["n0".into(), "n1".into()],
            edges: vec![(0, 0), (1, 0), (1, 1)],
        }
    }

    fn random_encodings(rows: usize, dim: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, dim), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn zero_weights_give_neutral_scores() {
        let g = star_graph();
        let model = GnnModel::zeros(3, 4, 0);
        let scores = model.forward(&g, &random_encodings(5, 4, 1)).unwrap();
        assert!(scores.evidence.iter().all(|&s| s == 0.5));
        assert!(scores.entities.iter().all(|&s| (s - 0.5).abs() < 1e-15));
    }

    #[test]
    fn single_entity_gets_all_mass() {
        let g = BipartiteGraph {
            evidence_nodes: vec!["e".into()],
            entity_nodes: vec!["n".into()],
            edges: vec![(0, 0)],
        };
        let model = GnnModel::new(2, 4, 3);
        let scores = model.forward(&g, &random_encodings(2, 4, 2)).unwrap();
        assert!((scores.entities[0] - 1.0).abs() < 1e-12);
        assert!(scores.evidence[0] > 0.0 && scores.evidence[0] < 1.0);
    }

    #[test]
    fn entity_scores_sum_to_one() {
        let g = star_graph();
        let scores = GnnModel::new(3, 8, 5).forward(&g, &random_encodings(5, 8, 4)).unwrap();
        assert!((scores.entities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let g = star_graph();
        let model = GnnModel::new(1, 8, 0);
        assert!(matches!(
            model.forward(&g, &random_encodings(5, 4, 0)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            model.forward(&g, &random_encodings(4, 8, 0)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn isolated_nodes_use_zero_message() {
        let g = BipartiteGraph {
            evidence_nodes: vec!["e".into()],
            entity_nodes: vec![],
            edges: vec![],
        };
        let mut model = GnnModel::zeros(1, 2, 0);
        model.layers[0].w_self = Array2::eye(2);
        model.layers[0].w_msg = Array2::from_elem((2, 2), 5.0);
        model.w_evidence = Array1::from(vec![1.0, 0.0]);
        let enc = Array2::from_shape_vec((1, 2), vec![0.3, -0.2]).unwrap();
        let s = model.forward(&g, &enc).unwrap();
        assert!((s.evidence[0] - sigmoid(0.3f64.tanh())).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = star_graph();
        let enc = random_encodings(5, 4, 11);
        let targets = NodeTargets {
            evidence: vec![1.0, 0.0, 1.0],
            answers: vec![false, true],
        };
        let model = GnnModel::new(2, 4, 7);
        let (_, grads) = model.loss_and_gradients(&g, &enc, &targets).unwrap();
        let analytic = grads.flat();
        let params = model.flat_params();
        let eps = 1e-6;
        for i in 0..params.len() {
            let mut probe = model.clone();
            let mut p = params.clone();
            p[i] += eps;
            probe.set_flat_params(&p).unwrap();
            let up = probe.loss(&g, &enc, &targets).unwrap();
            p[i] -= 2.0 * eps;
            probe.set_flat_params(&p).unwrap();
            let down = probe.loss(&g, &enc, &targets).unwrap();
            let numeric = (up - down) / (2.0 * eps);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic[i] - numeric).abs() / denom < 1e-4 || (analytic[i] - numeric).abs() < 1e-9,
                "param {i}: analytic {} numeric {numeric}",
                analytic[i]
            );
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = GnnModel::new(3, 8, 42);
        model.save(&path).unwrap();
        let loaded = GnnModel::load(&path).unwrap();
        assert_eq!(loaded, model);
        let bytes = std::fs::read(&path).unwrap();
        loaded.save(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn seeded_init_is_reproducible() {
        assert_eq!(GnnModel::new(3, 16, 9), GnnModel::new(3, 16, 9));
        assert_ne!(GnnModel::new(3, 16, 9), GnnModel::new(3, 16, 10));
    }
}
