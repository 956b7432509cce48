//! Re-ranking and filtering of the retrieved evidence pool.
//!
//! Evidence pieces and the entities they mention form a bipartite graph
//! ([`build_graph`]). A small message-passing network ([`GnnModel`]) trained
//! from question-answer pairs alone ([`weak_label`], [`gnn_train`]) scores
//! both node kinds; alternatively a cross-encoder ([`RelevanceScorer`])
//! scores SI/evidence pairs. [`run_schedule`] applies either in rounds.

mod ce;
mod encode;
mod gnn;
mod graph;
mod labels;
mod schedule;
mod train;

pub use ce::{ce_score, CrossEncoderScorers, HttpScorer, JaccardScorer, RelevanceScorer};
pub use encode::{encode_nodes, fnv1a64, HashedBowEncoder, NodeEncoder};
pub use gnn::{GnnGradients, GnnLayer, GnnModel, GnnScores, NodeTargets};
pub use graph::{build_graph, BipartiteGraph, GraphCaps};
pub use labels::{weak_label, WeakLabels};
pub use schedule::{
    run_schedule, GnnScorer, RerankContext, RerankOutcome, RerankSchedule, RetrievalOrder, StageScorer,
};
pub use train::{
    gnn_train, graph_answer_presence, EpochReport, TrainConfig, TrainOutcome, TrainingGraph, DEV_PRESENCE_K,
};

/// Forward pass; see [`GnnModel::forward`].
pub fn gnn_forward(
    model: &GnnModel,
    graph: &BipartiteGraph,
    encodings: &ndarray::Array2<f64>,
) -> crate::Result<GnnScores> {
    model.forward(graph, encodings)
}
