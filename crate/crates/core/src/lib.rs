//! Retrieval-augmented question answering over heterogeneous sources.
//!
//! A question flows through four stages:
//!
//! 1. [`intent`] turns it into a [`StructuredIntent`].
//! 2. [`retrieval`] anchors entities, scopes and BM25-ranks verbalized
//!    evidence ([`ingest`]) from KG facts, tables and text.
//! 3. [`rerank`] prunes the pool with a graph neural network or a
//!    cross-encoder in one or more rounds.
//! 4. [`answer`] prompts a generator and attaches supporting evidence.
//!
//! [`eval`] scores end-to-end runs and [`pipeline`] wires the stages.

pub mod answer;
pub mod catalog;
pub mod config;
pub mod error;
pub mod eval;
pub mod gold;
pub mod http;
pub mod ingest;
pub mod intent;
pub mod jsonl;
pub mod pipeline;
pub mod rerank;
pub mod retrieval;
pub mod synth;
pub mod text;
pub mod types;

pub use catalog::Catalog;
pub use config::Config;
pub use error::{ClientError, Error, Result};
pub use pipeline::{Pipeline, QuestionOutcome};
pub use types::{
    is_unknown, si_concat, AnswerResult, Entity, EvidencePiece, Provenance, Question, SourceType, StructuredIntent,
    UNKNOWN_ANSWER,
};
