//! State derailment defect detection for smart contracts.
//!
//! A contract's compiler AST is categorized into dependency nodes, laid out
//! as a pruned graph, embedded through a token vocabulary, and classified by
//! a small dense graph convolutional network.

pub mod ast;
pub mod corpus;
pub mod detector;
pub mod error;
pub mod features;
pub mod gcn;
pub mod graph;
pub mod label;
pub mod linalg;
pub mod pipeline;

pub use ast::{parse_ast_json, span_to_source, validate_tree, AstNode, AstTree, NodeId, SrcSpan};
pub use corpus::{load_corpus, split, synth_generate, LabeledContract, Provenance};
pub use detector::{
    evaluate, localize, predict, train, DetectionReport, LabeledGraph, Metrics, Prediction,
};
pub use error::{AstError, CorpusError, GraphError, ModelError, RuleError, ShapeMismatch};
pub use features::{
    extract_edges, extract_node_tuples, DependencyCategory, EdgeKind, EdgeTuple, LabelSet,
    NodeTuple, RuleTable,
};
pub use gcn::{forward, loss_and_grads, GcnModel, GcnParams, TrainConfig};
pub use graph::{
    build_graph, build_vocabulary, embed_nodes, normalize, optimize_graph, ContractGraph,
    NormalizedGraph, Vocabulary,
};
pub use label::Label;
pub use linalg::Matrix;
pub use pipeline::{run_experiment, Experiment, ExperimentConfig, Pipeline, PreparedContract};
