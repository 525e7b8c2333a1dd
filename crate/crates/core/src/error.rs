use std::path::PathBuf;

use thiserror::Error;

use crate::ast::NodeId;

#[derive(Debug, Error)]
pub enum AstError {
    #[error("document is empty")]
    EmptyDocument,
    #[error("malformed JSON at byte {offset}: {message}")]
    MalformedJson { offset: usize, message: String },
    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("node {node} has no source span")]
    MissingSpan { node: NodeId },
    #[error("span {offset}:{length} of node {node} lies outside the {source_len}-byte source")]
    OutOfBounds {
        node: NodeId,
        offset: i64,
        length: i64,
        source_len: usize,
    },
}

impl AstError {
    pub(crate) fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        AstError::SchemaViolation {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule table line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("rule table has no categorizing rules")]
    Empty,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has no nodes left")]
    EmptyGraph,
    #[error("vocabulary corpus is empty")]
    EmptyCorpus,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("feature width {found} does not match vocabulary width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("bad graph container: {0}")]
    BadContainer(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
pub struct ShapeMismatch {
    pub op: &'static str,
    pub lhs: (usize, usize),
    pub rhs: (usize, usize),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Shape(#[from] ShapeMismatch),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus contains a single class ({0})")]
    DegenerateCorpus(String),
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("bad model container: {0}")]
    BadContainer(String),
    #[error("model was trained with vocabulary {expected} but vocabulary {found} was supplied")]
    VocabularyMismatch { expected: String, found: String },
    #[error(transparent)]
    Split(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}:{line}: bad label {label:?} (expected \"defective\" or \"clean\")", path.display())]
    BadLabel {
        path: PathBuf,
        line: usize,
        label: String,
    },
    #[error("{}:{line}: {reason}", path.display())]
    BadRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("corpus of {0} item(s) is too small to split")]
    TooSmall(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
