//! AST → contract graph → GCN-ready matrices.
//!
//! The stages mirror the processing flow of the detector:
//! [`build_graph`] lays categorized nodes out in preorder with a symmetric
//! adjacency, [`optimize_graph`] prunes against the label set and drops
//! everything no longer attached to the contract's top-level nodes,
//! [`embed_nodes`] looks up one embedding row per node, and [`normalize`]
//! produces `D̂^{-1/2}(A + I)D̂^{-1/2}`.

mod normalize;
mod vocab;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub use normalize::{normalize, NormalizedGraph, GRAPH_MAGIC};
pub use vocab::{
    build_vocabulary, build_vocabulary_with, node_token, VocabConfig, Vocabulary,
    DEFAULT_EMBEDDING_DIM, DEFAULT_NAME_BUCKETS, UNK_INDEX, UNK_TOKEN,
};

use crate::ast::{AstTree, NodeId, SrcSpan};
use crate::error::GraphError;
use crate::features::{DependencyCategory, EdgeKind, EdgeTuple, LabelSet, NodeTuple};
use crate::label::Label;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub ast_id: NodeId,
    pub n_type: String,
    pub name: String,
    pub category: DependencyCategory,
    pub span: Option<SrcSpan>,
    /// Index into the vocabulary once embedded.
    pub token: Option<usize>,
}

impl GraphNode {
    fn as_tuple(&self) -> NodeTuple {
        NodeTuple {
            n_id: self.ast_id,
            n_name: self.name.clone(),
            n_type: self.n_type.clone(),
            n_value: String::new(),
            category: self.category,
        }
    }
}

/// Directed edge in graph-index space; the adjacency matrix is its
/// symmetric closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GraphEdge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractGraph {
    pub nodes: Vec<GraphNode>,
    /// `n × d`; zero columns until [`embed_nodes`] runs.
    pub features: Matrix,
    pub adjacency: Matrix,
    pub neighbor_map: Vec<Vec<usize>>,
    pub edges: Vec<GraphEdge>,
    /// Nodes without a categorized AST ancestor. Pruning keeps only what is
    /// still reachable from these.
    pub anchors: Vec<usize>,
    pub label: Option<Label>,
}

impl ContractGraph {
    /// Assembles a graph from directed edges, filling adjacency and
    /// neighbor lists. Edges referencing missing indices are rejected.
    pub fn from_parts(
        nodes: Vec<GraphNode>,
        edges: Vec<GraphEdge>,
        anchors: Vec<usize>,
    ) -> Result<Self, GraphError> {
        let n = nodes.len();
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        let mut adjacency = Matrix::zeros(n, n);
        for e in &edges {
            if e.src >= n || e.dst >= n {
                return Err(GraphError::InvalidArgument(format!(
                    "edge {}→{} outside {n} nodes",
                    e.src, e.dst
                )));
            }
            adjacency[(e.src, e.dst)] = 1.0;
            adjacency[(e.dst, e.src)] = 1.0;
        }
        if let Some(&bad) = anchors.iter().find(|&&a| a >= n) {
            return Err(GraphError::InvalidArgument(format!(
                "anchor {bad} outside {n} nodes"
            )));
        }
        let neighbor_map = neighbors_of(&adjacency);
        Ok(ContractGraph {
            nodes,
            features: Matrix::zeros(n, 0),
            adjacency,
            neighbor_map,
            edges,
            anchors,
            label: None,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.iter().map(|n| n.ast_id).collect()
    }

    /// Feature row of node `i` (empty before embedding).
    pub fn value(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    /// Node tuples of the surviving nodes, for vocabulary building.
    pub fn node_tuples(&self) -> Vec<NodeTuple> {
        self.nodes.iter().map(GraphNode::as_tuple).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Restriction to `keep` (ascending graph indices).
    fn induced(&self, keep: &[usize]) -> ContractGraph {
        let remap: HashMap<usize, usize> = keep
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new))
            .collect();
        let n = keep.len();
        let nodes = keep.iter().map(|&i| self.nodes[i].clone()).collect();
        let edges: Vec<GraphEdge> = self
            .edges
            .iter()
            .filter_map(|e| {
                Some(GraphEdge {
                    src: *remap.get(&e.src)?,
                    dst: *remap.get(&e.dst)?,
                    kind: e.kind,
                })
            })
            .collect();
        let mut adjacency = Matrix::zeros(n, n);
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                adjacency[(a, b)] = self.adjacency[(i, j)];
            }
        }
        let mut features = Matrix::zeros(n, self.features.cols());
        for (a, &i) in keep.iter().enumerate() {
            features.row_mut(a).copy_from_slice(self.features.row(i));
        }
        let anchors = self
            .anchors
            .iter()
            .filter_map(|a| remap.get(a).copied())
            .collect();
        ContractGraph {
            nodes,
            features,
            neighbor_map: neighbors_of(&adjacency),
            adjacency,
            edges,
            anchors,
            label: self.label,
        }
    }
}

fn neighbors_of(adjacency: &Matrix) -> Vec<Vec<usize>> {
    (0..adjacency.rows())
        .map(|i| {
            adjacency
                .row(i)
                .iter()
                .enumerate()
                .filter(|(_, &a)| a != 0.0)
                .map(|(j, _)| j)
                .collect()
        })
        .collect()
}

/// Lays out one graph node per tuple (tuples are already in DFS preorder)
/// with a symmetric 0/1 adjacency built from the typed edges.
pub fn build_graph(
    tree: &AstTree,
    tuples: &[NodeTuple],
    edges: &[EdgeTuple],
) -> Result<ContractGraph, GraphError> {
    if tuples.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let index: HashMap<NodeId, usize> = tuples
        .iter()
        .enumerate()
        .map(|(i, t)| (t.n_id, i))
        .collect();
    let nodes = tuples
        .iter()
        .map(|t| GraphNode {
            ast_id: t.n_id,
            n_type: t.n_type.clone(),
            name: t.n_name.clone(),
            category: t.category,
            span: tree.node(t.n_id).and_then(|n| n.src_span),
            token: None,
        })
        .collect();
    let graph_edges: Vec<GraphEdge> = edges
        .iter()
        .filter_map(|e| {
            Some(GraphEdge {
                src: *index.get(&e.e_s)?,
                dst: *index.get(&e.e_e)?,
                kind: e.e_t,
            })
        })
        .collect();
    let has_parent: HashSet<usize> = graph_edges
        .iter()
        .filter(|e| e.kind == EdgeKind::AstChild)
        .map(|e| e.dst)
        .collect();
    let anchors = (0..tuples.len())
        .filter(|i| !has_parent.contains(i))
        .collect();
    ContractGraph::from_parts(nodes, graph_edges, anchors)
}

/// Removes nodes whose (type, category) pair is outside `labels`, then keeps
/// only the nodes reachable from a surviving anchor.
pub fn optimize_graph(g: &ContractGraph, labels: &LabelSet) -> Result<ContractGraph, GraphError> {
    let n = g.len();
    let allowed: Vec<bool> = g
        .nodes
        .iter()
        .map(|node| labels.contains(&node.n_type, node.category))
        .collect();

    let mut reached = vec![false; n];
    let mut stack: Vec<usize> = g
        .anchors
        .iter()
        .rev()
        .copied()
        .filter(|&a| allowed[a])
        .collect();
    while let Some(i) = stack.pop() {
        if reached[i] {
            continue;
        }
        reached[i] = true;
        for &j in g.neighbor_map[i].iter().rev() {
            if allowed[j] && !reached[j] {
                stack.push(j);
            }
        }
    }

    let keep: Vec<usize> = (0..n).filter(|&i| reached[i]).collect();
    if keep.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    Ok(g.induced(&keep))
}

/// Replaces the feature matrix with one embedding row per node (UNK when
/// the node's token is unseen).
pub fn embed_nodes(g: &ContractGraph, vocab: &Vocabulary) -> ContractGraph {
    let mut out = g.clone();
    out.features = Matrix::zeros(g.len(), vocab.dim());
    for (i, node) in out.nodes.iter_mut().enumerate() {
        let index = vocab.token_index(&node.as_tuple());
        node.token = Some(index);
        out.features
            .row_mut(i)
            .copy_from_slice(vocab.embedding_row(index));
    }
    out
}
