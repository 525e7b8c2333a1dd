//! Dependency-category feature extraction: node tuples and typed edges.

mod rules;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use rules::{Condition, LabelSet, Rule, RuleTable, TypePattern, DEFAULT_RULES};

use crate::ast::{AstNode, AstTree, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DependencyCategory {
    Declaration,
    Expression,
    Control,
    Data,
    Function,
}

impl DependencyCategory {
    pub const ALL: [DependencyCategory; 5] = [
        DependencyCategory::Declaration,
        DependencyCategory::Expression,
        DependencyCategory::Control,
        DependencyCategory::Data,
        DependencyCategory::Function,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DependencyCategory::Declaration => "Declaration",
            DependencyCategory::Expression => "Expression",
            DependencyCategory::Control => "Control",
            DependencyCategory::Data => "Data",
            DependencyCategory::Function => "Function",
        }
    }
}

impl fmt::Display for DependencyCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DependencyCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DependencyCategory::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// `(N_id, N_n, N_t, N_v)` plus the category that admitted the node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTuple {
    pub n_id: NodeId,
    pub n_name: String,
    pub n_type: String,
    pub n_value: String,
    pub category: DependencyCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    AstChild,
    ControlFlow,
    DataDep,
    FuncCall,
    DeclRef,
}

/// Directed `(E_s, E_e, E_t)` edge between two categorized nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeTuple {
    pub e_s: NodeId,
    pub e_e: NodeId,
    pub e_t: EdgeKind,
}

pub fn categorize_node(node: &AstNode, rules: &RuleTable) -> Option<DependencyCategory> {
    rules.categorize(node)
}

/// Name used for a node's `N_n`: its declared name, member name, or operator.
pub fn node_name(node: &AstNode) -> &str {
    node.attr("name")
        .or_else(|| node.attr("memberName"))
        .or_else(|| node.attr("operator"))
        .unwrap_or_default()
}

fn node_value(tree: &AstTree, node: &AstNode) -> String {
    let literal = |n: &AstNode| {
        n.attr("value")
            .or_else(|| n.attr("hexValue"))
            .unwrap_or_default()
            .to_owned()
    };
    if node.node_type == "Literal" {
        return literal(node);
    }
    node.child_in("value")
        .and_then(|id| tree.node(id))
        .filter(|n| n.node_type == "Literal")
        .map(literal)
        .unwrap_or_default()
}

/// One tuple per categorized node, in depth-first preorder.
pub fn extract_node_tuples(tree: &AstTree, rules: &RuleTable) -> Vec<NodeTuple> {
    tree.preorder()
        .into_iter()
        .filter_map(|id| {
            let node = tree.node(id)?;
            let category = rules.categorize(node)?;
            Some(NodeTuple {
                n_id: id,
                n_name: node_name(node).to_owned(),
                n_type: node.node_type.clone(),
                n_value: node_value(tree, node),
                category,
            })
        })
        .collect()
}

const BRANCH_FIELDS: [&str; 3] = ["trueBody", "falseBody", "body"];

/// Typed edges between categorized nodes, sorted by `(e_s, e_e, e_t)`.
///
/// AST edges connect each categorized node to its nearest categorized
/// ancestor, so uncategorized wrappers (blocks, statements, parameter lists)
/// are contracted away rather than disconnecting their subtrees.
pub fn extract_edges(tree: &AstTree, tuples: &[NodeTuple]) -> Vec<EdgeTuple> {
    let categories: HashMap<NodeId, DependencyCategory> =
        tuples.iter().map(|t| (t.n_id, t.category)).collect();
    let parents = tree.parents();
    let mut edges = Vec::new();
    let mut push = |e_s: NodeId, e_e: NodeId, e_t: EdgeKind| {
        if e_s != e_e && categories.contains_key(&e_s) && categories.contains_key(&e_e) {
            edges.push(EdgeTuple { e_s, e_e, e_t });
        }
    };

    for t in tuples {
        let Some(node) = tree.node(t.n_id) else {
            continue;
        };

        let mut up = parents.get(&t.n_id);
        while let Some(&p) = up {
            if categories.contains_key(&p) {
                push(p, t.n_id, EdgeKind::AstChild);
                break;
            }
            up = parents.get(&p);
        }

        match node.node_type.as_str() {
            "Identifier" => {
                if let Some(target) = node.referenced_declaration() {
                    push(t.n_id, target, EdgeKind::DeclRef);
                }
            }
            "FunctionCall" => {
                if let Some(callee) = resolve_callee(tree, node) {
                    push(t.n_id, callee, EdgeKind::FuncCall);
                }
            }
            "Assignment" => {
                let lhs = node.child_in("leftHandSide");
                let rhs = node.child_in("rightHandSide");
                if let (Some(lhs), Some(rhs)) = (lhs, rhs) {
                    let mut targets: Vec<NodeId> = write_targets(tree, lhs)
                        .into_iter()
                        .filter(|id| categories.contains_key(id))
                        .collect();
                    if targets.is_empty() {
                        targets.push(lhs);
                    }
                    for src in tree.subtree(rhs) {
                        let is_data_ident = categories.get(&src) == Some(&DependencyCategory::Data)
                            && tree.node(src).is_some_and(|n| n.node_type == "Identifier");
                        if is_data_ident {
                            for &dst in &targets {
                                push(src, dst, EdgeKind::DataDep);
                            }
                        }
                    }
                }
            }
            _ => {}
        }

        if t.category == DependencyCategory::Control {
            for (child, role) in node.children_with_roles() {
                if !BRANCH_FIELDS.contains(&role) {
                    continue;
                }
                if let Some(first) = tree
                    .subtree(child)
                    .into_iter()
                    .find(|id| categories.contains_key(id))
                {
                    push(t.n_id, first, EdgeKind::ControlFlow);
                }
            }
        }
    }

    edges.sort_unstable();
    edges.dedup();
    edges
}

fn resolve_callee(tree: &AstTree, call: &AstNode) -> Option<NodeId> {
    let mut expr = tree.node(call.child_in("expression")?)?;
    while expr.node_type == "FunctionCallOptions" {
        expr = tree.node(expr.child_in("expression")?)?;
    }
    let target = tree.node(expr.referenced_declaration()?)?;
    (target.node_type == "FunctionDefinition").then_some(target.id)
}

/// Base identifiers written by an assignment's left-hand side.
fn write_targets(tree: &AstTree, lhs: NodeId) -> Vec<NodeId> {
    let Some(node) = tree.node(lhs) else {
        return Vec::new();
    };
    match node.node_type.as_str() {
        "IndexAccess" | "IndexRangeAccess" => node
            .child_in("baseExpression")
            .map(|b| write_targets(tree, b))
            .unwrap_or_default(),
        "MemberAccess" => node
            .child_in("expression")
            .map(|b| write_targets(tree, b))
            .unwrap_or_default(),
        "TupleExpression" => node
            .children_in("components")
            .flat_map(|c| write_targets(tree, c))
            .collect(),
        _ => vec![lhs],
    }
}
