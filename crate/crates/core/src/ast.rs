//! Ingestion of compiler-emitted compact AST JSON.
//!
//! Every JSON object carrying a `"nodeType"` becomes one [`AstNode`]. Scalar
//! fields become string attributes, plain objects are flattened into dotted
//! attribute keys (`typeDescriptions.typeIdentifier`), and nested node objects
//! become children tagged with the field path they were found under
//! (`"nodes[]"`, `"body"`, `"leftHandSide"`).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::AstError;

pub type NodeId = i64;

/// `offset:length:file` byte range into a source unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SrcSpan {
    pub offset: i64,
    pub length: i64,
    pub file: i64,
}

impl SrcSpan {
    pub fn new(offset: i64, length: i64, file: i64) -> Self {
        SrcSpan {
            offset,
            length,
            file,
        }
    }

    pub fn parse(text: &str) -> Option<SrcSpan> {
        let mut parts = text.split(':');
        let offset = parts.next()?.parse().ok()?;
        let length = parts.next()?.parse().ok()?;
        let file = match parts.next() {
            Some(f) => f.parse().ok()?,
            None => 0,
        };
        if parts.next().is_some() {
            return None;
        }
        Some(SrcSpan::new(offset, length, file))
    }
}

impl fmt::Display for SrcSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.offset, self.length, self.file)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstNode {
    pub id: NodeId,
    pub node_type: String,
    pub name: Option<String>,
    pub attributes: BTreeMap<String, String>,
    pub src_span: Option<SrcSpan>,
    pub children: Vec<NodeId>,
    /// Field path each child was found under, parallel to `children`.
    /// Array members carry a trailing `[]`.
    pub child_roles: Vec<String>,
}

impl AstNode {
    pub fn new(id: NodeId, node_type: impl Into<String>) -> Self {
        AstNode {
            id,
            node_type: node_type.into(),
            name: None,
            attributes: BTreeMap::new(),
            src_span: None,
            children: Vec::new(),
            child_roles: Vec::new(),
        }
    }

    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attributes.get(key).map(String::as_str)
    }

    pub fn push_child(&mut self, id: NodeId, role: impl Into<String>) {
        self.children.push(id);
        self.child_roles.push(role.into());
    }

    /// Children paired with the field they came from, `[]` suffix stripped.
    pub fn children_with_roles(&self) -> impl Iterator<Item = (NodeId, &str)> + '_ {
        self.children.iter().copied().zip(
            self.child_roles
                .iter()
                .map(|r| r.strip_suffix("[]").unwrap_or(r)),
        )
    }

    pub fn children_in(&self, field: &str) -> impl Iterator<Item = NodeId> + '_ {
        let field = field.to_owned();
        self.children_with_roles()
            .filter(move |(_, r)| *r == field)
            .map(|(id, _)| id)
    }

    pub fn child_in(&self, field: &str) -> Option<NodeId> {
        self.children_in(field).next()
    }

    /// `referencedDeclaration`, when it parses as an id.
    pub fn referenced_declaration(&self) -> Option<NodeId> {
        self.attr("referencedDeclaration")?.parse().ok()
    }
}

/// Dialect adapters understood by [`parse_ast_json`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AstDialect {
    /// `solc --ast-compact-json` / standard-JSON `ast` output (0.5 and later).
    CompactV1,
}

impl AstDialect {
    pub fn tag(self) -> &'static str {
        match self {
            AstDialect::CompactV1 => "compact-v1",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AstTree {
    pub root_id: NodeId,
    pub source_unit: String,
    pub compiler_version: String,
    pub dialect: AstDialect,
    nodes: Vec<AstNode>,
    index: HashMap<NodeId, usize>,
}

impl AstTree {
    /// Assembles a tree without checking invariants; see [`validate_tree`].
    pub fn from_nodes(root_id: NodeId, nodes: Vec<AstNode>) -> Self {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            index.entry(n.id).or_insert(i);
        }
        AstTree {
            root_id,
            source_unit: String::new(),
            compiler_version: String::new(),
            dialect: AstDialect::CompactV1,
            nodes,
            index,
        }
    }

    pub fn node(&self, id: NodeId) -> Option<&AstNode> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn root(&self) -> Option<&AstNode> {
        self.node(self.root_id)
    }

    pub fn nodes(&self) -> &[AstNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node ids in depth-first preorder from the root. Each id is visited
    /// once, so malformed (cyclic) trees still terminate.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut seen = HashSet::new();
        let mut stack = vec![self.root_id];
        while let Some(id) = stack.pop() {
            let Some(node) = self.node(id) else { continue };
            if !seen.insert(id) {
                continue;
            }
            out.push(id);
            stack.extend(node.children.iter().rev().copied());
        }
        out
    }

    /// Preorder of the subtree rooted at `id` (inclusive).
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![id];
        while let Some(id) = stack.pop() {
            let Some(node) = self.node(id) else { continue };
            if !seen.insert(id) {
                continue;
            }
            out.push(id);
            stack.extend(node.children.iter().rev().copied());
        }
        out
    }

    pub fn parents(&self) -> HashMap<NodeId, NodeId> {
        let mut parents = HashMap::with_capacity(self.nodes.len());
        for &i in self.index.values() {
            let n = &self.nodes[i];
            for &c in &n.children {
                parents.entry(c).or_insert(n.id);
            }
        }
        parents
    }

    /// Serializes back to the compact schema.
    pub fn to_json_value(&self) -> Value {
        self.node_to_json(self.root_id, &mut HashSet::new())
            .unwrap_or(Value::Null)
    }

    pub fn to_json_string(&self) -> String {
        self.to_json_value().to_string()
    }

    fn node_to_json(&self, id: NodeId, seen: &mut HashSet<NodeId>) -> Option<Value> {
        let node = self.node(id)?;
        if !seen.insert(id) {
            return None;
        }
        let mut obj = Map::new();
        obj.insert("id".into(), Value::from(node.id));
        obj.insert("nodeType".into(), Value::from(node.node_type.clone()));
        if let Some(span) = node.src_span {
            obj.insert("src".into(), Value::from(span.to_string()));
        }
        for (k, v) in &node.attributes {
            obj.insert(k.clone(), Value::from(v.clone()));
        }
        for (&child, role) in node.children.iter().zip(&node.child_roles) {
            if let Some(value) = self.node_to_json(child, seen) {
                insert_at_role(&mut obj, role, value);
            }
        }
        Some(Value::Object(obj))
    }
}

fn insert_at_role(obj: &mut Map<String, Value>, role: &str, value: Value) {
    let (head, rest) = match role.split_once('.') {
        Some((h, r)) => (h, Some(r)),
        None => (role, None),
    };
    match (head.strip_suffix("[]"), rest) {
        (Some(field), None) => {
            let slot = obj
                .entry(field.to_owned())
                .or_insert_with(|| Value::Array(Vec::new()));
            if let Value::Array(items) = slot {
                items.push(value);
            }
        }
        (None, None) => {
            obj.insert(head.to_owned(), value);
        }
        (Some(field), Some(rest)) => {
            let mut inner = Map::new();
            insert_at_role(&mut inner, rest, value);
            let slot = obj
                .entry(field.to_owned())
                .or_insert_with(|| Value::Array(Vec::new()));
            if let Value::Array(items) = slot {
                items.push(Value::Object(inner));
            }
        }
        (None, Some(rest)) => {
            let slot = obj
                .entry(head.to_owned())
                .or_insert_with(|| Value::Object(Map::new()));
            if let Value::Object(inner) = slot {
                insert_at_role(inner, rest, value);
            }
        }
    }
}

/// Parses one compact AST document (optionally wrapped as `{"ast": {...}}`).
pub fn parse_ast_json(document: &str) -> Result<AstTree, AstError> {
    if document.trim().is_empty() {
        return Err(AstError::EmptyDocument);
    }
    let value: Value = serde_json::from_str(document).map_err(|e| AstError::MalformedJson {
        offset: byte_offset(document, e.line(), e.column()),
        message: e.to_string(),
    })?;
    parse_ast_value(&value)
}

pub fn parse_ast_value(value: &Value) -> Result<AstTree, AstError> {
    let Value::Object(top) = value else {
        return Err(AstError::schema("$", "root is not an object"));
    };
    let (root, compiler_version) = match top.get("nodeType") {
        Some(_) => (top, String::new()),
        None => match top.get("ast") {
            Some(Value::Object(inner)) if inner.contains_key("nodeType") => {
                let version = top
                    .get("compilerVersion")
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_owned();
                (inner, version)
            }
            _ => return Err(AstError::schema("$", "missing nodeType")),
        },
    };

    let mut walker = Walker::default();
    let root_id = walker.visit_node(root, "$")?;
    let mut tree = AstTree::from_nodes(root_id, walker.nodes);
    tree.compiler_version = compiler_version;
    tree.source_unit = root
        .get("absolutePath")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_owned();
    Ok(tree)
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn is_node(v: &Value) -> bool {
    matches!(v, Value::Object(o) if o.contains_key("nodeType") && !is_opaque(o))
}

/// Yul subtrees carry no node ids; they are kept verbatim as an attribute.
fn is_opaque(o: &Map<String, Value>) -> bool {
    !o.contains_key("id")
        && o.get("nodeType")
            .and_then(Value::as_str)
            .is_some_and(|t| t.starts_with("Yul"))
}

fn contains_node(v: &Value) -> bool {
    match v {
        Value::Object(o) => is_node(v) || o.values().any(contains_node),
        Value::Array(items) => items.iter().any(contains_node),
        _ => false,
    }
}

#[derive(Default)]
struct Walker {
    nodes: Vec<AstNode>,
    seen: HashSet<NodeId>,
}

impl Walker {
    fn visit_node(&mut self, obj: &Map<String, Value>, path: &str) -> Result<NodeId, AstError> {
        let id = obj
            .get("id")
            .and_then(Value::as_i64)
            .ok_or_else(|| AstError::schema(path, "missing integer \"id\""))?;
        let node_type = obj
            .get("nodeType")
            .and_then(Value::as_str)
            .ok_or_else(|| AstError::schema(path, "missing string \"nodeType\""))?;
        if !self.seen.insert(id) {
            return Err(AstError::schema(path, format!("duplicate id {id}")));
        }

        let mut node = AstNode::new(id, node_type);
        if let Some(src) = obj.get("src") {
            let span = src
                .as_str()
                .and_then(SrcSpan::parse)
                .ok_or_else(|| AstError::schema(path, format!("bad src {src}")))?;
            if span.offset < 0 || span.length < 0 {
                return Err(AstError::schema(path, format!("negative src {span}")));
            }
            node.src_span = Some(span);
        }

        let slot = self.nodes.len();
        self.nodes.push(node);
        let mut children = Vec::new();
        let mut attributes = BTreeMap::new();
        for (key, value) in obj {
            if matches!(key.as_str(), "id" | "nodeType" | "src") {
                continue;
            }
            self.visit_field(key, value, path, &mut children, &mut attributes)?;
        }

        let node = &mut self.nodes[slot];
        node.name = attributes.get("name").cloned();
        node.attributes = attributes;
        for (child, role) in children {
            node.push_child(child, role);
        }
        Ok(id)
    }

    fn visit_field(
        &mut self,
        role: &str,
        value: &Value,
        path: &str,
        children: &mut Vec<(NodeId, String)>,
        attributes: &mut BTreeMap<String, String>,
    ) -> Result<(), AstError> {
        let here = format!("{path}.{}", role.trim_end_matches("[]"));
        match value {
            Value::Null => {}
            Value::String(s) => {
                attributes.insert(role.to_owned(), s.clone());
            }
            Value::Bool(_) | Value::Number(_) => {
                attributes.insert(role.to_owned(), value.to_string());
            }
            Value::Object(o) if is_node(value) => {
                let id = self.visit_node(o, &here)?;
                children.push((id, role.to_owned()));
            }
            Value::Object(o) if contains_node(value) => {
                for (k, v) in o {
                    self.visit_field(&format!("{role}.{k}"), v, &here, children, attributes)?;
                }
            }
            Value::Object(o) if is_opaque(o) => {
                attributes.insert(role.to_owned(), value.to_string());
            }
            Value::Object(o) => flatten_plain(role, o, attributes),
            Value::Array(items) if contains_node(value) => {
                let item_role = format!("{role}[]");
                for (i, item) in items.iter().enumerate() {
                    let item_path = format!("{here}[{i}]");
                    match item {
                        Value::Object(o) if is_node(item) => {
                            let id = self.visit_node(o, &item_path)?;
                            children.push((id, item_role.clone()));
                        }
                        Value::Object(o) => {
                            for (k, v) in o {
                                if contains_node(v) {
                                    self.visit_field(
                                        &format!("{item_role}.{k}"),
                                        v,
                                        &item_path,
                                        children,
                                        attributes,
                                    )?;
                                }
                            }
                        }
                        _ => {}
                    }
                }
            }
            Value::Array(_) => {
                attributes.insert(role.to_owned(), value.to_string());
            }
        }
        Ok(())
    }
}

fn flatten_plain(prefix: &str, obj: &Map<String, Value>, out: &mut BTreeMap<String, String>) {
    if obj.is_empty() {
        out.insert(prefix.to_owned(), "{}".to_owned());
        return;
    }
    for (k, v) in obj {
        let key = format!("{prefix}.{k}");
        match v {
            Value::Null => {}
            Value::String(s) => {
                out.insert(key, s.clone());
            }
            Value::Object(inner) if !is_opaque(inner) => flatten_plain(&key, inner, out),
            other => {
                out.insert(key, other.to_string());
            }
        }
    }
}

/// One invariant violation found by [`validate_tree`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub node_id: NodeId,
    pub kind: DiagnosticKind,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    MissingRoot,
    DuplicateId,
    DanglingChild,
    MultipleParents,
    RootHasParent,
    Unreachable,
    NegativeSpan,
    RoleMismatch,
}

impl Diagnostic {
    fn new(node_id: NodeId, kind: DiagnosticKind, reason: String) -> Self {
        Diagnostic {
            node_id,
            kind,
            reason,
        }
    }
}

/// Checks every tree invariant; an empty result means the tree is well formed.
pub fn validate_tree(tree: &AstTree) -> Vec<Diagnostic> {
    use DiagnosticKind::*;

    let mut diags = Vec::new();
    let mut first_seen = HashSet::new();
    for node in tree.nodes() {
        if !first_seen.insert(node.id) {
            diags.push(Diagnostic::new(
                node.id,
                DuplicateId,
                format!("duplicate id {}", node.id),
            ));
        }
        if let Some(span) = node.src_span {
            if span.offset < 0 || span.length < 0 {
                diags.push(Diagnostic::new(
                    node.id,
                    NegativeSpan,
                    format!("negative source span {span}"),
                ));
            }
        }
        if node.children.len() != node.child_roles.len() {
            diags.push(Diagnostic::new(
                node.id,
                RoleMismatch,
                format!(
                    "{} children but {} roles",
                    node.children.len(),
                    node.child_roles.len()
                ),
            ));
        }
    }

    if tree.root().is_none() {
        diags.push(Diagnostic::new(
            tree.root_id,
            MissingRoot,
            format!("root id {} does not exist", tree.root_id),
        ));
        return diags;
    }

    let mut parent_of: HashMap<NodeId, NodeId> = HashMap::new();
    let mut owners = HashSet::new();
    for node in tree.nodes() {
        // Duplicates are already reported; only the first occurrence owns children.
        if !owners.insert(node.id) {
            continue;
        }
        for &child in &node.children {
            if tree.node(child).is_none() {
                diags.push(Diagnostic::new(
                    node.id,
                    DanglingChild,
                    format!("dangling child {child}"),
                ));
                continue;
            }
            if child == tree.root_id {
                diags.push(Diagnostic::new(
                    child,
                    RootHasParent,
                    format!("root is listed as a child of {}", node.id),
                ));
                continue;
            }
            if let Some(prev) = parent_of.insert(child, node.id) {
                diags.push(Diagnostic::new(
                    child,
                    MultipleParents,
                    format!("child of both {prev} and {}", node.id),
                ));
            }
        }
    }

    let reachable: HashSet<NodeId> = tree.preorder().into_iter().collect();
    let mut reported = HashSet::new();
    for node in tree.nodes() {
        if !reachable.contains(&node.id) && reported.insert(node.id) {
            diags.push(Diagnostic::new(
                node.id,
                Unreachable,
                "not reachable from root".to_owned(),
            ));
        }
    }
    diags
}

/// Returns the exact source bytes addressed by a node's span.
pub fn span_to_source<'a>(
    tree: &AstTree,
    node_id: NodeId,
    source_text: &'a str,
) -> Result<&'a str, AstError> {
    let node = tree.node(node_id).ok_or(AstError::UnknownNode(node_id))?;
    let span = node
        .src_span
        .ok_or(AstError::MissingSpan { node: node_id })?;
    let out_of_bounds = || AstError::OutOfBounds {
        node: node_id,
        offset: span.offset,
        length: span.length,
        source_len: source_text.len(),
    };
    let start = usize::try_from(span.offset).map_err(|_| out_of_bounds())?;
    let len = usize::try_from(span.length).map_err(|_| out_of_bounds())?;
    let end = start.checked_add(len).ok_or_else(out_of_bounds)?;
    source_text.get(start..end).ok_or_else(out_of_bounds)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "id": 2, "nodeType": "SourceUnit", "src": "0:13:0",
        "nodes": [{"id": 1, "nodeType": "ContractDefinition", "name": "C", "src": "0:13:0", "nodes": []}]
    }"#;

    fn two_node_tree() -> AstTree {
        let mut root = AstNode::new(1, "SourceUnit");
        root.push_child(2, "nodes[]");
        AstTree::from_nodes(1, vec![root, AstNode::new(2, "ContractDefinition")])
    }

    #[test]
    fn minimal_document_has_two_nodes() {
        let tree = parse_ast_json(MINIMAL).unwrap();
        assert_eq!(tree.len(), 2);
        assert_eq!(tree.root().unwrap().node_type, "SourceUnit");
        let contract = tree.node(1).unwrap();
        assert_eq!(contract.name.as_deref(), Some("C"));
        assert!(validate_tree(&tree).is_empty());
    }

    #[test]
    fn empty_object_is_a_schema_violation() {
        assert!(matches!(
            parse_ast_json("{}"),
            Err(AstError::SchemaViolation { .. })
        ));
    }

    #[test]
    fn blank_input_is_empty_document() {
        assert!(matches!(
            parse_ast_json("  \n"),
            Err(AstError::EmptyDocument)
        ));
    }

    #[test]
    fn syntax_error_reports_byte_offset() {
        let doc = "{\"id\": 1,\n \"nodeType\": }";
        match parse_ast_json(doc) {
            Err(AstError::MalformedJson { offset, .. }) => {
                assert!(offset > 10 && offset <= doc.len(), "offset {offset}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let doc = r#"{"id": 1, "nodeType": "A", "nodes": [{"id": 1, "nodeType": "B"}]}"#;
        assert!(matches!(
            parse_ast_json(doc),
            Err(AstError::SchemaViolation { .. })
        ));
    }

    #[test]
    fn negative_src_is_rejected() {
        let doc = r#"{"id": 1, "nodeType": "A", "src": "-1:3:0"}"#;
        assert!(parse_ast_json(doc).is_err());
    }

    #[test]
    fn nested_plain_objects_flatten_to_dotted_keys() {
        let doc = r#"{"id": 1, "nodeType": "Identifier", "name": "x",
            "typeDescriptions": {"typeIdentifier": "t_uint256", "typeString": "uint256"},
            "referencedDeclaration": 12, "overloadedDeclarations": []}"#;
        let tree = parse_ast_json(doc).unwrap();
        let n = tree.root().unwrap();
        assert_eq!(n.attr("typeDescriptions.typeIdentifier"), Some("t_uint256"));
        assert_eq!(n.referenced_declaration(), Some(12));
        assert_eq!(n.attr("overloadedDeclarations"), Some("[]"));
    }

    #[test]
    fn yul_blocks_are_kept_opaque() {
        let doc = r#"{"id": 1, "nodeType": "InlineAssembly",
            "AST": {"nodeType": "YulBlock", "src": "0:2:0", "statements": []}}"#;
        let tree = parse_ast_json(doc).unwrap();
        assert_eq!(tree.len(), 1);
        assert!(tree.root().unwrap().attr("AST").is_some());
    }

    #[test]
    fn ast_wrapper_is_unwrapped() {
        let doc = format!(r#"{{"compilerVersion": "0.8.26", "ast": {MINIMAL}}}"#);
        let tree = parse_ast_json(&doc).unwrap();
        assert_eq!(tree.len(), 2);
        assert_eq!(tree.compiler_version, "0.8.26");
    }

    #[test]
    fn valid_tree_has_no_diagnostics() {
        assert!(validate_tree(&two_node_tree()).is_empty());
    }

    #[test]
    fn dangling_child_is_reported_once() {
        let mut root = AstNode::new(1, "SourceUnit");
        root.push_child(99, "nodes[]");
        let diags = validate_tree(&AstTree::from_nodes(1, vec![root]));
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::DanglingChild);
        assert_eq!(diags[0].node_id, 1);
    }

    #[test]
    fn duplicate_id_is_reported_once() {
        let mut root = AstNode::new(1, "SourceUnit");
        root.push_child(7, "nodes[]");
        let tree = AstTree::from_nodes(1, vec![root, AstNode::new(7, "A"), AstNode::new(7, "B")]);
        let diags = validate_tree(&tree);
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert_eq!(diags[0].kind, DiagnosticKind::DuplicateId);
        assert_eq!(diags[0].node_id, 7);
    }

    #[test]
    fn cycles_and_orphans_are_reported() {
        let mut root = AstNode::new(1, "R");
        root.push_child(2, "a");
        let mut a = AstNode::new(2, "A");
        a.push_child(1, "back");
        let orphan = AstNode::new(3, "O");
        let diags = validate_tree(&AstTree::from_nodes(1, vec![root, a, orphan]));
        let kinds: Vec<_> = diags.iter().map(|d| d.kind).collect();
        assert!(kinds.contains(&DiagnosticKind::RootHasParent));
        assert!(kinds.contains(&DiagnosticKind::Unreachable));
    }

    #[test]
    fn span_slices_exact_bytes() {
        let mut root = AstNode::new(1, "ContractDefinition");
        root.src_span = Some(SrcSpan::new(0, 8, 0));
        let tree = AstTree::from_nodes(1, vec![root]);
        assert_eq!(
            span_to_source(&tree, 1, "contract C {}").unwrap(),
            "contract"
        );
    }

    #[test]
    fn span_outside_source_is_out_of_bounds() {
        let mut root = AstNode::new(1, "X");
        root.src_span = Some(SrcSpan::new(1000, 5, 0));
        let tree = AstTree::from_nodes(1, vec![root]);
        assert!(matches!(
            span_to_source(&tree, 1, "0123456789"),
            Err(AstError::OutOfBounds { .. })
        ));
        assert!(matches!(
            span_to_source(&tree, 2, "0123456789"),
            Err(AstError::UnknownNode(2))
        ));
    }

    #[test]
    fn role_paths_round_trip_through_json() {
        let doc = r#"{"id": 1, "nodeType": "ImportDirective",
            "symbolAliases": [{"foreign": {"id": 2, "nodeType": "Identifier", "name": "A"}, "local": "B"}],
            "body": {"id": 3, "nodeType": "Block", "statements": [{"id": 4, "nodeType": "Return"}]}}"#;
        let tree = parse_ast_json(doc).unwrap();
        assert_eq!(tree.len(), 4);
        let again = parse_ast_json(&tree.to_json_string()).unwrap();
        assert_eq!(again.nodes(), tree.nodes());
    }
}
