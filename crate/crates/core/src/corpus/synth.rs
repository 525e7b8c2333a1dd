//! Synthetic minimal pairs of solc-style compact ASTs.
//!
//! Every pair shares one randomly drawn contract: state variables, a
//! constructor, a handful of benign functions and a public balance-moving
//! function. The defective member performs the balance writes unguarded;
//! the clean member wraps the very same writes in an owner or allowance
//! check. Source text is rendered alongside the AST so every `src` span
//! addresses the matching bytes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{LabeledContract, ManifestRecord, Provenance};
use crate::ast::{parse_ast_json, NodeId};
use crate::error::CorpusError;
use crate::label::Label;

pub const SYNTH_MANIFEST_NAME: &str = "manifest.jsonl";

/// Reference id solc uses for the `msg` global.
const MSG_DECLARATION: NodeId = -15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuardKind {
    /// `if (msg.sender == owner)`
    Owner,
    /// `if (allowed[from][msg.sender] >= amount)`
    Allowance,
}

/// One generated contract before it is parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDocument {
    pub stem: String,
    pub pair: usize,
    pub label: Label,
    pub guard: GuardKind,
    pub contract_name: String,
    pub target_function: String,
    pub source: String,
    pub ast: Value,
}

impl SynthDocument {
    pub fn ast_json(&self) -> String {
        serde_json::to_string_pretty(&self.ast).expect("AST serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Ty {
    Uint,
    Address,
    Bool,
    Map(Box<Ty>, Box<Ty>),
}

impl Ty {
    fn balances() -> Ty {
        Ty::Map(Box::new(Ty::Address), Box::new(Ty::Uint))
    }

    fn allowances() -> Ty {
        Ty::Map(Box::new(Ty::Address), Box::new(Ty::balances()))
    }

    fn identifier(&self) -> String {
        match self {
            Ty::Uint => "t_uint256".into(),
            Ty::Address => "t_address".into(),
            Ty::Bool => "t_bool".into(),
            Ty::Map(k, v) => format!("t_mapping$_{}_$_{}_$", k.identifier(), v.identifier()),
        }
    }

    fn string(&self) -> String {
        match self {
            Ty::Uint => "uint256".into(),
            Ty::Address => "address".into(),
            Ty::Bool => "bool".into(),
            Ty::Map(k, v) => format!("mapping({} => {})", k.string(), v.string()),
        }
    }

    fn descriptions(&self) -> Value {
        json!({"typeIdentifier": self.identifier(), "typeString": self.string()})
    }

    fn value_type(&self) -> Ty {
        match self {
            Ty::Map(_, v) => (**v).clone(),
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Var(String),
    MsgSender,
    Num(u64),
    Index(Box<Expr>, Box<Expr>),
    Bin(Box<Expr>, &'static str, Box<Expr>),
    Call(String, Vec<Expr>),
}

impl Expr {
    fn var(name: &str) -> Expr {
        Expr::Var(name.to_owned())
    }

    fn index(base: Expr, key: Expr) -> Expr {
        Expr::Index(Box::new(base), Box::new(key))
    }

    fn bin(l: Expr, op: &'static str, r: Expr) -> Expr {
        Expr::Bin(Box::new(l), op, Box::new(r))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Stmt {
    Assign(Expr, Expr),
    If(Expr, Vec<Stmt>),
    Return(Expr),
}

#[derive(Debug, Clone, PartialEq)]
struct FnSpec {
    name: String,
    constructor: bool,
    params: Vec<(String, Ty)>,
    returns: Option<Ty>,
    visibility: &'static str,
    mutability: &'static str,
    body: Vec<Stmt>,
}

impl FnSpec {
    fn public(name: &str, params: Vec<(String, Ty)>, body: Vec<Stmt>) -> FnSpec {
        FnSpec {
            name: name.to_owned(),
            constructor: false,
            params,
            returns: None,
            visibility: "public",
            mutability: "nonpayable",
            body,
        }
    }
}

/// A drawn contract; rendering it with and without the guard gives a pair.
#[derive(Debug, Clone)]
struct ContractSpec {
    name: String,
    state: Vec<(String, Ty)>,
    constructor: FnSpec,
    /// Functions in source order; `target` indexes the balance mover.
    functions: Vec<FnSpec>,
    target: usize,
    guard: GuardKind,
    owner: String,
    allowed: String,
    from: String,
    amount: String,
}

const CONTRACT_NAMES: &[&str] = &[
    "Token", "Vault", "Ledger", "Exchange", "Pool", "Treasury", "Market", "Registry",
];
const OWNER_NAMES: &[&str] = &["owner", "admin", "controller", "governor"];
const BALANCE_NAMES: &[&str] = &["balances", "holdings", "accounts", "deposits"];
const ALLOWED_NAMES: &[&str] = &["allowed", "allowance", "approvals", "permits"];
const SUPPLY_NAMES: &[&str] = &["supply", "totalSupply", "reserve", "issued"];
const EXTRA_NAMES: &[&str] = &["fee", "rate", "limit", "cap", "epoch", "nonce"];
const TARGET_NAMES: &[&str] = &[
    "transferFrom",
    "move",
    "shift",
    "sendFrom",
    "moveFunds",
    "relay",
];
const FROM_NAMES: &[&str] = &["from", "src", "payer"];
const TO_NAMES: &[&str] = &["to", "dst", "recipient"];
const AMOUNT_NAMES: &[&str] = &["amount", "value", "wad"];

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).expect("non-empty pool")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_ascii_uppercase().to_string() + c.as_str())
        .unwrap_or_default()
}

fn draw_contract(rng: &mut ChaCha8Rng) -> ContractSpec {
    let name = format!(
        "{}{}",
        pick(rng, CONTRACT_NAMES),
        rng.random_range(1..100u32)
    );
    let owner = pick(rng, OWNER_NAMES).to_owned();
    let balances = pick(rng, BALANCE_NAMES).to_owned();
    let allowed = pick(rng, ALLOWED_NAMES).to_owned();
    let supply = pick(rng, SUPPLY_NAMES).to_owned();
    let n_extra = rng.random_range(0..=2usize);
    let extras: Vec<String> = EXTRA_NAMES
        .choose_multiple(rng, n_extra)
        .map(|s| s.to_string())
        .collect();

    let mut state = vec![
        (owner.clone(), Ty::Address),
        (balances.clone(), Ty::balances()),
        (allowed.clone(), Ty::allowances()),
        (supply.clone(), Ty::Uint),
    ];
    state.extend(extras.iter().map(|e| (e.clone(), Ty::Uint)));

    let mut ctor_body = vec![
        Stmt::Assign(Expr::var(&owner), Expr::MsgSender),
        Stmt::Assign(
            Expr::var(&supply),
            Expr::Num(rng.random_range(1..10u64) * 1000),
        ),
    ];
    for e in &extras {
        ctor_body.push(Stmt::Assign(
            Expr::var(e),
            Expr::Num(rng.random_range(1..100)),
        ));
    }
    let constructor = FnSpec {
        name: String::new(),
        constructor: true,
        params: vec![],
        returns: None,
        visibility: "public",
        mutability: "nonpayable",
        body: ctor_body,
    };

    let from = pick(rng, FROM_NAMES).to_owned();
    let to = pick(rng, TO_NAMES).to_owned();
    let amount = pick(rng, AMOUNT_NAMES).to_owned();
    let entry = |who: &str| Expr::index(Expr::var(&balances), Expr::var(who));
    let target = FnSpec::public(
        pick(rng, TARGET_NAMES),
        vec![
            (from.clone(), Ty::Address),
            (to.clone(), Ty::Address),
            (amount.clone(), Ty::Uint),
        ],
        vec![
            Stmt::Assign(
                entry(&from),
                Expr::bin(entry(&from), "-", Expr::var(&amount)),
            ),
            Stmt::Assign(entry(&to), Expr::bin(entry(&to), "+", Expr::var(&amount))),
        ],
    );

    // Benign functions: getters, a pure helper behind a view, and
    // owner-guarded setters. None of them writes balances.
    let mut functions = Vec::new();
    let mut used = std::collections::HashSet::new();
    let scalars: Vec<String> = std::iter::once(supply.clone())
        .chain(extras.clone())
        .collect();
    for _ in 0..rng.random_range(1..=3usize) {
        match rng.random_range(0..4u8) {
            0 => {
                let var = scalars.choose(rng).expect("supply present").clone();
                let name = format!("get{}", capitalize(&var));
                if used.insert(name.clone()) {
                    functions.push(FnSpec {
                        returns: Some(Ty::Uint),
                        mutability: "view",
                        ..FnSpec::public(&name, vec![], vec![Stmt::Return(Expr::var(&var))])
                    });
                }
            }
            1 => {
                if used.insert("balanceOf".into()) {
                    functions.push(FnSpec {
                        returns: Some(Ty::Uint),
                        mutability: "view",
                        ..FnSpec::public(
                            "balanceOf",
                            vec![("who".into(), Ty::Address)],
                            vec![Stmt::Return(entry("who"))],
                        )
                    });
                }
            }
            2 => {
                if used.insert("scale".into()) {
                    let factor = rng.random_range(2..10u64);
                    functions.push(FnSpec {
                        returns: Some(Ty::Uint),
                        visibility: "internal",
                        mutability: "pure",
                        ..FnSpec::public(
                            "scale",
                            vec![("x".into(), Ty::Uint)],
                            vec![Stmt::Return(Expr::bin(
                                Expr::var("x"),
                                "*",
                                Expr::Num(factor),
                            ))],
                        )
                    });
                    functions.push(FnSpec {
                        returns: Some(Ty::Uint),
                        mutability: "view",
                        ..FnSpec::public(
                            "quote",
                            vec![],
                            vec![Stmt::Return(Expr::Call(
                                "scale".into(),
                                vec![Expr::var(&supply)],
                            ))],
                        )
                    });
                }
            }
            _ => {
                let var = scalars.choose(rng).expect("supply present").clone();
                let name = format!("set{}", capitalize(&var));
                if used.insert(name.clone()) {
                    functions.push(FnSpec::public(
                        &name,
                        vec![("next".into(), Ty::Uint)],
                        vec![Stmt::If(
                            Expr::bin(Expr::MsgSender, "==", Expr::var(&owner)),
                            vec![Stmt::Assign(Expr::var(&var), Expr::var("next"))],
                        )],
                    ));
                }
            }
        }
    }
    // The helper must precede its caller; insert the target anywhere else.
    let target_at = rng.random_range(0..=functions.len());
    functions.insert(target_at, target);

    let guard = if rng.random_bool(0.5) {
        GuardKind::Owner
    } else {
        GuardKind::Allowance
    };
    ContractSpec {
        name,
        state,
        constructor,
        functions,
        target: target_at,
        guard,
        owner,
        allowed,
        from,
        amount,
    }
}

impl ContractSpec {
    fn guard_condition(&self) -> Expr {
        match self.guard {
            GuardKind::Owner => Expr::bin(Expr::MsgSender, "==", Expr::var(&self.owner)),
            GuardKind::Allowance => Expr::bin(
                Expr::index(
                    Expr::index(Expr::var(&self.allowed), Expr::var(&self.from)),
                    Expr::MsgSender,
                ),
                ">=",
                Expr::var(&self.amount),
            ),
        }
    }

    fn render(&self, label: Label) -> (String, Value) {
        let mut functions = self.functions.clone();
        if label == Label::Clean {
            let target = &mut functions[self.target];
            let body = std::mem::take(&mut target.body);
            target.body = vec![Stmt::If(self.guard_condition(), body)];
        }
        let mut e = Emitter::default();
        let ast = e.source_unit(&self.name, &self.state, &self.constructor, &functions);
        (e.src, ast)
    }
}

#[derive(Debug, Clone)]
enum Symbol {
    Var(NodeId, Ty),
    Func(NodeId, Value),
}

/// Writes source text and builds the matching AST nodes in one pass. Ids
/// are handed out as nodes complete, so children get smaller ids than
/// their parents as they do in solc output.
#[derive(Default)]
struct Emitter {
    src: String,
    next_id: NodeId,
    indent: usize,
    scopes: Vec<HashMap<String, Symbol>>,
}

impl Emitter {
    fn pos(&self) -> usize {
        self.src.len()
    }

    fn w(&mut self, s: &str) {
        self.src.push_str(s);
    }

    fn newline(&mut self) {
        self.src.push('\n');
        for _ in 0..self.indent {
            self.src.push_str("    ");
        }
    }

    fn node(&mut self, node_type: &str, start: usize, fields: Vec<(&str, Value)>) -> Value {
        self.next_id += 1;
        let len = self.pos() - start;
        self.node_at(node_type, &format!("{start}:{len}:0"), fields)
    }

    /// Keys are emitted in sorted order, as solc does.
    fn node_at(&mut self, node_type: &str, src: &str, fields: Vec<(&str, Value)>) -> Value {
        let mut all: Vec<(String, Value)> =
            fields.into_iter().map(|(k, v)| (k.to_owned(), v)).collect();
        all.push(("id".into(), json!(self.next_id)));
        all.push(("nodeType".into(), json!(node_type)));
        all.push(("src".into(), json!(src)));
        all.sort_by(|a, b| a.0.cmp(&b.0));
        Value::Object(all.into_iter().collect::<Map<_, _>>())
    }

    fn declare(&mut self, name: &str, symbol: Symbol) {
        self.scopes
            .last_mut()
            .expect("scope open")
            .insert(name.to_owned(), symbol);
    }

    fn lookup(&self, name: &str) -> Symbol {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name))
            .cloned()
            .unwrap_or_else(|| panic!("generator bug: {name} is undeclared"))
    }

    fn type_name(&mut self, ty: &Ty) -> Value {
        let start = self.pos();
        match ty {
            Ty::Map(k, v) => {
                self.w("mapping(");
                let key = self.type_name(k);
                self.w(" => ");
                let value = self.type_name(v);
                self.w(")");
                self.node(
                    "Mapping",
                    start,
                    vec![
                        ("keyName", json!("")),
                        ("keyNameLocation", json!("-1:-1:-1")),
                        ("keyType", key),
                        ("typeDescriptions", ty.descriptions()),
                        ("valueName", json!("")),
                        ("valueNameLocation", json!("-1:-1:-1")),
                        ("valueType", value),
                    ],
                )
            }
            _ => {
                let name = ty.string();
                self.w(&name);
                let mut fields = vec![
                    ("name", json!(name)),
                    ("typeDescriptions", ty.descriptions()),
                ];
                if *ty == Ty::Address {
                    fields.push(("stateMutability", json!("nonpayable")));
                }
                self.node("ElementaryTypeName", start, fields)
            }
        }
    }

    fn variable(&mut self, name: &str, ty: &Ty, state: bool, scope: NodeId) -> Value {
        let start = self.pos();
        let type_name = self.type_name(ty);
        self.w(" ");
        let name_at = self.pos();
        self.w(name);
        let storage = if state || !matches!(ty, Ty::Map(..)) {
            "default"
        } else {
            "storage"
        };
        let node = self.node(
            "VariableDeclaration",
            start,
            vec![
                ("constant", json!(false)),
                ("mutability", json!("mutable")),
                ("name", json!(name)),
                ("nameLocation", json!(format!("{name_at}:{}:0", name.len()))),
                ("scope", json!(scope)),
                ("stateVariable", json!(state)),
                ("storageLocation", json!(storage)),
                ("typeDescriptions", ty.descriptions()),
                ("typeName", type_name),
                ("visibility", json!("internal")),
            ],
        );
        let id = node["id"].as_i64().expect("id");
        self.declare(name, Symbol::Var(id, ty.clone()));
        node
    }

    fn expr_flags(pure: bool) -> Vec<(&'static str, Value)> {
        vec![
            ("isConstant", json!(false)),
            ("isLValue", json!(false)),
            ("isPure", json!(pure)),
            ("lValueRequested", json!(false)),
        ]
    }

    /// Emits `e` and returns its node and static type.
    fn expr(&mut self, e: &Expr, lvalue: bool) -> (Value, Ty) {
        let start = self.pos();
        match e {
            Expr::Var(name) => {
                self.w(name);
                let (id, ty, desc) = match self.lookup(name) {
                    Symbol::Var(id, ty) => {
                        let d = ty.descriptions();
                        (id, ty, d)
                    }
                    Symbol::Func(id, d) => (id, Ty::Uint, d),
                };
                let node = self.node(
                    "Identifier",
                    start,
                    vec![
                        ("name", json!(name)),
                        ("overloadedDeclarations", json!([])),
                        ("referencedDeclaration", json!(id)),
                        ("typeDescriptions", desc),
                    ],
                );
                (node, ty)
            }
            Expr::MsgSender => {
                self.w("msg");
                let msg = self.node(
                    "Identifier",
                    start,
                    vec![
                        ("name", json!("msg")),
                        ("overloadedDeclarations", json!([])),
                        ("referencedDeclaration", json!(MSG_DECLARATION)),
                        (
                            "typeDescriptions",
                            json!({"typeIdentifier": "t_magic_message", "typeString": "msg"}),
                        ),
                    ],
                );
                let member_at = self.pos() + 1;
                self.w(".sender");
                let mut fields = Emitter::expr_flags(false);
                fields.extend([
                    ("expression", msg),
                    ("memberLocation", json!(format!("{member_at}:6:0"))),
                    ("memberName", json!("sender")),
                    ("typeDescriptions", Ty::Address.descriptions()),
                ]);
                (self.node("MemberAccess", start, fields), Ty::Address)
            }
            Expr::Num(n) => {
                let text = n.to_string();
                self.w(&text);
                let mut fields = Emitter::expr_flags(true);
                fields.extend([
                    ("hexValue", json!(hex::encode(text.as_bytes()))),
                    ("kind", json!("number")),
                    (
                        "typeDescriptions",
                        json!({
                            "typeIdentifier": format!("t_rational_{n}_by_1"),
                            "typeString": format!("int_const {n}"),
                        }),
                    ),
                    ("value", json!(text)),
                ]);
                (self.node("Literal", start, fields), Ty::Uint)
            }
            Expr::Index(base, key) => {
                let (b, bty) = self.expr(base, false);
                self.w("[");
                let (k, _) = self.expr(key, false);
                self.w("]");
                let ty = bty.value_type();
                let mut fields = Emitter::expr_flags(false);
                fields[1].1 = json!(true);
                fields[3].1 = json!(lvalue);
                fields.extend([
                    ("baseExpression", b),
                    ("indexExpression", k),
                    ("typeDescriptions", ty.descriptions()),
                ]);
                (self.node("IndexAccess", start, fields), ty)
            }
            Expr::Bin(l, op, r) => {
                let (ln, lty) = self.expr(l, false);
                self.w(&format!(" {op} "));
                let (rn, _) = self.expr(r, false);
                let ty = if matches!(*op, "==" | "!=" | ">=" | "<=" | "<" | ">") {
                    Ty::Bool
                } else {
                    lty.clone()
                };
                let mut fields = Emitter::expr_flags(false);
                fields.extend([
                    ("commonType", lty.descriptions()),
                    ("leftExpression", ln),
                    ("operator", json!(op)),
                    ("rightExpression", rn),
                    ("typeDescriptions", ty.descriptions()),
                ]);
                (self.node("BinaryOperation", start, fields), ty)
            }
            Expr::Call(name, args) => {
                let (callee, _) = self.expr(&Expr::Var(name.clone()), false);
                self.w("(");
                let mut arg_nodes = Vec::new();
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        self.w(", ");
                    }
                    arg_nodes.push(self.expr(a, false).0);
                }
                self.w(")");
                let mut fields = Emitter::expr_flags(false);
                fields.extend([
                    ("arguments", Value::Array(arg_nodes)),
                    ("expression", callee),
                    ("kind", json!("functionCall")),
                    ("nameLocations", json!([])),
                    ("names", json!([])),
                    ("tryCall", json!(false)),
                    ("typeDescriptions", Ty::Uint.descriptions()),
                ]);
                (self.node("FunctionCall", start, fields), Ty::Uint)
            }
        }
    }

    fn statement(&mut self, s: &Stmt, returns: Option<NodeId>) -> Value {
        let start = self.pos();
        match s {
            Stmt::Assign(lhs, rhs) => {
                let (l, ty) = self.expr(lhs, true);
                self.w(" = ");
                let (r, _) = self.expr(rhs, false);
                let mut fields = Emitter::expr_flags(false);
                fields.extend([
                    ("leftHandSide", l),
                    ("operator", json!("=")),
                    ("rightHandSide", r),
                    ("typeDescriptions", ty.descriptions()),
                ]);
                let assignment = self.node("Assignment", start, fields);
                let statement = self.node(
                    "ExpressionStatement",
                    start,
                    vec![("expression", assignment)],
                );
                self.w(";");
                statement
            }
            Stmt::If(cond, body) => {
                self.w("if (");
                let (c, _) = self.expr(cond, false);
                self.w(") ");
                let block = self.block(body, returns);
                self.node(
                    "IfStatement",
                    start,
                    vec![("condition", c), ("trueBody", block)],
                )
            }
            Stmt::Return(e) => {
                self.w("return ");
                let (x, _) = self.expr(e, false);
                let statement = self.node(
                    "Return",
                    start,
                    vec![
                        ("expression", x),
                        (
                            "functionReturnParameters",
                            json!(returns.unwrap_or_default()),
                        ),
                    ],
                );
                self.w(";");
                statement
            }
        }
    }

    fn block(&mut self, body: &[Stmt], returns: Option<NodeId>) -> Value {
        let start = self.pos();
        self.w("{");
        self.indent += 1;
        let mut statements = Vec::new();
        for s in body {
            self.newline();
            statements.push(self.statement(s, returns));
        }
        self.indent -= 1;
        self.newline();
        self.w("}");
        self.node(
            "Block",
            start,
            vec![("statements", Value::Array(statements))],
        )
    }

    fn parameter_list(&mut self, params: &[(String, Ty)], scope: NodeId) -> Value {
        let start = self.pos();
        self.w("(");
        let mut nodes = Vec::new();
        for (i, (name, ty)) in params.iter().enumerate() {
            if i > 0 {
                self.w(", ");
            }
            nodes.push(if name.is_empty() {
                self.variable_unnamed(ty, scope)
            } else {
                self.variable(name, ty, false, scope)
            });
        }
        self.w(")");
        self.node(
            "ParameterList",
            start,
            vec![("parameters", Value::Array(nodes))],
        )
    }

    fn function_type(f: &FnSpec) -> Value {
        let args: Vec<String> = f.params.iter().map(|(_, t)| t.identifier()).collect();
        let ret = f.returns.iter().map(Ty::identifier).collect::<Vec<_>>();
        let strs: Vec<String> = f.params.iter().map(|(_, t)| t.string()).collect();
        let ret_s = f.returns.iter().map(Ty::string).collect::<Vec<_>>();
        json!({
            "typeIdentifier": format!(
                "t_function_internal_{}$_{}_$returns$_{}_$",
                f.mutability,
                args.join("_$_"),
                ret.join("_$_"),
            ),
            "typeString": format!(
                "function ({}) {} returns ({})",
                strs.join(","),
                f.mutability,
                ret_s.join(","),
            ),
        })
    }

    fn function(&mut self, f: &FnSpec, contract_id: NodeId) -> Value {
        let start = self.pos();
        self.scopes.push(HashMap::new());
        let name_at;
        if f.constructor {
            name_at = self.pos();
            self.w("constructor");
        } else {
            self.w("function ");
            name_at = self.pos();
            self.w(&f.name);
        }
        let params = self.parameter_list(&f.params, contract_id);
        if !f.constructor {
            self.w(" ");
            self.w(f.visibility);
        }
        if f.mutability != "nonpayable" {
            self.w(" ");
            self.w(f.mutability);
        }
        let returns = match &f.returns {
            Some(ty) => {
                self.w(" returns ");
                let list = self.parameter_list(&[(String::new(), ty.clone())], contract_id);
                self.w(" ");
                list
            }
            None => {
                self.w(" ");
                let at = self.pos();
                self.next_id += 1;
                self.node_at(
                    "ParameterList",
                    &format!("{at}:0:0"),
                    vec![("parameters", json!([]))],
                )
            }
        };
        let returns_id = returns["id"].as_i64();
        let body = self.block(&f.body, returns_id);
        self.scopes.pop();
        let name_len = if f.constructor { 11 } else { f.name.len() };
        let node = self.node(
            "FunctionDefinition",
            start,
            vec![
                ("body", body),
                ("implemented", json!(true)),
                (
                    "kind",
                    json!(if f.constructor {
                        "constructor"
                    } else {
                        "function"
                    }),
                ),
                ("modifiers", json!([])),
                ("name", json!(f.name)),
                ("nameLocation", json!(format!("{name_at}:{name_len}:0"))),
                ("parameters", params),
                ("returnParameters", returns),
                ("scope", json!(contract_id)),
                ("stateMutability", json!(f.mutability)),
                ("virtual", json!(false)),
                ("visibility", json!(f.visibility)),
            ],
        );
        if !f.constructor {
            let id = node["id"].as_i64().expect("id");
            let ty = Emitter::function_type(f);
            self.declare(&f.name, Symbol::Func(id, ty));
        }
        node
    }

    fn variable_unnamed(&mut self, ty: &Ty, scope: NodeId) -> Value {
        let start = self.pos();
        let type_name = self.type_name(ty);
        self.node(
            "VariableDeclaration",
            start,
            vec![
                ("constant", json!(false)),
                ("mutability", json!("mutable")),
                ("name", json!("")),
                ("nameLocation", json!("-1:-1:-1")),
                ("scope", json!(scope)),
                ("stateVariable", json!(false)),
                ("storageLocation", json!("default")),
                ("typeDescriptions", ty.descriptions()),
                ("typeName", type_name),
                ("visibility", json!("internal")),
            ],
        )
    }

    fn source_unit(
        &mut self,
        name: &str,
        state: &[(String, Ty)],
        constructor: &FnSpec,
        functions: &[FnSpec],
    ) -> Value {
        self.w("// SPDX-License-Identifier: MIT\n");
        let pragma_at = self.pos();
        self.w("pragma solidity ^0.8.0;");
        let pragma = self.node(
            "PragmaDirective",
            pragma_at,
            vec![("literals", json!(["solidity", "^", "0.8", ".0"]))],
        );
        self.w("\n\n");

        // The contract id is needed for `scope` before the contract node
        // exists, so it is reserved up front by counting: every id below is
        // assigned afterwards and the contract takes the next one.
        let contract_at = self.pos();
        self.w("contract ");
        let name_at = self.pos();
        self.w(name);
        self.w(" {");
        self.indent += 1;
        self.scopes.push(HashMap::new());
        let contract_id = -1;
        let mut members = Vec::new();
        for (var, ty) in state {
            self.newline();
            members.push(self.variable(var, ty, true, contract_id));
            self.w(";");
        }
        self.src.push('\n');
        self.newline();
        members.push(self.function(constructor, contract_id));
        for f in functions {
            self.src.push('\n');
            self.newline();
            members.push(self.function(f, contract_id));
        }
        self.scopes.pop();
        self.indent -= 1;
        self.newline();
        self.w("}");
        let mut contract = self.node(
            "ContractDefinition",
            contract_at,
            vec![
                ("abstract", json!(false)),
                ("baseContracts", json!([])),
                ("canonicalName", json!(name)),
                ("contractDependencies", json!([])),
                ("contractKind", json!("contract")),
                ("fullyImplemented", json!(true)),
                ("linearizedBaseContracts", json!([])),
                ("name", json!(name)),
                ("nameLocation", json!(format!("{name_at}:{}:0", name.len()))),
                ("nodes", Value::Array(members)),
                ("usedErrors", json!([])),
                ("usedEvents", json!([])),
            ],
        );
        let cid = contract["id"].clone();
        contract["linearizedBaseContracts"] = json!([cid]);
        fix_scope(&mut contract, &cid);
        self.w("\n");
        let end = self.pos();
        self.next_id += 1;
        let unit_id = self.next_id;
        contract["scope"] = json!(unit_id);
        let mut unit = self.node_at(
            "SourceUnit",
            &format!("{pragma_at}:{}:0", end - pragma_at),
            vec![
                ("absolutePath", json!(format!("{name}.sol"))),
                ("exportedSymbols", json!({ name: [cid] })),
                ("license", json!("MIT")),
                ("nodes", json!([pragma, contract])),
            ],
        );
        sort_keys(&mut unit);
        unit
    }
}

/// Replaces the placeholder contract scope once the contract id is known.
fn fix_scope(v: &mut Value, id: &Value) {
    match v {
        Value::Object(o) => {
            if o.get("scope") == Some(&json!(-1)) {
                o.insert("scope".into(), id.clone());
            }
            for x in o.values_mut() {
                fix_scope(x, id);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| fix_scope(x, id)),
        _ => {}
    }
}

fn sort_keys(v: &mut Value) {
    match v {
        Value::Object(o) => {
            let mut entries: Vec<(String, Value)> = std::mem::take(o).into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            for (k, mut x) in entries {
                sort_keys(&mut x);
                o.insert(k, x);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(sort_keys),
        _ => {}
    }
}

/// Draws `n_pairs` contracts and renders each as a defective/clean pair.
pub fn synth_documents(n_pairs: usize, seed: u64) -> Vec<SynthDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(2 * n_pairs);
    for pair in 0..n_pairs {
        let spec = draw_contract(&mut rng);
        for label in [Label::Defective, Label::Clean] {
            let (source, ast) = spec.render(label);
            docs.push(SynthDocument {
                stem: format!("pair_{pair:03}_{label}"),
                pair,
                label,
                guard: spec.guard,
                contract_name: spec.name.clone(),
                target_function: spec.functions[spec.target].name.clone(),
                source,
                ast,
            });
        }
    }
    docs
}

/// [`synth_documents`] parsed into labeled contracts.
pub fn synth_generate(n_pairs: usize, seed: u64) -> Vec<LabeledContract> {
    synth_documents(n_pairs, seed)
        .into_iter()
        .map(|d| LabeledContract {
            path: PathBuf::from(format!("{}.ast.json", d.stem)),
            tree: parse_ast_json(&d.ast_json()).expect("generated AST parses"),
            label: d.label,
            provenance: Provenance::Synthetic,
            source: Some(d.source),
        })
        .collect()
}

/// Writes `<stem>.ast.json`, `<stem>.sol`, a manifest and a README into
/// `dir`, returning the manifest path.
pub fn write_fixtures(dir: &Path, docs: &[SynthDocument]) -> Result<PathBuf, CorpusError> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    let mut readme = String::from(
        "# Synthetic minimal pairs\n\n\
         Each pair shares one contract. In the defective member a public function\n\
         moves balances with no access check; the clean member wraps the same writes\n\
         in a guard. Everything else, including names, is identical within a pair.\n\n\
         | pair | contract | function | guard in clean member |\n\
         |------|----------|----------|-----------------------|\n",
    );
    for d in docs {
        let ast_name = format!("{}.ast.json", d.stem);
        let sol_name = format!("{}.sol", d.stem);
        fs::write(dir.join(&ast_name), d.ast_json())?;
        fs::write(dir.join(&sol_name), &d.source)?;
        let record = ManifestRecord {
            ast_path: ast_name,
            label: d.label.to_string(),
            source_path: Some(sol_name),
            provenance: Some(Provenance::Synthetic),
        };
        manifest.push_str(&serde_json::to_string(&record).expect("record serializes"));
        manifest.push('\n');
        if d.label == Label::Defective {
            let guard = match d.guard {
                GuardKind::Owner => "msg.sender == owner",
                GuardKind::Allowance => "allowance >= amount",
            };
            let _ = writeln!(
                readme,
                "| {:03} | {} | {} | `{}` |",
                d.pair, d.contract_name, d.target_function, guard
            );
        }
    }
    let manifest_path = dir.join(SYNTH_MANIFEST_NAME);
    fs::write(&manifest_path, manifest)?;
    fs::write(dir.join("README.md"), readme)?;
    Ok(manifest_path)
}
