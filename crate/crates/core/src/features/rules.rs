//! Text-format rule table mapping AST nodes onto dependency categories.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DependencyCategory;
use crate::ast::AstNode;
use crate::error::RuleError;

/// The rule table shipped with the crate.
pub const DEFAULT_RULES: &str = include_str!("../../rules/default.rules");

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TypePattern {
    Any,
    Exact(String),
    Prefix(String),
}

impl TypePattern {
    pub fn matches(&self, node_type: &str) -> bool {
        match self {
            TypePattern::Any => true,
            TypePattern::Exact(t) => t == node_type,
            TypePattern::Prefix(p) => node_type.starts_with(p.as_str()),
        }
    }
}

impl FromStr for TypePattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "*" {
            return Ok(TypePattern::Any);
        }
        match s.strip_suffix('*') {
            Some(p) if p.contains('*') => Err(format!("unsupported pattern {s:?}")),
            Some(p) => Ok(TypePattern::Prefix(p.to_owned())),
            None if s.contains('*') => Err(format!("unsupported pattern {s:?}")),
            None => Ok(TypePattern::Exact(s.to_owned())),
        }
    }
}

impl fmt::Display for TypePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypePattern::Any => f.write_str("*"),
            TypePattern::Exact(t) => f.write_str(t),
            TypePattern::Prefix(p) => write!(f, "{p}*"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    Equals(String, String),
    NotEquals(String, String),
    StartsWith(String, String),
    Present(String),
    Absent(String),
}

impl Condition {
    fn holds(&self, node: &AstNode) -> bool {
        match self {
            Condition::Equals(k, v) => node.attr(k) == Some(v.as_str()),
            Condition::NotEquals(k, v) => node.attr(k) != Some(v.as_str()),
            Condition::StartsWith(k, p) => node.attr(k).is_some_and(|a| a.starts_with(p.as_str())),
            Condition::Present(k) => node.attr(k).is_some(),
            Condition::Absent(k) => node.attr(k).is_none(),
        }
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = |k: &str| {
            if k.is_empty() {
                Err(format!("empty attribute name in {s:?}"))
            } else {
                Ok(k.to_owned())
            }
        };
        if let Some(k) = s.strip_prefix('!').and_then(|r| r.strip_suffix('?')) {
            return Ok(Condition::Absent(key(k)?));
        }
        if let Some(k) = s.strip_suffix('?') {
            return Ok(Condition::Present(key(k)?));
        }
        if let Some((k, v)) = s.split_once("!=") {
            return Ok(Condition::NotEquals(key(k)?, v.to_owned()));
        }
        if let Some((k, v)) = s.split_once("^=") {
            return Ok(Condition::StartsWith(key(k)?, v.to_owned()));
        }
        if let Some((k, v)) = s.split_once('=') {
            return Ok(Condition::Equals(key(k)?, v.to_owned()));
        }
        Err(format!("cannot parse condition {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub pattern: TypePattern,
    pub conditions: Vec<Condition>,
    /// `None` marks an explicit "leave uncategorized" rule.
    pub category: Option<DependencyCategory>,
}

impl Rule {
    fn matches(&self, node: &AstNode) -> bool {
        self.pattern.matches(&node.node_type) && self.conditions.iter().all(|c| c.holds(node))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTable {
    rules: Vec<Rule>,
}

impl RuleTable {
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |reason: String| RuleError::Syntax {
                line: i + 1,
                reason,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [pattern, predicate, category] = fields[..] else {
                return Err(syntax(format!("expected 3 fields, found {}", fields.len())));
            };
            let pattern = pattern.parse().map_err(syntax)?;
            let conditions = if predicate == "*" {
                Vec::new()
            } else {
                predicate
                    .split('&')
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(syntax)?
            };
            let category = if category.eq_ignore_ascii_case("none") {
                None
            } else {
                Some(category.parse().map_err(syntax)?)
            };
            rules.push(Rule {
                pattern,
                conditions,
                category,
            });
        }
        if rules.iter().all(|r| r.category.is_none()) {
            return Err(RuleError::Empty);
        }
        Ok(RuleTable { rules })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// First matching rule wins.
    pub fn categorize(&self, node: &AstNode) -> Option<DependencyCategory> {
        self.rules
            .iter()
            .find(|r| r.matches(node))
            .and_then(|r| r.category)
    }

    /// The label set implied by this table: every (pattern, category) pair
    /// that some rule can produce.
    pub fn label_set(&self) -> LabelSet {
        LabelSet::new(
            self.rules
                .iter()
                .filter_map(|r| r.category.map(|c| (r.pattern.clone(), c))),
        )
    }
}

impl Default for RuleTable {
    fn default() -> Self {
        RuleTable::parse(DEFAULT_RULES).expect("shipped rule table parses")
    }
}

/// Set of (node type, category) pairs retained by graph pruning.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    entries: BTreeSet<(TypePattern, DependencyCategory)>,
}

impl LabelSet {
    pub fn new(entries: impl IntoIterator<Item = (TypePattern, DependencyCategory)>) -> Self {
        LabelSet {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, DependencyCategory)>) -> Self {
        LabelSet::new(
            pairs
                .into_iter()
                .map(|(t, c)| (TypePattern::Exact(t.to_owned()), c)),
        )
    }

    pub fn contains(&self, node_type: &str, category: DependencyCategory) -> bool {
        self.entries
            .iter()
            .any(|(p, c)| *c == category && p.matches(node_type))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &(TypePattern, DependencyCategory)> {
        self.entries.iter()
    }
}
