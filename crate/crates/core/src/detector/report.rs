use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{localize, predict};
use crate::error::ShapeMismatch;
use crate::gcn::GcnModel;
use crate::graph::{ContractGraph, NormalizedGraph};
use crate::label::Label;

/// Reports never list more nodes than this.
pub const MAX_TOP_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizedNode {
    pub node_id: i64,
    pub node_type: String,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub name: String,
    /// `offset:length:file`, when the AST carried one.
    pub span: Option<String>,
    /// Source excerpt, when source text was supplied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub excerpt: Option<String>,
    pub salience: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub contract: String,
    pub verdict: Label,
    pub probability: f64,
    pub threshold: f64,
    pub top_k_nodes: Vec<LocalizedNode>,
    pub model_fingerprint: String,
    pub timestamp: String,
}

impl DetectionReport {
    /// Classifies one contract and localizes its `k` most salient nodes
    /// (at most [`MAX_TOP_K`]). `graph` supplies node types and spans for
    /// the rows of `normalized`.
    pub fn build(
        contract: &str,
        graph: &ContractGraph,
        normalized: &NormalizedGraph,
        model: &GcnModel,
        threshold: f64,
        k: usize,
        source: Option<&str>,
    ) -> Result<Self, ShapeMismatch> {
        let prediction = predict(model, normalized, threshold)?;
        let top_k_nodes = localize(model, normalized, k.min(MAX_TOP_K))?
            .into_iter()
            .map(|s| {
                let node = &graph.nodes[s.index];
                let excerpt = match (node.span, source) {
                    (Some(span), Some(src)) if span.offset >= 0 && span.length >= 0 => {
                        let (start, end) =
                            (span.offset as usize, (span.offset + span.length) as usize);
                        src.get(start..end).map(first_line)
                    }
                    _ => None,
                };
                LocalizedNode {
                    node_id: s.node_id,
                    node_type: node.n_type.clone(),
                    name: node.name.clone(),
                    span: node.span.map(|sp| sp.to_string()),
                    excerpt,
                    salience: s.score,
                }
            })
            .collect();
        Ok(DetectionReport {
            contract: contract.to_owned(),
            verdict: prediction.verdict,
            probability: prediction.probability,
            threshold,
            top_k_nodes,
            model_fingerprint: model.fingerprint(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{}: {} (p = {:.4}, threshold {})\n",
            self.contract, self.verdict, self.probability, self.threshold
        );
        for (rank, n) in self.top_k_nodes.iter().enumerate() {
            let _ = write!(
                out,
                "  #{:<2} node {:>5} {:<20}",
                rank + 1,
                n.node_id,
                n.node_type
            );
            if !n.name.is_empty() {
                let _ = write!(out, " {}", n.name);
            }
            if let Some(span) = &n.span {
                let _ = write!(out, " @{span}");
            }
            let _ = write!(out, "  salience {:.4}", n.salience);
            if let Some(x) = &n.excerpt {
                let _ = write!(out, "  `{x}`");
            }
            out.push('\n');
        }
        out
    }
}

fn first_line(s: &str) -> String {
    let line = s.lines().next().unwrap_or_default().trim_end();
    if line.len() < s.trim_end().len() {
        format!("{line} …")
    } else {
        line.to_owned()
    }
}
