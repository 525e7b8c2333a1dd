//! End-to-end composition: AST → tuples and edges → graph → pruned graph →
//! embedded features → normalized GCN input, plus the train/evaluate
//! experiment built on top of it.

use serde::{Deserialize, Serialize};

use crate::ast::AstTree;
use crate::corpus::{split_indices, LabeledContract, DEFAULT_TRAIN_FRACTION};
use crate::detector::{evaluate, fit, LabeledGraph, Metrics, TrainHistory};
use crate::error::{GraphError, ModelError};
use crate::features::{extract_edges, extract_node_tuples, LabelSet, NodeTuple, RuleTable};
use crate::gcn::{GcnModel, TrainConfig};
use crate::graph::{
    build_graph, build_vocabulary_with, embed_nodes, normalize, optimize_graph, ContractGraph,
    NormalizedGraph, VocabConfig, Vocabulary,
};

/// Rule table plus the label set used for pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub rules: RuleTable,
    pub labels: LabelSet,
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline::new(RuleTable::default())
    }
}

/// A contract ready for the classifier: the embedded graph (node metadata)
/// and its normalized matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedContract {
    pub graph: ContractGraph,
    pub normalized: NormalizedGraph,
}

impl Pipeline {
    /// Prunes against every (type, category) pair the table can produce.
    pub fn new(rules: RuleTable) -> Self {
        let labels = rules.label_set();
        Pipeline { rules, labels }
    }

    pub fn with_labels(rules: RuleTable, labels: LabelSet) -> Self {
        Pipeline { rules, labels }
    }

    pub fn tuples(&self, tree: &AstTree) -> Vec<NodeTuple> {
        extract_node_tuples(tree, &self.rules)
    }

    /// Extraction, graph construction and pruning; no features yet.
    pub fn contract_graph(&self, tree: &AstTree) -> Result<ContractGraph, GraphError> {
        let tuples = self.tuples(tree);
        let edges = extract_edges(tree, &tuples);
        let graph = build_graph(tree, &tuples, &edges)?;
        optimize_graph(&graph, &self.labels)
    }

    pub fn prepare(
        &self,
        tree: &AstTree,
        vocab: &Vocabulary,
    ) -> Result<PreparedContract, GraphError> {
        let graph = embed_nodes(&self.contract_graph(tree)?, vocab);
        let normalized = normalize(&graph)?;
        Ok(PreparedContract { graph, normalized })
    }

    /// Vocabulary over the surviving nodes of `trees`. Trees that prune to
    /// nothing contribute no tokens.
    pub fn vocabulary<'a>(
        &self,
        trees: impl IntoIterator<Item = &'a AstTree>,
        config: VocabConfig,
    ) -> Result<Vocabulary, GraphError> {
        let corpus: Vec<Vec<NodeTuple>> = trees
            .into_iter()
            .filter_map(|t| self.contract_graph(t).ok())
            .map(|g| g.node_tuples())
            .collect();
        build_vocabulary_with(&corpus, config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub vocab: VocabConfig,
    pub train_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            vocab: VocabConfig::default(),
            train_fraction: DEFAULT_TRAIN_FRACTION,
        }
    }
}

/// A contract the pipeline could not turn into a graph.
#[derive(Debug)]
pub struct Skipped {
    pub contract: String,
    pub error: GraphError,
}

#[derive(Debug)]
pub struct Experiment {
    pub model: GcnModel,
    pub vocab: Vocabulary,
    pub history: TrainHistory,
    /// Held-out metrics of the final model.
    pub metrics: Metrics,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub skipped: Vec<Skipped>,
}

/// Seeded stratified split, vocabulary from the training side only,
/// training on the training side and evaluation on the rest.
pub fn run_experiment(
    pipeline: &Pipeline,
    contracts: &[LabeledContract],
    config: &ExperimentConfig,
) -> Result<Experiment, ModelError> {
    config.train.validate()?;
    if contracts.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let labels: Vec<_> = contracts.iter().map(|c| c.label).collect();
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(ModelError::DegenerateCorpus(labels[0].to_string()));
    }
    let (train_idx, test_idx) = split_indices(&labels, config.train_fraction, config.train.seed)?;

    let vocab = pipeline
        .vocabulary(train_idx.iter().map(|&i| &contracts[i].tree), config.vocab)
        .map_err(|e| ModelError::InvalidConfig(e.to_string()))?;

    let mut skipped = Vec::new();
    let mut prepare = |idx: &[usize]| -> Vec<LabeledGraph> {
        idx.iter()
            .filter_map(|&i| {
                let c = &contracts[i];
                let id = c.path.display().to_string();
                match pipeline.prepare(&c.tree, &vocab) {
                    Ok(p) => Some(LabeledGraph {
                        id,
                        graph: p.normalized,
                        label: c.label,
                    }),
                    Err(error) => {
                        log::warn!("skipping {id}: {error}");
                        skipped.push(Skipped {
                            contract: id,
                            error,
                        });
                        None
                    }
                }
            })
            .collect()
    };
    let train_set = prepare(&train_idx);
    let test_set = prepare(&test_idx);

    let (mut model, history) = fit(&train_set, &test_set, &config.train)?;
    model.vocab_fingerprint = vocab.fingerprint();
    let metrics = evaluate(&model, &test_set)?;
    Ok(Experiment {
        model,
        vocab,
        history,
        metrics,
        train_ids: train_set.into_iter().map(|g| g.id).collect(),
        test_ids: test_set.into_iter().map(|g| g.id).collect(),
        skipped,
    })
}
