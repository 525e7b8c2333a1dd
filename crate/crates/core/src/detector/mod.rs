//! Training, prediction, evaluation and node-level localization.

mod metrics;
mod report;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use metrics::Metrics;
pub use report::{DetectionReport, LocalizedNode, MAX_TOP_K};

use crate::corpus::{self, Labeled, DEFAULT_TRAIN_FRACTION};
use crate::error::{ModelError, ShapeMismatch};
use crate::gcn::{
    forward, loss_and_grads_prepared, optimizer_step, GcnModel, GcnParams, OptimizerState,
    PreparedGraph, TrainConfig,
};
use crate::graph::NormalizedGraph;
use crate::label::Label;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_TOP_K: usize = 5;

/// Keeps the epoch shuffle independent of the split and weight streams.
const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledGraph {
    pub id: String,
    pub graph: NormalizedGraph,
    pub label: Label,
}

impl Labeled for LabeledGraph {
    fn label(&self) -> Label {
        self.label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-graph objective over the epoch, L2 term included.
    pub train_loss: f64,
    /// `None` when there is no held-out set.
    pub test: Option<Metrics>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn final_metrics(&self) -> Option<Metrics> {
        self.epochs.last().and_then(|e| e.test)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub verdict: Label,
    pub probability: f64,
}

fn check_classes<T: Labeled>(items: &[T]) -> Result<(), ModelError> {
    let first = items.first().ok_or(ModelError::EmptyCorpus)?.label();
    if items.iter().all(|g| g.label() == first) {
        return Err(ModelError::DegenerateCorpus(first.to_string()));
    }
    Ok(())
}

/// Seeded stratified 90/10 split followed by [`fit`].
pub fn train(
    corpus: Vec<LabeledGraph>,
    config: &TrainConfig,
) -> Result<(GcnModel, TrainHistory), ModelError> {
    config.validate()?;
    check_classes(&corpus)?;
    let (train_set, test_set) = corpus::split(corpus, DEFAULT_TRAIN_FRACTION, config.seed)?;
    fit(&train_set, &test_set, config)
}

/// Per-graph gradient steps over `train_set` for `config.epochs` epochs,
/// evaluating `test_set` after each epoch. The returned model carries an
/// empty vocabulary fingerprint; callers that embed with a vocabulary set it.
pub fn fit(
    train_set: &[LabeledGraph],
    test_set: &[LabeledGraph],
    config: &TrainConfig,
) -> Result<(GcnModel, TrainHistory), ModelError> {
    config.validate()?;
    check_classes(train_set)?;
    let dim = train_set[0].graph.feature_width();
    if let Some(g) = train_set
        .iter()
        .chain(test_set)
        .find(|g| g.graph.feature_width() != dim)
    {
        return Err(ModelError::Shape(ShapeMismatch {
            op: "fit",
            lhs: (train_set[0].graph.len(), dim),
            rhs: g.graph.features.shape(),
        }));
    }

    let mut params = GcnParams::init(dim, config.hidden_width, config.seed);
    let mut state = OptimizerState::new(&params);
    let prepared = train_set
        .iter()
        .map(|g| PreparedGraph::new(&g.graph))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (loss, grads) = loss_and_grads_prepared(
                &params,
                &prepared[i],
                train_set[i].label,
                config.l2_penalty,
            )?;
            total += loss;
            optimizer_step(&mut state, &mut params, &grads, config);
        }
        let model = GcnModel::new(config.clone(), params.clone(), String::new());
        let test = if test_set.is_empty() {
            None
        } else {
            Some(evaluate(&model, test_set)?)
        };
        let train_loss = total / train_set.len() as f64;
        log::debug!("epoch {epoch}: loss {train_loss:.6}");
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            test,
        });
    }
    Ok((
        GcnModel::new(config.clone(), params, String::new()),
        history,
    ))
}

/// Defective iff the probability reaches `threshold`; ties go to defective.
pub fn predict(
    model: &GcnModel,
    g: &NormalizedGraph,
    threshold: f64,
) -> Result<Prediction, ShapeMismatch> {
    let probability = forward(&model.params, g)?.probability;
    let verdict = if probability >= threshold {
        Label::Defective
    } else {
        Label::Clean
    };
    Ok(Prediction {
        verdict,
        probability,
    })
}

/// Metrics of [`predict`] at the default threshold over `test_set`.
pub fn evaluate(model: &GcnModel, test_set: &[LabeledGraph]) -> Result<Metrics, ModelError> {
    if test_set.is_empty() {
        return Err(ModelError::EmptyTestSet);
    }
    let mut pairs = Vec::with_capacity(test_set.len());
    for g in test_set {
        pairs.push((
            predict(model, &g.graph, DEFAULT_THRESHOLD)?.verdict,
            g.label,
        ));
    }
    Ok(Metrics::from_pairs(pairs))
}

/// A node's contribution to the defective verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Salience {
    /// Row of the graph.
    pub index: usize,
    pub node_id: i64,
    pub score: f64,
}

/// Top-`k` nodes by the defective-class logit computed from each node's
/// final hidden row alone. Equal scores keep graph order.
pub fn localize(
    model: &GcnModel,
    g: &NormalizedGraph,
    k: usize,
) -> Result<Vec<Salience>, ShapeMismatch> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let trace = forward(&model.params, g)?;
    let w = &model.params.w_out;
    let mut scores: Vec<Salience> = (0..trace.h2.rows())
        .map(|i| Salience {
            index: i,
            node_id: g.node_ids[i],
            score: trace
                .h2
                .row(i)
                .iter()
                .enumerate()
                .map(|(c, h)| h * w[(c, 1)])
                .sum::<f64>()
                + model.params.b_out[1],
        })
        .collect();
    scores.sort_by(|a, b| b.score.total_cmp(&a.score));
    scores.truncate(k);
    Ok(scores)
}

/// Stratified `folds`-way cross-validation; returns one metrics entry per
/// fold plus the pooled counts.
pub fn cross_validate(
    corpus: &[LabeledGraph],
    config: &TrainConfig,
    folds: usize,
) -> Result<(Vec<Metrics>, Metrics), ModelError> {
    let assignment = fold_assignment(
        &corpus.iter().map(|g| g.label).collect::<Vec<_>>(),
        folds,
        config.seed,
    )?;
    let mut per_fold = Vec::with_capacity(folds);
    for f in 0..folds {
        let (mut tr, mut te) = (Vec::new(), Vec::new());
        for (g, &a) in corpus.iter().zip(&assignment) {
            if a == f {
                te.push(g.clone());
            } else {
                tr.push(g.clone());
            }
        }
        let (model, _) = fit(&tr, &[], config)?;
        per_fold.push(evaluate(&model, &te)?);
    }
    let pooled = per_fold
        .iter()
        .fold(Metrics::from_counts(0, 0, 0, 0), |acc, m| acc.merge(m));
    Ok((per_fold, pooled))
}

/// Fold index per item: each class is shuffled and dealt round-robin.
pub fn fold_assignment(
    labels: &[Label],
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>, ModelError> {
    if folds < 2 {
        return Err(ModelError::InvalidConfig(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if labels.len() < folds {
        return Err(ModelError::Split(crate::error::CorpusError::TooSmall(
            labels.len(),
        )));
    }
    check_classes(labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; labels.len()];
    let mut next = 0;
    for class in [Label::Defective, Label::Clean] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            out[i] = next % folds;
            next += 1;
        }
    }
    Ok(out)
}
