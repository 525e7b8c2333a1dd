//! Two-layer graph convolutional classifier with hand-written backprop.
//!
//! Each layer computes `ReLU(Ŝ · H · W)` with `Ŝ = D̂^{-1/2}(A + I)D̂^{-1/2}`.
//! Node features after the second layer are mean-pooled into one vector per
//! contract and fed to a two-way linear head; class 1 is "defective".

mod model;
mod optim;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use model::{GcnModel, MODEL_MAGIC};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState};

use crate::error::{ModelError, ShapeMismatch};
use crate::graph::NormalizedGraph;
use crate::label::Label;
use crate::linalg::Matrix;

pub const DEFAULT_HIDDEN_WIDTH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    /// `d × h`
    pub w1: Matrix,
    /// `h × h`
    pub w2: Matrix,
    /// `h × 2`
    pub w_out: Matrix,
    pub b_out: [f64; 2],
    pub activation: Activation,
}

impl GcnParams {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        GcnParams {
            w1: Matrix::zeros(dim, hidden),
            w2: Matrix::zeros(hidden, hidden),
            w_out: Matrix::zeros(hidden, 2),
            b_out: [0.0; 2],
            activation: Activation::Relu,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = GcnParams::zeros(dim, hidden);
        for m in [&mut p.w1, &mut p.w2, &mut p.w_out] {
            let bound = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
            for x in m.as_mut_slice() {
                *x = rng.random_range(-bound..=bound);
            }
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn check_shapes(&self) -> Result<(), ShapeMismatch> {
        let h = self.hidden();
        let expect = |op, m: &Matrix, shape: (usize, usize)| {
            if m.shape() == shape {
                Ok(())
            } else {
                Err(ShapeMismatch {
                    op,
                    lhs: m.shape(),
                    rhs: shape,
                })
            }
        };
        expect("w2", &self.w2, (h, h))?;
        expect("w_out", &self.w_out, (h, 2))
    }

    pub fn slices(&self) -> [&[f64]; 4] {
        [
            self.w1.as_slice(),
            self.w2.as_slice(),
            self.w_out.as_slice(),
            &self.b_out,
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_mut_slice(),
            self.w2.as_mut_slice(),
            self.w_out.as_mut_slice(),
            &mut self.b_out,
        ]
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|x| x * x)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|x| x.is_finite()))
    }

    pub fn parameter_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden_width: usize,
    pub l2_penalty: f64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 100,
            seed: 42,
            hidden_width: DEFAULT_HIDDEN_WIDTH,
            l2_penalty: 5e-4,
            optimizer: OptimizerKind::adam(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be > 0", self.learning_rate));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.hidden_width == 0 {
            return bad("hidden width must be at least 1".into());
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return bad(format!("l2 penalty {} must be >= 0", self.l2_penalty));
        }
        Ok(())
    }
}

/// `σ(Ŝ · H · W)`, or the plain product when `apply_activation` is false.
pub fn gcn_layer(
    s_hat: &Matrix,
    h: &Matrix,
    w: &Matrix,
    apply_activation: bool,
) -> Result<Matrix, ShapeMismatch> {
    let z = s_hat.matmul(h)?.matmul(w)?;
    Ok(if apply_activation { z.relu() } else { z })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub h0: Matrix,
    pub h1: Matrix,
    pub h2: Matrix,
    pub pooled: Vec<f64>,
    pub logits: [f64; 2],
    /// Softmax probability of the defective class.
    pub probability: f64,
}

fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let z = e[0] + e[1];
    [e[0] / z, e[1] / z]
}

fn head(params: &GcnParams, pooled: &[f64]) -> [f64; 2] {
    let mut logits = params.b_out;
    for (k, &p) in pooled.iter().enumerate() {
        logits[0] += p * params.w_out[(k, 0)];
        logits[1] += p * params.w_out[(k, 1)];
    }
    logits
}

fn check_input(params: &GcnParams, g: &NormalizedGraph) -> Result<(), ShapeMismatch> {
    params.check_shapes()?;
    if g.features.cols() != params.dim() {
        return Err(ShapeMismatch {
            op: "forward",
            lhs: g.features.shape(),
            rhs: params.w1.shape(),
        });
    }
    Ok(())
}

/// Intermediate products kept for the backward pass.
struct Cache {
    sx: Matrix,
    h1: Matrix,
    sh1: Matrix,
    h2: Matrix,
    pooled: Vec<f64>,
    logits: [f64; 2],
}

fn forward_cached(params: &GcnParams, s_hat: &Matrix, sx: Matrix) -> Result<Cache, ShapeMismatch> {
    let h1 = sx.matmul(&params.w1)?.relu();
    let sh1 = s_hat.matmul(&h1)?;
    let h2 = sh1.matmul(&params.w2)?.relu();
    let pooled = h2.column_means();
    let logits = head(params, &pooled);
    Ok(Cache {
        sx,
        h1,
        sh1,
        h2,
        pooled,
        logits,
    })
}

pub fn forward(params: &GcnParams, g: &NormalizedGraph) -> Result<ForwardTrace, ShapeMismatch> {
    check_input(params, g)?;
    let cache = forward_cached(params, &g.s_hat, g.s_hat.matmul(&g.features)?)?;
    Ok(ForwardTrace {
        h0: g.features.clone(),
        probability: softmax(cache.logits)[1],
        h1: cache.h1,
        h2: cache.h2,
        pooled: cache.pooled,
        logits: cache.logits,
    })
}

/// A graph with `Ŝ·X` precomputed; the features never change during
/// training so the first propagation is done once.
pub struct PreparedGraph<'a> {
    pub graph: &'a NormalizedGraph,
    sx: Matrix,
}

impl<'a> PreparedGraph<'a> {
    pub fn new(graph: &'a NormalizedGraph) -> Result<Self, ShapeMismatch> {
        Ok(PreparedGraph {
            sx: graph.s_hat.matmul(&graph.features)?,
            graph,
        })
    }
}

/// Cross-entropy plus `l2_penalty · ‖θ‖² / 2` and its exact gradient.
pub fn loss_and_grads(
    params: &GcnParams,
    g: &NormalizedGraph,
    label: Label,
    l2_penalty: f64,
) -> Result<(f64, GcnParams), ShapeMismatch> {
    check_input(params, g)?;
    let prepared = PreparedGraph::new(g)?;
    loss_and_grads_prepared(params, &prepared, label, l2_penalty)
}

pub fn loss_and_grads_prepared(
    params: &GcnParams,
    g: &PreparedGraph<'_>,
    label: Label,
    l2_penalty: f64,
) -> Result<(f64, GcnParams), ShapeMismatch> {
    check_input(params, g.graph)?;
    let s_hat = &g.graph.s_hat;
    let c = forward_cached(params, s_hat, g.sx.clone())?;
    let y = label.class_index();

    let m = c.logits[0].max(c.logits[1]);
    let log_z = m + ((c.logits[0] - m).exp() + (c.logits[1] - m).exp()).ln();
    let loss = log_z - c.logits[y] + 0.5 * l2_penalty * params.sum_of_squares();

    let mut d_logits = softmax(c.logits);
    d_logits[y] -= 1.0;

    let hidden = params.hidden();
    let n = c.h2.rows();
    let mut grads = GcnParams::zeros(params.dim(), hidden);
    grads.b_out = d_logits;
    let mut d_pooled = vec![0.0; hidden];
    for (k, (d, &pooled)) in d_pooled.iter_mut().zip(&c.pooled).enumerate() {
        grads.w_out[(k, 0)] = pooled * d_logits[0];
        grads.w_out[(k, 1)] = pooled * d_logits[1];
        *d = params.w_out[(k, 0)] * d_logits[0] + params.w_out[(k, 1)] * d_logits[1];
    }

    // Mean pooling spreads the gradient evenly; ReLU gates it.
    let inv_n = 1.0 / n as f64;
    let mut d_z2 = Matrix::zeros(n, hidden);
    for i in 0..n {
        for k in 0..hidden {
            if c.h2[(i, k)] > 0.0 {
                d_z2[(i, k)] = d_pooled[k] * inv_n;
            }
        }
    }
    grads.w2 = c.sh1.t_matmul(&d_z2)?;
    let d_sh1 = d_z2.matmul_t(&params.w2)?;
    let mut d_z1 = s_hat.t_matmul(&d_sh1)?;
    for (d, &h) in d_z1.as_mut_slice().iter_mut().zip(c.h1.as_slice()) {
        if h <= 0.0 {
            *d = 0.0;
        }
    }
    grads.w1 = c.sx.t_matmul(&d_z1)?;

    if l2_penalty != 0.0 {
        for (g, p) in grads.slices_mut().into_iter().zip(params.slices()) {
            for (gi, pi) in g.iter_mut().zip(p) {
                *gi += l2_penalty * pi;
            }
        }
    }
    Ok((loss, grads))
}

/// Defective probability only, skipping the trace bookkeeping.
pub fn predict_probability(params: &GcnParams, g: &NormalizedGraph) -> Result<f64, ShapeMismatch> {
    Ok(forward(params, g)?.probability)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_graph(x: f64) -> NormalizedGraph {
        NormalizedGraph::from_adjacency(
            vec![1],
            &Matrix::from_rows(&[[0.0]]),
            Matrix::from_rows(&[[x]]),
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let s = Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]);
        let h = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let out = gcn_layer(&s, &h, &Matrix::zeros(2, 3), true).unwrap();
        assert_eq!(out, Matrix::zeros(2, 3));
    }

    #[test]
    fn scalar_layer() {
        let out = gcn_layer(
            &Matrix::from_rows(&[[1.0]]),
            &Matrix::from_rows(&[[2.0]]),
            &Matrix::from_rows(&[[3.0]]),
            true,
        )
        .unwrap();
        assert_eq!(out, Matrix::from_rows(&[[6.0]]));
    }

    #[test]
    fn uniform_propagation_averages() {
        let out = gcn_layer(
            &Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]),
            &Matrix::from_rows(&[[1.0], [3.0]]),
            &Matrix::from_rows(&[[1.0]]),
            true,
        )
        .unwrap();
        assert_eq!(out, Matrix::from_rows(&[[2.0], [2.0]]));
    }

    #[test]
    fn layer_without_activation_keeps_negatives() {
        let s = Matrix::from_rows(&[[1.0]]);
        let h = Matrix::from_rows(&[[-2.0]]);
        let w = Matrix::from_rows(&[[1.0]]);
        assert_eq!(gcn_layer(&s, &h, &w, false).unwrap()[(0, 0)], -2.0);
        assert_eq!(gcn_layer(&s, &h, &w, true).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn layer_shape_mismatch() {
        let s = Matrix::identity(2);
        assert!(gcn_layer(&s, &Matrix::zeros(3, 1), &Matrix::zeros(1, 1), true).is_err());
    }

    #[test]
    fn zero_params_are_undecided() {
        let trace = forward(&GcnParams::zeros(1, 3), &scalar_graph(2.0)).unwrap();
        assert_eq!(trace.logits, [0.0, 0.0]);
        assert_eq!(trace.probability, 0.5);
        for label in [Label::Clean, Label::Defective] {
            let (loss, _) =
                loss_and_grads(&GcnParams::zeros(1, 3), &scalar_graph(2.0), label, 0.1).unwrap();
            assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn single_node_matches_closed_form() {
        // n = 1, d = h = 1: ŝ = 1, so every layer is ReLU(x·w).
        let mut p = GcnParams::zeros(1, 1);
        p.w1[(0, 0)] = 1.5;
        p.w2[(0, 0)] = 2.0;
        p.w_out[(0, 0)] = -1.0;
        p.w_out[(0, 1)] = 0.5;
        p.b_out = [0.25, -0.5];
        let x = 0.8;
        let h2 = ((x * 1.5f64).max(0.0) * 2.0).max(0.0);
        let logits = [0.25 - h2, h2 * 0.5 - 0.5];
        let prob = 1.0 / (1.0 + (logits[0] - logits[1]).exp());
        let trace = forward(&p, &scalar_graph(x)).unwrap();
        assert!((trace.logits[0] - logits[0]).abs() < 1e-15);
        assert!((trace.logits[1] - logits[1]).abs() < 1e-15);
        assert!((trace.probability - prob).abs() < 1e-15);
        assert_eq!(trace.pooled, vec![h2]);
    }

    #[test]
    fn l2_term_is_exactly_half_squared_norm() {
        let p = GcnParams::init(2, 3, 7);
        let g = NormalizedGraph::from_adjacency(
            vec![1, 2],
            &Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]),
            Matrix::from_rows(&[[0.1, -0.2], [0.3, 0.4]]),
        )
        .unwrap();
        let lambda = 0.01;
        let (base, _) = loss_and_grads(&p, &g, Label::Defective, lambda).unwrap();
        let (doubled, _) = loss_and_grads(&p, &g, Label::Defective, 2.0 * lambda).unwrap();
        let expected = lambda * p.sum_of_squares() / 2.0;
        assert!((doubled - base - expected).abs() < 1e-14);
    }

    #[test]
    fn width_mismatch_is_reported() {
        let err = forward(&GcnParams::zeros(3, 2), &scalar_graph(1.0)).unwrap_err();
        assert_eq!(err.op, "forward");
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let mut p = GcnParams::zeros(1, 1);
        p.w1[(0, 0)] = 1e3;
        p.w2[(0, 0)] = 1e3;
        p.w_out[(0, 1)] = 1e3;
        let trace = forward(&p, &scalar_graph(1.0)).unwrap();
        assert!(trace.probability.is_finite());
        assert_eq!(trace.probability, 1.0);
        let (loss, grads) = loss_and_grads(&p, &scalar_graph(1.0), Label::Clean, 0.0).unwrap();
        assert!(loss.is_finite() && grads.is_finite());
    }
}
