//! Deterministic inputs shared by the benchmarks.

use derail_core::corpus::synth_generate;
use derail_core::{GcnParams, LabeledContract, Matrix, NormalizedGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Symmetric 0/1 adjacency on `n` nodes with edge probability `p`.
pub fn random_adjacency(n: usize, p: f64, rng: &mut impl Rng) -> Matrix {
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            if rng.random_bool(p) {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    a
}

/// Random undirected graph on `n` nodes with edge probability `p` and
/// uniform features in [-1, 1].
pub fn random_graph(n: usize, d: usize, p: f64, seed: u64) -> NormalizedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_adjacency(n, p, &mut rng);
    let mut x = Matrix::zeros(n, d);
    for v in x.as_mut_slice() {
        *v = rng.random_range(-1.0..=1.0);
    }
    NormalizedGraph::from_adjacency((0..n as i64).collect(), &a, x).expect("valid graph")
}

/// Glorot-initialized parameters for width `d` and hidden width `h`.
pub fn params(d: usize, h: usize) -> GcnParams {
    GcnParams::init(d, h, 7)
}

/// A small synthetic corpus of `2 * pairs` contracts.
pub fn corpus(pairs: usize) -> Vec<LabeledContract> {
    synth_generate(pairs, 42)
}
