//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs with a custom harness so each criterion reports its own verdict and
//! timing; the process exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use derail_core::ast::parse_ast_json;
use derail_core::corpus::synth_generate;
use derail_core::detector::{evaluate, LabeledGraph, Metrics};
use derail_core::features::{
    extract_edges, extract_node_tuples, DependencyCategory, EdgeKind, LabelSet, RuleTable,
    TypePattern,
};
use derail_core::gcn::{forward, loss_and_grads, GcnModel, GcnParams, TrainConfig};
use derail_core::graph::{
    build_graph, build_vocabulary, embed_nodes, normalize, optimize_graph, ContractGraph,
    GraphEdge, GraphNode, NormalizedGraph,
};
use derail_core::linalg::Matrix;
use derail_core::pipeline::{run_experiment, ExperimentConfig, Pipeline};
use derail_core::Label;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_adjacency(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let p = rng.random_range(0.0..1.0);
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    a
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, d: usize) -> NormalizedGraph {
    let a = random_adjacency(rng, n);
    let x = random_matrix(rng, n, d, 1.0);
    NormalizedGraph::from_adjacency((0..n as i64).collect(), &a, x).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng, d: usize, h: usize) -> GcnParams {
    let mut p = GcnParams::zeros(d, h);
    p.w1 = random_matrix(rng, d, h, 1.0);
    p.w2 = random_matrix(rng, h, h, 1.0);
    p.w_out = random_matrix(rng, h, 2, 1.0);
    p.b_out = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    p
}

/// Criterion 1: normalization against a dense brute-force computation.
fn normalization_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let a = random_adjacency(&mut rng, n);
        let g = NormalizedGraph::from_adjacency((0..n as i64).collect(), &a, Matrix::zeros(n, 1))
            .map_err(|e| e.to_string())?;

        // D^{-1/2} as an explicit diagonal matrix, then two dense products.
        let mut a_hat = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a_hat[i][j] = a[(i, j)] + if i == j { 1.0 } else { 0.0 };
            }
        }
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            d[i][i] = 1.0 / a_hat[i].iter().sum::<f64>().sqrt();
        }
        let mul = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| {
            let mut z = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    z[i][j] = (0..n).map(|k| x[i][k] * y[k][j]).sum();
                }
            }
            z
        };
        let expected = mul(&mul(&d, &a_hat), &d);
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((g.s_hat[(i, j)] - expected[i][j]).abs());
                ensure(g.a_hat[(i, j)] == a_hat[i][j], || {
                    format!("Â mismatch at ({i},{j})")
                })?;
            }
        }
        ensure(g.s_hat.is_symmetric(0.0), || "Ŝ not symmetric".into())?;
        let m = DMatrix::from_row_slice(n, n, g.s_hat.as_slice());
        for &ev in SymmetricEigen::new(m).eigenvalues.iter() {
            lo = lo.min(ev);
            hi = hi.max(ev);
        }
    }
    ensure(worst <= 1e-12, || format!("max |Δ| = {worst:e}"))?;
    ensure(lo >= -1.0 - 1e-12 && hi <= 1.0 + 1e-12, || {
        format!("eigenvalues span [{lo}, {hi}]")
    })?;
    Ok(format!(
        "1000 graphs, max |Δ| = {worst:.1e}, eigenvalues in [{lo:.4}, {hi:.4}]"
    ))
}

/// Pre-activations of both layers; central differences are only valid away
/// from the ReLU kink.
fn min_abs_preactivation(p: &GcnParams, g: &NormalizedGraph) -> f64 {
    let z1 = g.s_hat.matmul(&g.features).unwrap().matmul(&p.w1).unwrap();
    let h1 = z1.relu();
    let z2 = g.s_hat.matmul(&h1).unwrap().matmul(&p.w2).unwrap();
    z1.as_slice()
        .iter()
        .chain(z2.as_slice())
        .fold(f64::INFINITY, |m, z| m.min(z.abs()))
}

/// Criterion 2: analytic gradients against central finite differences.
fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let step = 1e-5;
    let mut worst = 0.0f64;
    let mut entries = 0usize;
    let mut instances = 0;
    let mut resampled = 0;
    while instances < 100 {
        let n = rng.random_range(1..=6);
        let d = rng.random_range(1..=4);
        let h = rng.random_range(1..=3);
        let g = random_graph(&mut rng, n, d);
        let params = random_params(&mut rng, d, h);
        if min_abs_preactivation(&params, &g) < 1e-3 {
            resampled += 1;
            continue;
        }
        instances += 1;
        let label = if rng.random_bool(0.5) {
            Label::Defective
        } else {
            Label::Clean
        };
        let l2 = rng.random_range(0.0..0.01);
        let (_, grads) = loss_and_grads(&params, &g, label, l2).map_err(|e| e.to_string())?;
        let loss_at = |p: &GcnParams| loss_and_grads(p, &g, label, l2).unwrap().0;
        for block in 0..4 {
            for k in 0..params.slices()[block].len() {
                let mut plus = params.clone();
                plus.slices_mut()[block][k] += step;
                let mut minus = params.clone();
                minus.slices_mut()[block][k] -= step;
                let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * step);
                let analytic = grads.slices()[block][k];
                let scale = analytic.abs().max(numeric.abs());
                let rel = if scale < 1e-8 {
                    (analytic - numeric).abs()
                } else {
                    (analytic - numeric).abs() / scale
                };
                worst = worst.max(rel);
                entries += 1;
            }
        }
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!(
        "100 instances ({resampled} resampled near a ReLU kink), {entries} entries, max rel. error {worst:.1e}"
    ))
}

const TYPES: [&str; 4] = [
    "FunctionDefinition",
    "Identifier",
    "Assignment",
    "IfStatement",
];

fn random_contract_graph(rng: &mut ChaCha8Rng) -> ContractGraph {
    let n = rng.random_range(3..=10);
    let nodes: Vec<GraphNode> = (0..n)
        .map(|i| GraphNode {
            ast_id: 100 + i as i64,
            n_type: TYPES.choose(rng).unwrap().to_string(),
            name: String::new(),
            category: *DependencyCategory::ALL.choose(rng).unwrap(),
            span: None,
            token: None,
        })
        .collect();
    let kinds = [EdgeKind::AstChild, EdgeKind::DataDep, EdgeKind::FuncCall];
    let p = rng.random_range(0.05..0.5);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(p / 2.0) {
                edges.push(GraphEdge {
                    src: i,
                    dst: j,
                    kind: *kinds.choose(rng).unwrap(),
                });
            }
        }
    }
    let mut anchors: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
    if anchors.is_empty() {
        anchors.push(0);
    }
    ContractGraph::from_parts(nodes, edges, anchors).unwrap()
}

fn random_label_set(rng: &mut ChaCha8Rng) -> LabelSet {
    let mut entries = Vec::new();
    for t in TYPES {
        for c in DependencyCategory::ALL {
            if rng.random_bool(0.6) {
                entries.push((TypePattern::Exact(t.to_string()), c));
            }
        }
    }
    LabelSet::new(entries)
}

/// Survivors by transitive closure over the allowed-node subgraph.
fn reachability_oracle(g: &ContractGraph, labels: &LabelSet) -> BTreeSet<i64> {
    let n = g.len();
    let allowed: Vec<bool> = g
        .nodes
        .iter()
        .map(|v| labels.contains(&v.n_type, v.category))
        .collect();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = allowed[i];
    }
    for e in &g.edges {
        if allowed[e.src] && allowed[e.dst] {
            reach[e.src][e.dst] = true;
            reach[e.dst][e.src] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n)
        .filter(|&j| g.anchors.iter().any(|&a| allowed[a] && reach[a][j]))
        .map(|j| g.nodes[j].ast_id)
        .collect()
}

/// Criterion 3: pruning survivors, idempotence and edge hygiene.
fn pruning_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut emptied = 0;
    for case in 0..1000 {
        let g = random_contract_graph(&mut rng);
        let labels = random_label_set(&mut rng);
        let expected = reachability_oracle(&g, &labels);
        let pruned = match optimize_graph(&g, &labels) {
            Ok(p) => p,
            Err(_) if expected.is_empty() => {
                emptied += 1;
                continue;
            }
            Err(e) => return Err(format!("case {case}: unexpected {e}")),
        };
        let got: BTreeSet<i64> = pruned.node_ids().into_iter().collect();
        ensure(got == expected, || {
            format!("case {case}: {got:?} != {expected:?}")
        })?;
        let order: Vec<i64> = pruned.node_ids();
        ensure(order.windows(2).all(|w| w[0] < w[1]), || {
            format!("case {case}: order not preserved")
        })?;
        let again = optimize_graph(&pruned, &labels).map_err(|e| e.to_string())?;
        ensure(again == pruned, || format!("case {case}: not idempotent"))?;
        let m = pruned.len();
        for e in &pruned.edges {
            ensure(e.src < m && e.dst < m, || {
                format!("case {case}: dangling edge")
            })?;
            ensure(pruned.adjacency[(e.src, e.dst)] == 1.0, || {
                format!("case {case}: edge missing from adjacency")
            })?;
        }
        let from_edges: usize = pruned
            .adjacency
            .as_slice()
            .iter()
            .filter(|&&x| x != 0.0)
            .count();
        let mut pairs = BTreeSet::new();
        for e in &pruned.edges {
            pairs.insert((e.src, e.dst));
            pairs.insert((e.dst, e.src));
        }
        ensure(from_edges == pairs.len(), || {
            format!("case {case}: adjacency has entries without edges")
        })?;
    }
    Ok(format!(
        "1000 graphs, {emptied} pruned to EmptyGraph as the oracle predicted"
    ))
}

/// Criterion 4: logits under simultaneous node permutation.
fn permutation_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(2..=12);
        let (d, h) = (rng.random_range(1..=6), rng.random_range(1..=5));
        let a = random_adjacency(&mut rng, n);
        let x = random_matrix(&mut rng, n, d, 1.0);
        let params = random_params(&mut rng, d, h);
        let ids: Vec<i64> = (0..n as i64).collect();
        let base = forward(
            &params,
            &NormalizedGraph::from_adjacency(ids.clone(), &a, x.clone()).unwrap(),
        )
        .unwrap()
        .logits;
        for _ in 0..50 {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut pa = Matrix::zeros(n, n);
            let mut px = Matrix::zeros(n, d);
            for i in 0..n {
                for j in 0..n {
                    pa[(i, j)] = a[(perm[i], perm[j])];
                }
                px.row_mut(i).copy_from_slice(x.row(perm[i]));
            }
            let g = NormalizedGraph::from_adjacency(ids.clone(), &pa, px).unwrap();
            let logits = forward(&params, &g).unwrap().logits;
            worst = worst.max((logits[0] - base[0]).abs().max((logits[1] - base[1]).abs()));
        }
    }
    ensure(worst <= 1e-10, || format!("max drift {worst:e}"))?;
    Ok(format!(
        "20 graphs × 50 permutations, max drift {worst:.1e}"
    ))
}

struct Run {
    model_bytes: Vec<u8>,
    metrics_json: String,
    metrics: Metrics,
}

fn criterion5_run() -> Result<Run, String> {
    let contracts = synth_generate(100, 42);
    let exp = run_experiment(
        &Pipeline::default(),
        &contracts,
        &ExperimentConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model.sgm");
    exp.model.save(&path).map_err(|e| e.to_string())?;
    Ok(Run {
        model_bytes: std::fs::read(&path).map_err(|e| e.to_string())?,
        metrics_json: serde_json::to_string(&exp.metrics).unwrap(),
        metrics: exp.metrics,
    })
}

/// Criterion 5: held-out accuracy and FPR on the synthetic corpus.
fn separability(first: &Run) -> Outcome {
    let m = &first.metrics;
    let acc = m.acc.ok_or("accuracy undefined")?;
    let fpr = m.fpr.ok_or("FPR undefined")?;
    ensure(acc >= 0.90 && fpr <= 0.10, || {
        format!("acc {acc}, FPR {fpr}")
    })?;
    Ok(format!(
        "200 contracts, {} held out: acc {acc:.3}, FPR {fpr:.3}",
        m.total()
    ))
}

/// Criterion 6: metrics against a brute-force confusion matrix.
fn metrics_oracle() -> Outcome {
    // d = h = 1; a single node with feature +1 is predicted defective and
    // one with -1 clean, so predictions can be dictated exactly.
    let mut params = GcnParams::zeros(1, 1);
    params.w1[(0, 0)] = 1.0;
    params.w2[(0, 0)] = 1.0;
    params.w_out[(0, 1)] = 1.0;
    params.b_out = [0.0, -0.5];
    let model = GcnModel::new(TrainConfig::default(), params, String::new());
    let graph_for = |defective: bool| {
        let x = if defective { 1.0 } else { -1.0 };
        NormalizedGraph::from_adjacency(vec![0], &Matrix::zeros(1, 1), Matrix::from_rows(&[[x]]))
            .unwrap()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut undefined_seen = 0;
    for case in 0..1000 {
        let n = rng.random_range(1..=100);
        let bias = rng.random_range(0.0..1.0);
        let mut confusion = [[0u64; 2]; 2]; // [predicted][actual], 1 = defective
        let mut set = Vec::with_capacity(n);
        for i in 0..n {
            let predicted = rng.random_bool(bias);
            let actual = rng.random_bool(bias);
            confusion[predicted as usize][actual as usize] += 1;
            set.push(LabeledGraph {
                id: i.to_string(),
                graph: graph_for(predicted),
                label: if actual {
                    Label::Defective
                } else {
                    Label::Clean
                },
            });
        }
        let got = evaluate(&model, &set).map_err(|e| e.to_string())?;
        let (tp, fp, tn, fn_) = (
            confusion[1][1],
            confusion[1][0],
            confusion[0][0],
            confusion[0][1],
        );
        let div = |a: u64, b: u64| {
            if b == 0 {
                None
            } else {
                Some(a as f64 / b as f64)
            }
        };
        let precision = div(tp, tp + fp);
        let recall = div(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r != 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        let expected = (
            div(tp + tn, n as u64),
            recall,
            precision,
            f1,
            div(fp, fp + tn),
        );
        let actual = (got.acc, got.recall, got.precision, got.f1, got.fpr);
        ensure(
            (got.tp, got.fp, got.tn, got.fn_) == (tp, fp, tn, fn_),
            || format!("case {case}: counts differ"),
        )?;
        ensure(actual == expected, || {
            format!("case {case}: {actual:?} != {expected:?}")
        })?;
        if [precision, recall, f1, expected.4].contains(&None) {
            undefined_seen += 1;
        }
    }
    Ok(format!(
        "1000 vectors, exact match ({undefined_seen} with an undefined ratio)"
    ))
}

/// Criterion 7: a second full run reproduces the first bit for bit.
fn determinism(first: &Run) -> Outcome {
    let second = criterion5_run()?;
    ensure(second.model_bytes == first.model_bytes, || {
        "model files differ".into()
    })?;
    ensure(second.metrics_json == first.metrics_json, || {
        "metrics JSON differs".into()
    })?;
    Ok(format!(
        "model files ({} bytes) and metrics JSON identical",
        first.model_bytes.len()
    ))
}

/// Criterion 8: the compiled `safeTransferFrom` contract survives the
/// whole graph pipeline with its function node intact.
fn safe_transfer_from_regression() -> Outcome {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/safe_transfer_from.ast.json");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let tree = parse_ast_json(&text).map_err(|e| e.to_string())?;
    let rules = RuleTable::default();
    let tuples = extract_node_tuples(&tree, &rules);
    let edges = extract_edges(&tree, &tuples);
    let graph = build_graph(&tree, &tuples, &edges).map_err(|e| e.to_string())?;
    let pruned = optimize_graph(&graph, &rules.label_set()).map_err(|e| e.to_string())?;
    let vocab = build_vocabulary(&[pruned.node_tuples()], 64, 42).map_err(|e| e.to_string())?;
    let embedded = embed_nodes(&pruned, &vocab);
    let normalized = normalize(&embedded).map_err(|e| e.to_string())?;
    let hit = embedded.nodes.iter().find(|n| {
        n.name == "safeTransferFrom"
            && n.category == DependencyCategory::Function
            && n.n_type == "FunctionDefinition"
    });
    ensure(hit.is_some(), || {
        "no Function node named safeTransferFrom".into()
    })?;
    ensure(
        normalized.s_hat.is_finite() && normalized.len() == embedded.len(),
        || "normalized graph malformed".into(),
    )?;
    Ok(format!(
        "{} AST nodes → {} graph nodes → {} after pruning; safeTransferFrom present",
        tree.len(),
        graph.len(),
        pruned.len()
    ))
}

fn main() {
    let mut failures = 0;
    let mut report =
        |id: u32, name: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
            let start = Instant::now();
            let mut outcome = f();
            let elapsed = start.elapsed();
            if let (Ok(detail), Some(limit)) = (&outcome, limit) {
                if elapsed > limit {
                    outcome = Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"));
                }
            }
            let (tag, detail) = match &outcome {
                Ok(d) => ("PASS", d.as_str()),
                Err(d) => ("FAIL", d.as_str()),
            };
            if outcome.is_err() {
                failures += 1;
            }
            println!("[{tag}] criterion {id}: {name}: {detail} ({elapsed:.2?})");
        };

    report(
        1,
        "normalization oracle",
        Some(Duration::from_secs(5)),
        &mut normalization_oracle,
    );
    report(
        2,
        "gradient check",
        Some(Duration::from_secs(30)),
        &mut gradient_check,
    );
    report(
        3,
        "pruning invariants",
        Some(Duration::from_secs(5)),
        &mut pruning_invariants,
    );
    report(
        4,
        "permutation invariance",
        None,
        &mut permutation_invariance,
    );

    // Criterion 7 reruns criterion 5 and compares against its artifacts.
    let mut first = Err("criterion 5 did not run".to_owned());
    report(
        5,
        "end-to-end separability",
        Some(Duration::from_secs(120)),
        &mut || {
            first = criterion5_run();
            separability(first.as_ref().map_err(Clone::clone)?)
        },
    );
    report(6, "metrics oracle", None, &mut metrics_oracle);
    report(7, "determinism", None, &mut || {
        determinism(first.as_ref().map_err(Clone::clone)?)
    });
    report(
        8,
        "safeTransferFrom regression",
        None,
        &mut safe_transfer_from_regression,
    );

    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
