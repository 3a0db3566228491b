#![allow(dead_code)]

use etuk::{LabelTree, LabelWeights, MetricSpec, PredictionRow, SparseRowMatrix};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense probabilities drawn uniformly from `(0.01, 0.99)`.
pub fn dense_probs(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SparseRowMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(0.01..0.99)).collect())
        .collect();
    SparseRowMatrix::from_dense(&rows)
}

/// Probabilities where each entry is zero with probability `1 - density`.
pub fn sparse_probs(rng: &mut ChaCha8Rng, n: usize, m: usize, density: f64) -> SparseRowMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| if rng.random_bool(density) { rng.random_range(0.01..0.99) } else { 0.0 })
                .collect()
        })
        .collect();
    SparseRowMatrix::from_dense(&rows)
}

pub fn random_row(rng: &mut ChaCha8Rng, m: usize, k: usize) -> PredictionRow {
    let labels: Vec<u32> = rand::seq::index::sample(rng, m, k)
        .into_iter()
        .map(|j| j as u32)
        .collect();
    PredictionRow::new(labels, m).unwrap()
}

pub fn random_preds(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize) -> Vec<PredictionRow> {
    (0..n).map(|_| random_row(rng, m, k)).collect()
}

pub fn random_weighted(rng: &mut ChaCha8Rng, m: usize) -> MetricSpec {
    MetricSpec::weighted(
        (0..m)
            .map(|_| LabelWeights {
                w00: rng.random_range(0.0..1.0),
                w01: rng.random_range(-1.0..0.5),
                w10: rng.random_range(-1.0..0.5),
                w11: rng.random_range(0.0..2.0),
            })
            .collect(),
    )
}

/// A random tree over `m` labels with depth at most `max_depth`.
pub fn random_tree(rng: &mut ChaCha8Rng, m: usize, max_depth: usize) -> LabelTree {
    let mut labels: Vec<u32> = (0..m as u32).collect();
    labels.shuffle(rng);
    let mut parent = vec![None];
    let mut leaves = Vec::new();
    grow(rng, &labels, 0, 0, max_depth, &mut parent, &mut leaves);
    LabelTree::new(parent, &leaves, m).unwrap()
}

fn grow(
    rng: &mut ChaCha8Rng,
    labels: &[u32],
    node: u32,
    depth: usize,
    max_depth: usize,
    parent: &mut Vec<Option<u32>>,
    leaves: &mut Vec<(u32, u32)>,
) {
    if labels.len() == 1 {
        leaves.push((node, labels[0]));
        return;
    }
    let add = |parent: &mut Vec<Option<u32>>| {
        parent.push(Some(node));
        (parent.len() - 1) as u32
    };
    if depth + 1 >= max_depth {
        for &l in labels {
            let c = add(parent);
            leaves.push((c, l));
        }
        return;
    }
    let parts = rng.random_range(2..=labels.len().min(4));
    let mut cuts: Vec<usize> = rand::seq::index::sample(rng, labels.len() - 1, parts - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    cuts.insert(0, 0);
    cuts.push(labels.len());
    for w in cuts.windows(2) {
        let c = add(parent);
        grow(rng, &labels[w[0]..w[1]], c, depth + 1, max_depth, parent, leaves);
    }
}

pub fn non_decreasing(trace: &[f64], start: Option<f64>) -> bool {
    let mut prev = start.unwrap_or(f64::NEG_INFINITY);
    for &v in trace {
        if v < prev - 1e-12 * prev.abs().max(1.0) {
            return false;
        }
        prev = v;
    }
    true
}
