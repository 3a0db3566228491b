use std::time::Instant;

use rand::seq::SliceRandom;

use crate::error::Result;
use crate::matrix::SparseRowMatrix;
use crate::prediction::PredictionRow;
use crate::stats::FailureProbVector;

use super::bca::check_start;
use super::select::{top_k_dense, top_k_pairs};
use super::shortlist::merge_sorted;
use super::{check_dims, initial_predictions, rng_for, InferenceConfig, InferenceReport, Shortlist};

/// Block coordinate ascent on the exact expected coverage.
pub fn bca_coverage_infer(probs: &SparseRowMatrix, cfg: &InferenceConfig) -> Result<InferenceReport> {
    bca_coverage(probs, cfg, None)
}

pub(crate) fn bca_coverage(
    probs: &SparseRowMatrix,
    cfg: &InferenceConfig,
    init: Option<Vec<PredictionRow>>,
) -> Result<InferenceReport> {
    let start = Instant::now();
    check_dims(probs, cfg)?;
    let shortlist = (cfg.k_prime > 0).then(|| Shortlist::build(probs, cfg.k_prime));
    let eff = shortlist.as_ref().map_or(probs, Shortlist::probs);
    let (n, m, k) = (eff.n_rows(), eff.n_cols(), cfg.k);
    let mut rng = rng_for(cfg);
    let mut preds = match init {
        Some(p) => {
            check_start(&p, probs, k)?;
            p
        }
        None => initial_predictions(eff, cfg, &mut rng),
    };
    let mut f = FailureProbVector::from_scratch(eff, &preds)?;
    let initial = f.expected_coverage();

    let mut eta = vec![0.0; m];
    let mut gains = vec![0.0; m];
    let mut scratch = Vec::new();
    let mut labels = Vec::new();
    let mut pool = Vec::new();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    // Gain of label j for a row: the chance it is the only hit,
    // eta * prod over the other rows of (1 - eta y).
    let gain = |f: &FailureProbVector, j: usize, e: f64, on: bool| {
        let others = if on { f.get(j) / (1.0 - e) } else { f.get(j) };
        e * others.min(1.0)
    };

    let mut trace = Vec::new();
    let mut u_old = f64::NEG_INFINITY;
    let mut u_new = initial;
    while u_new > u_old + cfg.epsilon && trace.len() < cfg.max_passes {
        order.clear();
        order.extend(0..n);
        order.shuffle(&mut rng);
        for &i in &order {
            let row = eff.row(i);
            let current = &preds[i];
            let next = match &shortlist {
                None => {
                    row.scatter(&mut eta);
                    for (j, g) in gains.iter_mut().enumerate() {
                        *g = gain(&f, j, eta[j], false);
                    }
                    for &j in current.labels() {
                        let j = j as usize;
                        gains[j] = gain(&f, j, eta[j], true);
                    }
                    row.clear(&mut eta);
                    top_k_dense(&gains, k, &mut scratch)
                }
                Some(s) => {
                    merge_sorted(s.candidates(i), current.labels(), &mut labels);
                    pool.clear();
                    pool.extend(
                        labels
                            .iter()
                            .map(|&j| (j, gain(&f, j as usize, row.get(j), current.contains(j)))),
                    );
                    top_k_pairs(&mut pool, k)
                }
            };
            if next != preds[i] {
                f.swap_row(row, &preds[i], &next);
                preds[i] = next;
            }
        }
        u_old = u_new;
        u_new = f.expected_coverage();
        trace.push(u_new);
    }

    Ok(InferenceReport {
        passes: trace.len(),
        predictions: preds,
        initial_objective: Some(initial),
        objective_trace: trace,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// One pass in row order, each row taking the `k` labels most likely to be
/// covered for the first time.
pub fn greedy_coverage_infer(probs: &SparseRowMatrix, cfg: &InferenceConfig) -> Result<InferenceReport> {
    let start = Instant::now();
    check_dims(probs, cfg)?;
    let shortlist = (cfg.k_prime > 0).then(|| Shortlist::build(probs, cfg.k_prime));
    let eff = shortlist.as_ref().map_or(probs, Shortlist::probs);
    let (n, m, k) = (eff.n_rows(), eff.n_cols(), cfg.k);
    let mut f = FailureProbVector::ones(m);
    let mut gains = vec![0.0; m];
    let mut scratch = Vec::new();
    let mut pool = Vec::new();
    let mut preds = Vec::with_capacity(n);
    for i in 0..n {
        let row = eff.row(i);
        let pred = match &shortlist {
            None => {
                gains.fill(0.0);
                for (j, e) in row.iter() {
                    gains[j as usize] = f.get(j as usize) * e;
                }
                top_k_dense(&gains, k, &mut scratch)
            }
            Some(s) => {
                pool.clear();
                pool.extend(s.candidates(i).iter().map(|&j| (j, f.get(j as usize) * row.get(j))));
                top_k_pairs(&mut pool, k)
            }
        };
        f.add_row(row, &pred);
        preds.push(pred);
    }
    Ok(InferenceReport {
        objective_trace: vec![f.expected_coverage()],
        predictions: preds,
        initial_objective: None,
        passes: 1,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
