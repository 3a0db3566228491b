use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::SparseRowMatrix;
use crate::metrics::MetricSpec;
use crate::prediction::PredictionRow;

use super::select::{top_k_dense, top_k_pairs};
use super::{check_dims, InferenceConfig, InferenceReport, Shortlist};

/// Plain top-`k` on the probabilities.
pub fn topk_infer(probs: &SparseRowMatrix, cfg: &InferenceConfig) -> Result<InferenceReport> {
    let m = probs.n_cols();
    weighted_topk_infer(probs, &vec![1.0; m], &vec![0.0; m], cfg)
}

/// Instance-wise selection with gains `eta_j * w11[j] + w01[j]`.
///
/// `w11` and `w01` are the effective coefficients of a utility that is
/// linear in the per-label confusion entries: the weight on the expected
/// true positive and the constant paid for predicting the label.
pub fn weighted_topk_infer(
    probs: &SparseRowMatrix,
    w11: &[f64],
    w01: &[f64],
    cfg: &InferenceConfig,
) -> Result<InferenceReport> {
    let start = Instant::now();
    check_dims(probs, cfg)?;
    let m = probs.n_cols();
    if w11.len() != m || w01.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} / {} weights for {m} labels",
            w11.len(),
            w01.len()
        )));
    }
    let k = cfg.k;
    let shortlist = (cfg.k_prime > 0).then(|| Shortlist::build(probs, cfg.k_prime));
    let eff = shortlist.as_ref().map_or(probs, Shortlist::probs);
    // Only labels with a positive gain can beat an unlisted label.
    let sparse_ok = w01.iter().all(|&b| b == 0.0) && w11.iter().all(|&a| a >= 0.0);

    let rows: Vec<(PredictionRow, f64)> = (0..eff.n_rows())
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new(), vec![0.0; m]),
            |(pool, scratch, dense), i| {
                let row = eff.row(i);
                let gain = |j: u32, eta: f64| eta * w11[j as usize] + w01[j as usize];
                let pred = if let Some(s) = &shortlist {
                    pool.clear();
                    pool.extend(s.candidates(i).iter().map(|&j| (j, gain(j, row.get(j)))));
                    top_k_pairs(pool, k)
                } else if sparse_ok {
                    let weighted: Vec<(u32, f64)> = row
                        .iter()
                        .map(|(j, eta)| (j, gain(j, eta)))
                        .filter(|&(_, g)| g > 0.0)
                        .collect();
                    super::select_top_k_sparse(&weighted, k, m).expect("k <= m")
                } else {
                    row.scatter(dense);
                    let gains: Vec<f64> = (0..m as u32).map(|j| gain(j, dense[j as usize])).collect();
                    row.clear(dense);
                    top_k_dense(&gains, k, scratch)
                };
                let value: f64 = pred.labels().iter().map(|&j| gain(j, row.get(j))).sum();
                (pred, value)
            },
        )
        .collect();

    let n = rows.len().max(1) as f64;
    let value = rows.iter().map(|(_, v)| v).sum::<f64>() / n;
    Ok(InferenceReport {
        predictions: rows.into_iter().map(|(p, _)| p).collect(),
        initial_objective: None,
        objective_trace: vec![value],
        passes: 1,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Per-label `(w11, w01)` coefficients of a linear metric at the given
/// expected positive rates, ready for [`weighted_topk_infer`].
pub fn linear_gain_weights(
    metric: &MetricSpec,
    q_hat: &[f64],
    k: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = q_hat.len();
    metric.check_labels(m)?;
    let mut w11 = Vec::with_capacity(m);
    let mut w01 = Vec::with_capacity(m);
    for (j, &q) in q_hat.iter().enumerate() {
        let (a, b) = metric.linear_coefficients(j, q, m, k).ok_or_else(|| {
            Error::Capability(format!("{} is not linear in the confusion entries", metric.name()))
        })?;
        w11.push(a);
        w01.push(b);
    }
    Ok((w11, w01))
}
