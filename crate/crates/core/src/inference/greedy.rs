use std::time::Instant;

use crate::error::{Error, Result};
use crate::matrix::SparseRowMatrix;
use crate::metrics::{LabelState, MetricSpec};
use crate::stats::RunningStats;

use super::select::{top_k_dense, top_k_pairs};
use super::{check_dims, InferenceConfig, InferenceReport, Shortlist};

/// One pass in row order; each row is decided from the rows before it.
///
/// The history is normalized by the number of rows seen so far, including
/// the current one, whose probabilities already count towards `q`.
pub fn greedy_infer(
    probs: &SparseRowMatrix,
    metric: &MetricSpec,
    cfg: &InferenceConfig,
) -> Result<InferenceReport> {
    let start = Instant::now();
    check_dims(probs, cfg)?;
    metric.check_labels(probs.n_cols())?;
    if !metric.supports_bca() {
        return Err(Error::Capability(format!(
            "{} is not supported by greedy inference; use greedy-cov",
            metric.name()
        )));
    }
    let shortlist = (cfg.k_prime > 0).then(|| Shortlist::build(probs, cfg.k_prime));
    let eff = shortlist.as_ref().map_or(probs, Shortlist::probs);
    let (n, m, k) = (eff.n_rows(), eff.n_cols(), cfg.k);

    // Raw sums over the rows seen so far.
    let mut tp_sum = vec![0.0; m];
    let mut counts = vec![0u32; m];
    let mut q_sum = vec![0.0; m];
    let mut eta = vec![0.0; m];
    let mut gains = vec![0.0; m];
    let mut scratch = Vec::new();
    let mut pool = Vec::new();
    let mut preds = Vec::with_capacity(n);

    for i in 0..n {
        let row = eff.row(i);
        for (j, v) in row.iter() {
            q_sum[j as usize] += v;
        }
        let seen = i + 1;
        let inv = 1.0 / seen as f64;
        let gain = |j: usize, e: f64| {
            let s = LabelState {
                t: tp_sum[j] * inv,
                count: counts[j],
                q: q_sum[j] * inv,
            };
            metric.gain(j, s, e, false, seen, m, k)
        };
        let pred = match &shortlist {
            None => {
                row.scatter(&mut eta);
                for (j, g) in gains.iter_mut().enumerate() {
                    *g = gain(j, eta[j]);
                }
                row.clear(&mut eta);
                top_k_dense(&gains, k, &mut scratch)
            }
            Some(s) => {
                pool.clear();
                pool.extend(s.candidates(i).iter().map(|&j| (j, gain(j as usize, row.get(j)))));
                top_k_pairs(&mut pool, k)
            }
        };
        for &j in pred.labels() {
            tp_sum[j as usize] += row.get(j);
            counts[j as usize] += 1;
        }
        preds.push(pred);
    }

    let stats = RunningStats::from_scratch(eff, &preds)?;
    Ok(InferenceReport {
        objective_trace: vec![metric.objective(&stats, k)],
        predictions: preds,
        initial_objective: None,
        passes: 1,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
