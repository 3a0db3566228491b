use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::SparseRowMatrix;
use crate::metrics::{LabelState, MetricSpec};
use crate::prediction::{check_predictions, PredictionRow};
use crate::stats::RunningStats;

use super::select::{top_k_dense, top_k_pairs};
use super::shortlist::merge_sorted;
use super::{check_dims, initial_predictions, rng_for, InferenceConfig, InferenceReport, Shortlist};

/// Block coordinate ascent on the semi-empirical objective, starting from
/// `cfg.init`.
pub fn bca_infer(
    probs: &SparseRowMatrix,
    metric: &MetricSpec,
    cfg: &InferenceConfig,
) -> Result<InferenceReport> {
    let start = Instant::now();
    check_bca(probs, metric, cfg)?;
    let shortlist = (cfg.k_prime > 0).then(|| Shortlist::build(probs, cfg.k_prime));
    let eff = shortlist.as_ref().map_or(probs, Shortlist::probs);
    let mut rng = rng_for(cfg);
    let init = initial_predictions(eff, cfg, &mut rng);
    ascend(eff, shortlist.as_ref(), metric, cfg, init, rng, start)
}

/// Block coordinate ascent from the given predictions.
pub fn bca_infer_from(
    probs: &SparseRowMatrix,
    metric: &MetricSpec,
    cfg: &InferenceConfig,
    init: Vec<PredictionRow>,
) -> Result<InferenceReport> {
    let start = Instant::now();
    check_bca(probs, metric, cfg)?;
    check_start(&init, probs, cfg.k)?;
    let shortlist = (cfg.k_prime > 0).then(|| Shortlist::build(probs, cfg.k_prime));
    let eff = shortlist.as_ref().map_or(probs, Shortlist::probs);
    ascend(eff, shortlist.as_ref(), metric, cfg, init, rng_for(cfg), start)
}

fn check_bca(probs: &SparseRowMatrix, metric: &MetricSpec, cfg: &InferenceConfig) -> Result<()> {
    check_dims(probs, cfg)?;
    metric.check_labels(probs.n_cols())?;
    if !metric.supports_bca() {
        return Err(Error::Capability(format!(
            "{} is not supported by block coordinate ascent; use the coverage strategies",
            metric.name()
        )));
    }
    Ok(())
}

pub(crate) fn check_start(init: &[PredictionRow], probs: &SparseRowMatrix, k: usize) -> Result<()> {
    let got = check_predictions(init, probs.n_rows())?;
    if !init.is_empty() && got != k {
        return Err(Error::Validation(format!("start predictions have {got} labels per row, k = {k}")));
    }
    if let Some(&j) = init.iter().filter_map(|p| p.labels().last()).max() {
        if j as usize >= probs.n_cols() {
            return Err(Error::DimensionMismatch(format!(
                "start label {j} >= {} labels",
                probs.n_cols()
            )));
        }
    }
    Ok(())
}

fn state(stats: &RunningStats, j: usize) -> LabelState {
    LabelState {
        t: stats.t_hat(j),
        count: stats.count(j),
        q: stats.q_hat(j),
    }
}

fn ascend(
    probs: &SparseRowMatrix,
    shortlist: Option<&Shortlist>,
    metric: &MetricSpec,
    cfg: &InferenceConfig,
    mut preds: Vec<PredictionRow>,
    mut rng: ChaCha8Rng,
    start: Instant,
) -> Result<InferenceReport> {
    let (n, m, k) = (probs.n_rows(), probs.n_cols(), cfg.k);
    let mut stats = RunningStats::from_scratch(probs, &preds)?;
    let initial = metric.objective(&stats, k);

    let mut eta = vec![0.0; m];
    let mut predicted = vec![false; m];
    let mut gains = vec![0.0; m];
    let mut scratch = Vec::new();
    let mut labels = Vec::new();
    let mut pool = Vec::new();
    let mut order: Vec<usize> = Vec::with_capacity(n);

    let mut trace = Vec::new();
    let mut u_old = f64::NEG_INFINITY;
    let mut u_new = initial;
    while u_new > u_old + cfg.epsilon && trace.len() < cfg.max_passes {
        order.clear();
        order.extend(0..n);
        order.shuffle(&mut rng);
        for &i in &order {
            let row = probs.row(i);
            let current = &preds[i];
            let next = match shortlist {
                None => {
                    row.scatter(&mut eta);
                    for &j in current.labels() {
                        predicted[j as usize] = true;
                    }
                    for (j, g) in gains.iter_mut().enumerate() {
                        *g = metric.gain(j, state(&stats, j), eta[j], predicted[j], n, m, k);
                    }
                    for &j in current.labels() {
                        predicted[j as usize] = false;
                    }
                    row.clear(&mut eta);
                    top_k_dense(&gains, k, &mut scratch)
                }
                Some(s) => {
                    merge_sorted(s.candidates(i), current.labels(), &mut labels);
                    pool.clear();
                    pool.extend(labels.iter().map(|&j| {
                        let on = current.contains(j);
                        let g = metric.gain(j as usize, state(&stats, j as usize), row.get(j), on, n, m, k);
                        (j, g)
                    }));
                    top_k_pairs(&mut pool, k)
                }
            };
            if next != preds[i] {
                stats.swap_row(row, &preds[i], &next);
                preds[i] = next;
            }
        }
        u_old = u_new;
        u_new = metric.objective(&stats, k);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{topk_infer, Init};

    #[test]
    fn instance_precision_takes_two_passes() {
        let probs = SparseRowMatrix::from_dense(&[
            vec![0.1, 0.7, 0.3, 0.5],
            vec![0.6, 0.2, 0.9, 0.05],
            vec![0.3, 0.3, 0.1, 0.8],
        ]);
        let mut cfg = InferenceConfig::new(2);
        cfg.epsilon = 0.0;
        cfg.seed = 3;
        let report = bca_infer(&probs, &MetricSpec::InstancePrecisionAtK, &cfg).unwrap();
        assert_eq!(report.passes, 2);
        assert_eq!(report.predictions, topk_infer(&probs, &cfg).unwrap().predictions);
    }

    #[test]
    fn coverage_is_rejected() {
        let probs = SparseRowMatrix::from_dense(&[vec![0.1, 0.7]]);
        let err = bca_infer(&probs, &MetricSpec::Coverage, &InferenceConfig::new(1)).unwrap_err();
        assert!(matches!(err, Error::Capability(_)));
    }

    #[test]
    fn top_k_init_start() {
        let probs = SparseRowMatrix::from_dense(&[vec![0.1, 0.7, 0.2], vec![0.4, 0.3, 0.2]]);
        let mut cfg = InferenceConfig::new(1);
        cfg.init = Init::TopK;
        let report = bca_infer(&probs, &MetricSpec::InstancePrecisionAtK, &cfg).unwrap();
        assert_eq!(report.passes, 1);
    }
}
