use crate::error::{Error, Result};
use crate::matrix::SparseRowMatrix;
use crate::metrics::MetricSpec;
use crate::prediction::{check_predictions, PredictionRow};
use crate::stats::{FailureProbVector, RunningStats};

/// Largest `n` for which the exact expectation enumerates label columns.
pub const MAX_ENUMERATION_ROWS: usize = 20;

/// Task utility at the semi-empirical statistics of `preds`.
pub fn semi_etu_objective(
    probs: &SparseRowMatrix,
    preds: &[PredictionRow],
    metric: &MetricSpec,
) -> Result<f64> {
    metric.check_labels(probs.n_cols())?;
    let k = check_predictions(preds, probs.n_rows())?;
    let stats = RunningStats::from_scratch(probs, preds)?;
    Ok(metric.objective(&stats, k.max(1)))
}

/// Exact expected task utility when every label is an independent
/// Bernoulli draw with the given probability.
///
/// Coverage uses its product closed form; the other families enumerate the
/// `2^n` outcomes of each label column, which limits `n`.
pub fn etu_objective_exact(
    probs: &SparseRowMatrix,
    preds: &[PredictionRow],
    metric: &MetricSpec,
) -> Result<f64> {
    let m = probs.n_cols();
    metric.check_labels(m)?;
    let k = check_predictions(preds, probs.n_rows())?.max(1);
    if let Some(&j) = preds.iter().filter_map(|p| p.labels().last()).max() {
        if j as usize >= m {
            return Err(Error::DimensionMismatch(format!("prediction label {j} >= {m} labels")));
        }
    }
    exact(probs, preds, metric, k)
}

fn exact(probs: &SparseRowMatrix, preds: &[PredictionRow], metric: &MetricSpec, k: usize) -> Result<f64> {
    match metric {
        MetricSpec::Coverage => Ok(FailureProbVector::from_scratch(probs, preds)?.expected_coverage()),
        MetricSpec::Mixed { alpha, a, b } => {
            Ok((1.0 - alpha) * exact(probs, preds, a, k)? + alpha * exact(probs, preds, b, k)?)
        }
        _ => {
            let n = probs.n_rows();
            if n > MAX_ENUMERATION_ROWS {
                return Err(Error::Capability(format!(
                    "exact expectation enumerates 2^n outcomes; n = {n} > {MAX_ENUMERATION_ROWS}"
                )));
            }
            let m = probs.n_cols();
            let mut total = 0.0;
            for j in 0..m {
                let eta: Vec<f64> = (0..n).map(|i| probs.get(i, j as u32)).collect();
                let pred_mask = preds
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.contains(j as u32))
                    .fold(0u32, |acc, (i, _)| acc | (1 << i));
                total += label_expectation(metric, j, &eta, pred_mask, m, k);
            }
            Ok(total)
        }
    }
}

/// `E[psi^j]` over the `2^n` realizations of column `j`.
pub(crate) fn label_expectation(
    metric: &MetricSpec,
    j: usize,
    eta: &[f64],
    pred_mask: u32,
    m: usize,
    k: usize,
) -> f64 {
    let mass = outcome_mass(eta, pred_mask);
    let n = eta.len();
    let inv_n = 1.0 / n.max(1) as f64;
    let p = pred_mask.count_ones() as f64 * inv_n;
    let mut total = 0.0;
    for tp in 0..=n {
        for pos in tp..=n {
            let w = mass[tp * (n + 1) + pos];
            if w != 0.0 {
                total += w * metric.label_utility(j, tp as f64 * inv_n, p, pos as f64 * inv_n, m, k);
            }
        }
    }
    total
}

/// Probability of each `(true positives, positives)` pair, flattened as
/// `tp * (n + 1) + pos`.
fn outcome_mass(eta: &[f64], pred_mask: u32) -> Vec<f64> {
    let n = eta.len();
    let lo_bits = n / 2;
    let hi_bits = n - lo_bits;
    let table = |offset: usize, bits: usize| -> Vec<f64> {
        (0..1usize << bits)
            .map(|mask| {
                (0..bits)
                    .map(|b| {
                        let e = eta[offset + b];
                        if mask >> b & 1 == 1 {
                            e
                        } else {
                            1.0 - e
                        }
                    })
                    .product()
            })
            .collect()
    };
    let lo = table(0, lo_bits);
    let hi = table(lo_bits, hi_bits);
    let mut mass = vec![0.0; (n + 1) * (n + 1)];
    for (h, &ph) in hi.iter().enumerate() {
        if ph == 0.0 {
            continue;
        }
        for (l, &pl) in lo.iter().enumerate() {
            let mask = ((h << lo_bits) | l) as u32;
            let tp = (mask & pred_mask).count_ones() as usize;
            let pos = mask.count_ones() as usize;
            mass[tp * (n + 1) + pos] += ph * pl;
        }
    }
    mass
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(labels: &[u32], m: usize) -> PredictionRow {
        PredictionRow::new(labels.to_vec(), m).unwrap()
    }

    #[test]
    fn semi_etu_recall_example() {
        let probs = SparseRowMatrix::from_dense(&[vec![0.9, 0.1], vec![0.6, 0.4]]);
        let preds = vec![row(&[0], 2), row(&[0], 2)];
        let v = semi_etu_objective(&probs, &preds, &MetricSpec::MacroRecall).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn coverage_closed_form_example() {
        let probs = SparseRowMatrix::from_dense(&[vec![0.7, 0.2]]);
        let v = etu_objective_exact(&probs, &[row(&[0], 2)], &MetricSpec::Coverage).unwrap();
        assert!((v - 0.35).abs() < 1e-15);
    }

    #[test]
    fn mass_sums_to_one() {
        let mass = outcome_mass(&[0.3, 0.9, 0.5], 0b101);
        assert!((mass.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn too_many_rows() {
        let probs = SparseRowMatrix::empty(21, 2);
        let preds = vec![row(&[0], 2); 21];
        assert!(matches!(
            etu_objective_exact(&probs, &preds, &MetricSpec::MacroPrecision),
            Err(Error::Capability(_))
        ));
        assert!(etu_objective_exact(&probs, &preds, &MetricSpec::Coverage).is_ok());
    }
}
