//! Exhaustive optimizers and checkers for small instances.

use crate::error::{Error, Result};
use crate::inference::{etu_objective_exact, semi_etu_objective};
use crate::matrix::SparseRowMatrix;
use crate::metrics::{task_utility, MetricSpec};
use crate::prediction::{check_predictions, PredictionRow};
use crate::stats::{FailureProbVector, RunningStats};

/// Largest number of prediction matrices the semi-empirical oracle enumerates.
pub const SEMI_ETU_LIMIT: f64 = 1e7;
/// Largest number of prediction matrices the exact oracle enumerates.
pub const ETU_LIMIT: f64 = 1e5;
/// Largest `n` the exact oracle accepts.
pub const ETU_MAX_ROWS: usize = 12;
/// Largest `n * m` for full enumeration of label matrices.
pub const FULL_ENUMERATION_MAX_CELLS: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub best_preds: Vec<PredictionRow>,
    pub best_value: f64,
    pub candidates_evaluated: u64,
}

/// All `k`-subsets of `0..m` in lexicographic order.
pub fn combinations(m: usize, k: usize) -> Vec<PredictionRow> {
    let mut out = Vec::new();
    if k > m {
        return out;
    }
    let mut idx: Vec<u32> = (0..k as u32).collect();
    loop {
        out.push(PredictionRow::from_sorted_unchecked(idx.clone()));
        let Some(pos) = (0..k).rev().find(|&p| idx[p] as usize != m - k + p) else {
            return out;
        };
        idx[pos] += 1;
        for p in pos + 1..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
}

fn binomial(m: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

fn guard(probs: &SparseRowMatrix, k: usize, limit: f64) -> Result<Vec<PredictionRow>> {
    let m = probs.n_cols();
    if k == 0 || k > m {
        return Err(Error::Config(format!("k = {k} must be in 1..={m}")));
    }
    let total = binomial(m, k).powi(probs.n_rows() as i32);
    if total > limit {
        return Err(Error::Capability(format!(
            "{total:.3e} prediction matrices exceed the oracle limit {limit:.0e}"
        )));
    }
    Ok(combinations(m, k))
}

/// Visits every prediction matrix in lexicographic order, row 0 most
/// significant, keeping the first maximum.
fn search(
    n: usize,
    rows: &[PredictionRow],
    mut value: impl FnMut(&[usize]) -> f64,
) -> (Vec<usize>, f64, u64) {
    let mut choice = vec![0usize; n];
    let mut best = (choice.clone(), f64::NEG_INFINITY);
    let mut evaluated = 0u64;
    loop {
        let v = value(&choice);
        evaluated += 1;
        if v > best.1 || evaluated == 1 {
            best = (choice.clone(), v);
        }
        let Some(pos) = (0..n).rev().find(|&i| choice[i] + 1 < rows.len()) else {
            return (best.0, best.1, evaluated);
        };
        choice[pos] += 1;
        for c in &mut choice[pos + 1..] {
            *c = 0;
        }
    }
}

/// Exhaustive maximum of the semi-empirical objective.
pub fn brute_force_semi_etu(probs: &SparseRowMatrix, metric: &MetricSpec, k: usize) -> Result<OracleResult> {
    metric.check_labels(probs.n_cols())?;
    let rows = guard(probs, k, SEMI_ETU_LIMIT)?;
    let n = probs.n_rows();
    let q = RunningStats::q_hat_of(probs);
    let (choice, best_value, candidates_evaluated) = search(n, &rows, |choice| {
        let mut stats = RunningStats::with_q_hat(n, q.clone());
        for (i, &c) in choice.iter().enumerate() {
            stats.add_row(probs.row(i), &rows[c]);
        }
        metric.objective(&stats, k)
    });
    Ok(OracleResult {
        best_preds: choice.iter().map(|&c| rows[c].clone()).collect(),
        best_value,
        candidates_evaluated,
    })
}

/// Exhaustive maximum of the exact expected utility.
pub fn brute_force_etu(probs: &SparseRowMatrix, metric: &MetricSpec, k: usize) -> Result<OracleResult> {
    let (n, m) = (probs.n_rows(), probs.n_cols());
    metric.check_labels(m)?;
    if n > ETU_MAX_ROWS {
        return Err(Error::Capability(format!(
            "exact oracle needs n <= {ETU_MAX_ROWS}, got {n}"
        )));
    }
    let rows = guard(probs, k, ETU_LIMIT)?;
    // Expected utility of label j depends only on which rows predict it.
    let columns: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..n).map(|i| probs.get(i, j as u32)).collect())
        .collect();
    let mut cache: Vec<Vec<Option<f64>>> = vec![vec![None; 1 << n]; m];
    let mut masks = vec![0u32; m];
    let (choice, best_value, candidates_evaluated) = search(n, &rows, |choice| {
        masks.fill(0);
        for (i, &c) in choice.iter().enumerate() {
            for &j in rows[c].labels() {
                masks[j as usize] |= 1 << i;
            }
        }
        (0..m)
            .map(|j| {
                *cache[j][masks[j] as usize].get_or_insert_with(|| {
                    crate::inference::label_expectation(metric, j, &columns[j], masks[j], m, k)
                })
            })
            .sum()
    });
    Ok(OracleResult {
        best_preds: choice.iter().map(|&c| rows[c].clone()).collect(),
        best_value,
        candidates_evaluated,
    })
}

/// Whether no single row can be replaced to strictly increase the objective.
///
/// The objective is the semi-empirical one, except for coverage, where the
/// exact closed form is used since that is what coverage inference climbs.
pub fn local_opt_check(
    probs: &SparseRowMatrix,
    preds: &[PredictionRow],
    metric: &MetricSpec,
    k: usize,
) -> Result<bool> {
    let m = probs.n_cols();
    metric.check_labels(m)?;
    let got = check_predictions(preds, probs.n_rows())?;
    if got != k && !preds.is_empty() {
        return Err(Error::Validation(format!("predictions have {got} labels per row, k = {k}")));
    }
    let rows = combinations(m, k);
    let tolerance = |base: f64| 1e-12 * base.abs().max(1.0);
    if matches!(metric, MetricSpec::Coverage) {
        let f = FailureProbVector::from_scratch(probs, preds)?;
        let base = f.expected_coverage();
        for (i, pred) in preds.iter().enumerate() {
            for cand in &rows {
                let mut g = f.clone();
                g.swap_row(probs.row(i), pred, cand);
                if g.expected_coverage() > base + tolerance(base) {
                    return Ok(false);
                }
            }
        }
        return Ok(true);
    }
    let stats = RunningStats::from_scratch(probs, preds)?;
    let base = metric.objective(&stats, k);
    for (i, pred) in preds.iter().enumerate() {
        for cand in &rows {
            let value = metric.objective(&stats.swapped(probs.row(i), pred, cand), k);
            if value > base + tolerance(base) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Expected task utility by summing over every binary label matrix, each
/// weighted by its probability under independent labels.
pub fn expected_utility_full_enumeration(
    probs: &SparseRowMatrix,
    preds: &[PredictionRow],
    metric: &MetricSpec,
) -> Result<f64> {
    let (n, m) = (probs.n_rows(), probs.n_cols());
    if n * m > FULL_ENUMERATION_MAX_CELLS {
        return Err(Error::Capability(format!(
            "full enumeration needs n*m <= {FULL_ENUMERATION_MAX_CELLS}, got {}",
            n * m
        )));
    }
    let cells: Vec<f64> = (0..n)
        .flat_map(|i| (0..m).map(move |j| probs.get(i, j as u32)))
        .collect();
    let mut total = 0.0;
    for mask in 0u32..1 << (n * m) {
        let mut prob = 1.0;
        let mut rows = vec![Vec::new(); n];
        for (c, &e) in cells.iter().enumerate() {
            if mask >> c & 1 == 1 {
                prob *= e;
                rows[c / m].push(((c % m) as u32, 1.0));
            } else {
                prob *= 1.0 - e;
            }
        }
        if prob == 0.0 {
            continue;
        }
        let labels = SparseRowMatrix::from_rows(m, rows)?;
        total += prob * task_utility(metric, &labels, preds)?;
    }
    Ok(total)
}

/// Both objectives of `preds`, for reporting: `(semi, exact)`.
pub fn objective_pair(
    probs: &SparseRowMatrix,
    preds: &[PredictionRow],
    metric: &MetricSpec,
) -> Result<(f64, f64)> {
    Ok((
        semi_etu_objective(probs, preds, metric)?,
        etu_objective_exact(probs, preds, metric)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_order() {
        let rows: Vec<Vec<u32>> = combinations(4, 2).iter().map(|r| r.labels().to_vec()).collect();
        assert_eq!(
            rows,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(combinations(3, 3).len(), 1);
    }

    #[test]
    fn forced_when_k_equals_m() {
        let probs = SparseRowMatrix::from_dense(&[vec![0.2, 0.4], vec![0.9, 0.1]]);
        let r = brute_force_semi_etu(&probs, &MetricSpec::MacroPrecision, 2).unwrap();
        assert_eq!(r.candidates_evaluated, 1);
        assert!(local_opt_check(&probs, &r.best_preds, &MetricSpec::MacroPrecision, 2).unwrap());
    }

    #[test]
    fn guards() {
        let probs = SparseRowMatrix::empty(10, 20);
        assert!(matches!(
            brute_force_semi_etu(&probs, &MetricSpec::MacroPrecision, 2),
            Err(Error::Capability(_))
        ));
        let probs = SparseRowMatrix::empty(13, 2);
        assert!(matches!(
            brute_force_etu(&probs, &MetricSpec::MacroPrecision, 1),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn perturbed_optimum_is_not_local() {
        let probs = SparseRowMatrix::from_dense(&[vec![0.9, 0.8, 0.0], vec![0.7, 0.6, 0.0]]);
        let metric = MetricSpec::InstancePrecisionAtK;
        let best = brute_force_semi_etu(&probs, &metric, 1).unwrap();
        assert!(local_opt_check(&probs, &best.best_preds, &metric, 1).unwrap());
        let mut bad = best.best_preds.clone();
        bad[0] = PredictionRow::new(vec![2], 3).unwrap();
        assert!(!local_opt_check(&probs, &bad, &metric, 1).unwrap());
    }

    #[test]
    fn coverage_full_enumeration_matches_closed_form() {
        let probs = SparseRowMatrix::from_dense(&[vec![0.7, 0.2]]);
        let preds = vec![PredictionRow::new(vec![0], 2).unwrap()];
        let v = expected_utility_full_enumeration(&probs, &preds, &MetricSpec::Coverage).unwrap();
        assert!((v - 0.35).abs() < 1e-12);
    }
}
