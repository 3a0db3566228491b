//! Semi-empirical per-label quantities and their incremental updates.

use crate::error::{Error, Result};
use crate::matrix::{SparseRow, SparseRowMatrix};
use crate::prediction::{check_predictions, PredictionRow};

/// Expected true positives `t_hat`, predicted positives `p` and expected
/// positives `q_hat` per label, all in units of `1/n`.
///
/// `p` is held as an integer count so that removing the last prediction of a
/// label yields exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    n: usize,
    inv_n: f64,
    t_hat: Vec<f64>,
    counts: Vec<u32>,
    q_hat: Vec<f64>,
}

impl RunningStats {
    /// Stats with no predictions and the given expected positive rates.
    pub fn with_q_hat(n: usize, q_hat: Vec<f64>) -> Self {
        let m = q_hat.len();
        RunningStats {
            n,
            inv_n: 1.0 / n.max(1) as f64,
            t_hat: vec![0.0; m],
            counts: vec![0; m],
            q_hat,
        }
    }

    /// Expected positive rates `q_hat[j] = (1/n) sum_i eta_ij`.
    pub fn q_hat_of(probs: &SparseRowMatrix) -> Vec<f64> {
        let inv_n = 1.0 / probs.n_rows().max(1) as f64;
        let mut q = vec![0.0; probs.n_cols()];
        for row in probs.rows() {
            for (j, v) in row.iter() {
                q[j as usize] += inv_n * v;
            }
        }
        q
    }

    /// Recomputes all quantities from the full prediction matrix.
    pub fn from_scratch(probs: &SparseRowMatrix, preds: &[PredictionRow]) -> Result<Self> {
        check_predictions(preds, probs.n_rows())?;
        let mut stats = Self::with_q_hat(probs.n_rows(), Self::q_hat_of(probs));
        for (i, pred) in preds.iter().enumerate() {
            if let Some(&j) = pred.labels().last() {
                if j as usize >= probs.n_cols() {
                    return Err(Error::DimensionMismatch(format!(
                        "prediction label {j} >= n_cols {}",
                        probs.n_cols()
                    )));
                }
            }
            stats.add_row(probs.row(i), pred);
        }
        Ok(stats)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_labels(&self) -> usize {
        self.q_hat.len()
    }

    pub fn t_hat(&self, j: usize) -> f64 {
        self.t_hat[j]
    }

    pub fn p(&self, j: usize) -> f64 {
        self.counts[j] as f64 / self.n.max(1) as f64
    }

    pub fn count(&self, j: usize) -> u32 {
        self.counts[j]
    }

    pub fn q_hat(&self, j: usize) -> f64 {
        self.q_hat[j]
    }

    pub fn q_hat_slice(&self) -> &[f64] {
        &self.q_hat
    }

    pub fn t_hat_slice(&self) -> &[f64] {
        &self.t_hat
    }

    pub fn p_vec(&self) -> Vec<f64> {
        (0..self.n_labels()).map(|j| self.p(j)).collect()
    }

    pub(crate) fn add_label(&mut self, j: usize, eta: f64) {
        self.counts[j] += 1;
        self.t_hat[j] += self.inv_n * eta;
    }

    pub(crate) fn remove_label(&mut self, j: usize, eta: f64) {
        self.counts[j] -= 1;
        self.t_hat[j] = if self.counts[j] == 0 {
            0.0
        } else {
            (self.t_hat[j] - self.inv_n * eta).max(0.0)
        };
    }

    pub fn add_row(&mut self, eta: SparseRow<'_>, pred: &PredictionRow) {
        for &j in pred.labels() {
            self.add_label(j as usize, eta.get(j));
        }
    }

    pub fn remove_row(&mut self, eta: SparseRow<'_>, pred: &PredictionRow) {
        for &j in pred.labels() {
            self.remove_label(j as usize, eta.get(j));
        }
    }

    /// Replaces one instance's prediction; only labels in the symmetric
    /// difference of `old` and `new` are touched.
    pub fn swap_row(&mut self, eta: SparseRow<'_>, old: &PredictionRow, new: &PredictionRow) {
        for_each_difference(old.labels(), new.labels(), |j, added| {
            let v = eta.get(j);
            if added {
                self.add_label(j as usize, v);
            } else {
                self.remove_label(j as usize, v);
            }
        });
    }

    /// Non-mutating form of [`RunningStats::swap_row`].
    pub fn swapped(&self, eta: SparseRow<'_>, old: &PredictionRow, new: &PredictionRow) -> Self {
        let mut next = self.clone();
        next.swap_row(eta, old, new);
        next
    }
}

/// Calls `f(label, added)` for every label in exactly one of the two sorted
/// slices; `added` is true when the label is only in `new`.
pub(crate) fn for_each_difference(old: &[u32], new: &[u32], mut f: impl FnMut(u32, bool)) {
    let (mut a, mut b) = (0, 0);
    while a < old.len() || b < new.len() {
        match (old.get(a), new.get(b)) {
            (Some(&x), Some(&y)) if x == y => {
                a += 1;
                b += 1;
            }
            (Some(&x), Some(&y)) if x < y => {
                f(x, false);
                a += 1;
            }
            (Some(_), Some(&y)) => {
                f(y, true);
                b += 1;
            }
            (Some(&x), None) => {
                f(x, false);
                a += 1;
            }
            (None, Some(&y)) => {
                f(y, true);
                b += 1;
            }
            (None, None) => unreachable!(),
        }
    }
}

/// Per-label probability that none of the instances a label was predicted
/// for is relevant: `f_j = prod_i (1 - eta_ij * y_ij)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FailureProbVector {
    f: Vec<f64>,
}

impl FailureProbVector {
    pub fn ones(m: usize) -> Self {
        FailureProbVector { f: vec![1.0; m] }
    }

    pub fn from_scratch(probs: &SparseRowMatrix, preds: &[PredictionRow]) -> Result<Self> {
        check_predictions(preds, probs.n_rows())?;
        let mut f = Self::ones(probs.n_cols());
        for (i, pred) in preds.iter().enumerate() {
            f.add_row(probs.row(i), pred);
        }
        Ok(f)
    }

    pub fn get(&self, j: usize) -> f64 {
        self.f[j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.f
    }

    pub fn add_row(&mut self, eta: SparseRow<'_>, pred: &PredictionRow) {
        for &j in pred.labels() {
            self.include(j as usize, eta.get(j));
        }
    }

    pub(crate) fn include(&mut self, j: usize, eta: f64) {
        self.f[j] = (self.f[j] * (1.0 - eta)).clamp(0.0, 1.0);
    }

    pub(crate) fn exclude(&mut self, j: usize, eta: f64) {
        self.f[j] = (self.f[j] / (1.0 - eta)).clamp(0.0, 1.0);
    }

    pub fn swap_row(&mut self, eta: SparseRow<'_>, old: &PredictionRow, new: &PredictionRow) {
        for_each_difference(old.labels(), new.labels(), |j, added| {
            let v = eta.get(j);
            if added {
                self.include(j as usize, v);
            } else {
                self.exclude(j as usize, v);
            }
        });
    }

    /// Expected coverage `1 - (1/m) sum_j f_j`.
    pub fn expected_coverage(&self) -> f64 {
        if self.f.is_empty() {
            return 0.0;
        }
        1.0 - self.f.iter().sum::<f64>() / self.f.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(labels: &[u32], m: usize) -> PredictionRow {
        PredictionRow::new(labels.to_vec(), m).unwrap()
    }

    #[test]
    fn from_scratch_hand_example() {
        let probs = SparseRowMatrix::from_dense(&[vec![0.9, 0.1], vec![0.6, 0.4]]);
        let preds = vec![row(&[0], 2), row(&[0], 2)];
        let s = RunningStats::from_scratch(&probs, &preds).unwrap();
        assert!((s.t_hat(0) - 0.75).abs() < 1e-15);
        assert_eq!(s.t_hat(1), 0.0);
        assert_eq!(s.p_vec(), vec![1.0, 0.0]);
        assert!((s.q_hat(0) - 0.75).abs() < 1e-15);
        assert!((s.q_hat(1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_probabilities_give_zero_t_and_q() {
        let probs = SparseRowMatrix::empty(3, 4);
        let preds = vec![row(&[0, 1], 4), row(&[2, 3], 4), row(&[1, 3], 4)];
        let s = RunningStats::from_scratch(&probs, &preds).unwrap();
        assert!(s.t_hat_slice().iter().all(|&t| t == 0.0));
        assert!(s.q_hat_slice().iter().all(|&q| q == 0.0));
        assert_eq!(s.count(3), 2);
    }

    #[test]
    fn dimension_mismatch() {
        let probs = SparseRowMatrix::empty(2, 3);
        assert!(RunningStats::from_scratch(&probs, &[row(&[0], 3)]).is_err());
    }

    #[test]
    fn swap_identity_and_locality() {
        let probs = SparseRowMatrix::from_dense(&[
            vec![0.2, 0.5, 0.7, 0.1],
            vec![0.9, 0.3, 0.0, 0.4],
        ]);
        let preds = vec![row(&[0, 2], 4), row(&[1, 3], 4)];
        let s = RunningStats::from_scratch(&probs, &preds).unwrap();
        assert_eq!(s.swapped(probs.row(0), &preds[0], &preds[0]), s);

        let moved = s.swapped(probs.row(1), &preds[1], &row(&[0, 3], 4));
        for j in [2usize, 3] {
            assert_eq!(moved.t_hat(j), s.t_hat(j));
            assert_eq!(moved.count(j), s.count(j));
        }
        assert_ne!(moved.count(0), s.count(0));
        assert_ne!(moved.count(1), s.count(1));
    }

    #[test]
    fn failure_probabilities() {
        let probs = SparseRowMatrix::from_dense(&[vec![0.6, 0.5], vec![0.6, 0.5]]);
        let preds = vec![row(&[0], 2), row(&[0], 2)];
        let f = FailureProbVector::from_scratch(&probs, &preds).unwrap();
        assert!((f.get(0) - 0.16).abs() < 1e-15);
        assert_eq!(f.get(1), 1.0);
        assert!((f.expected_coverage() - 0.42).abs() < 1e-15);

        let mut g = f.clone();
        g.swap_row(probs.row(1), &preds[1], &row(&[1], 2));
        assert!((g.get(0) - 0.4).abs() < 1e-12);
        assert!((g.get(1) - 0.5).abs() < 1e-12);
        assert!((g.expected_coverage() - 0.55).abs() < 1e-12);
    }
}
