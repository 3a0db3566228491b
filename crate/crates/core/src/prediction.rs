use crate::error::{Error, Result};

/// The `k` labels predicted for one instance, kept sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredictionRow {
    labels: Vec<u32>,
}

impl PredictionRow {
    /// Validates that labels are distinct and below `n_cols`; sorts them.
    pub fn new(mut labels: Vec<u32>, n_cols: usize) -> Result<Self> {
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!(
                "duplicate label in prediction {labels:?}"
            )));
        }
        if let Some(&last) = labels.last() {
            if last as usize >= n_cols {
                return Err(Error::Validation(format!(
                    "label {last} out of range (n_cols = {n_cols})"
                )));
            }
        }
        Ok(PredictionRow { labels })
    }

    /// Caller guarantees `labels` is sorted, distinct and in range.
    pub(crate) fn from_sorted_unchecked(labels: Vec<u32>) -> Self {
        debug_assert!(labels.windows(2).all(|w| w[0] < w[1]));
        PredictionRow { labels }
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn contains(&self, label: u32) -> bool {
        self.labels.binary_search(&label).is_ok()
    }
}

/// Checks that every row has exactly `k` labels and the row count matches.
pub(crate) fn check_predictions(preds: &[PredictionRow], n_rows: usize) -> Result<usize> {
    if preds.len() != n_rows {
        return Err(Error::DimensionMismatch(format!(
            "{} prediction rows for {n_rows} instances",
            preds.len()
        )));
    }
    let k = preds.first().map_or(0, PredictionRow::k);
    if let Some((i, row)) = preds.iter().enumerate().find(|(_, r)| r.k() != k) {
        return Err(Error::Validation(format!(
            "prediction row {i} has {} labels, expected {k}",
            row.k()
        )));
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_and_validates() {
        let row = PredictionRow::new(vec![4, 1, 3], 5).unwrap();
        assert_eq!(row.labels(), &[1, 3, 4]);
        assert_eq!(row.k(), 3);
        assert!(row.contains(3));
        assert!(!row.contains(2));
        assert!(PredictionRow::new(vec![1, 1], 5).is_err());
        assert!(PredictionRow::new(vec![5], 5).is_err());
    }

    #[test]
    fn budget_check() {
        let rows = vec![
            PredictionRow::new(vec![0, 1], 3).unwrap(),
            PredictionRow::new(vec![2], 3).unwrap(),
        ];
        assert!(check_predictions(&rows, 2).is_err());
        assert!(check_predictions(&rows[..1], 2).is_err());
        assert_eq!(check_predictions(&rows[..1], 1).unwrap(), 2);
    }
}
