use crate::matrix::SparseRowMatrix;

use super::select::better;

/// Per-row truncation to the `k'` most probable labels. Labels outside a
/// row's shortlist are treated as having probability zero.
#[derive(Clone, Debug)]
pub struct Shortlist {
    probs: SparseRowMatrix,
    stride: usize,
    candidates: Vec<u32>,
}

impl Shortlist {
    /// Keeps the `k_prime` largest entries of every row. Rows with fewer
    /// positive entries are filled up with zero-probability labels in index
    /// order, so every row has `min(k_prime, m)` candidates.
    pub fn build(probs: &SparseRowMatrix, k_prime: usize) -> Self {
        let m = probs.n_cols();
        let stride = k_prime.min(m);
        let mut candidates = Vec::with_capacity(stride * probs.n_rows());
        let mut rows = Vec::with_capacity(probs.n_rows());
        let mut entries: Vec<(u32, f64)> = Vec::new();
        for row in probs.rows() {
            entries.clear();
            entries.extend(row.iter().filter(|&(_, v)| v > 0.0));
            entries.sort_unstable_by(|a, b| better(*a, *b));
            entries.truncate(stride);

            let mut kept: Vec<u32> = entries.iter().map(|&(j, _)| j).collect();
            kept.sort_unstable();
            let missing = stride - kept.len();
            let mut pad = Vec::with_capacity(missing);
            let mut j = 0u32;
            while pad.len() < missing {
                if kept.binary_search(&j).is_err() {
                    pad.push(j);
                }
                j += 1;
            }
            kept.extend(pad);
            kept.sort_unstable();
            candidates.extend_from_slice(&kept);

            let mut truncated = entries.clone();
            truncated.sort_unstable_by_key(|&(j, _)| j);
            rows.push(truncated);
        }
        let probs = SparseRowMatrix::from_rows(m, rows).expect("rows taken from a valid matrix");
        Shortlist {
            probs,
            stride,
            candidates,
        }
    }

    /// The truncated probability matrix.
    pub fn probs(&self) -> &SparseRowMatrix {
        &self.probs
    }

    /// Sorted candidate labels of row `i`.
    pub fn candidates(&self, i: usize) -> &[u32] {
        &self.candidates[i * self.stride..(i + 1) * self.stride]
    }
}

/// Sorted union of two sorted label lists.
pub(crate) fn merge_sorted(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => {
                out.push(a[x]);
                x += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[y]);
                y += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[x]);
                x += 1;
                y += 1;
            }
        }
    }
    out.extend_from_slice(&a[x..]);
    out.extend_from_slice(&b[y..]);
}
