use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::prediction::PredictionRow;

/// Sort key for a gain: NaN sinks to the bottom and -0.0 ties with 0.0.
#[inline]
fn key(g: f64) -> f64 {
    if g.is_nan() {
        f64::NEG_INFINITY
    } else if g == 0.0 {
        0.0
    } else {
        g
    }
}

/// Larger gain first, then smaller label index.
#[inline]
pub(crate) fn better(a: (u32, f64), b: (u32, f64)) -> Ordering {
    key(b.1).total_cmp(&key(a.1)).then(a.0.cmp(&b.0))
}

/// The `k` labels with the largest gains; ties go to the smaller index.
pub fn select_top_k(gains: &[f64], k: usize) -> Result<PredictionRow> {
    if k > gains.len() {
        return Err(Error::Config(format!(
            "k = {k} exceeds the number of labels {}",
            gains.len()
        )));
    }
    let mut scratch = Vec::new();
    Ok(top_k_dense(gains, k, &mut scratch))
}

/// Top-`k` over a sparse gain vector in a space of `m` labels. When fewer
/// than `k` labels carry a gain, the remaining slots are competed for by
/// unlisted labels with gain 0.
pub fn select_top_k_sparse(gains: &[(u32, f64)], k: usize, m: usize) -> Result<PredictionRow> {
    if k > m {
        return Err(Error::Config(format!("k = {k} exceeds the number of labels {m}")));
    }
    if let Some(&(j, _)) = gains.iter().find(|(j, _)| *j as usize >= m) {
        return Err(Error::DimensionMismatch(format!("label {j} >= {m} labels")));
    }
    let mut pool: Vec<(u32, f64)> = gains.to_vec();
    if pool.len() < k {
        let mut listed: Vec<u32> = gains.iter().map(|&(j, _)| j).collect();
        listed.sort_unstable();
        let pad = (0..m as u32)
            .filter(|j| listed.binary_search(j).is_err())
            .take(k - pool.len());
        pool.extend(pad.map(|j| (j, 0.0)));
    }
    Ok(top_k_pairs(&mut pool, k))
}

pub(crate) fn top_k_dense(gains: &[f64], k: usize, scratch: &mut Vec<u32>) -> PredictionRow {
    scratch.clear();
    scratch.extend(0..gains.len() as u32);
    let cmp = |a: &u32, b: &u32| better((*a, gains[*a as usize]), (*b, gains[*b as usize]));
    if k < scratch.len() && k > 0 {
        scratch.select_nth_unstable_by(k - 1, cmp);
    }
    let mut labels = scratch[..k].to_vec();
    labels.sort_unstable();
    PredictionRow::from_sorted_unchecked(labels)
}

/// Top-`k` of `(label, gain)` pairs; `pool` is reordered.
pub(crate) fn top_k_pairs(pool: &mut [(u32, f64)], k: usize) -> PredictionRow {
    debug_assert!(k <= pool.len());
    let cmp = |a: &(u32, f64), b: &(u32, f64)| better(*a, *b);
    if k < pool.len() && k > 0 {
        pool.select_nth_unstable_by(k - 1, cmp);
    }
    let mut labels: Vec<u32> = pool[..k].iter().map(|&(j, _)| j).collect();
    labels.sort_unstable();
    PredictionRow::from_sorted_unchecked(labels)
}
