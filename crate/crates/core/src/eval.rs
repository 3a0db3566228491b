//! @k metric report against ground-truth labels.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::SparseRowMatrix;
use crate::prediction::PredictionRow;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub k: usize,
    pub instance_precision: f64,
    pub instance_recall: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub coverage: f64,
    /// Propensity-scored precision, normalized by the best achievable value.
    pub ps_precision: Option<f64>,
}

impl EvalReport {
    /// `(key, value)` pairs such as `("mF@5", 0.31)`.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let k = self.k;
        let mut out = vec![
            (format!("iP@{k}"), self.instance_precision),
            (format!("iR@{k}"), self.instance_recall),
            (format!("mP@{k}"), self.macro_precision),
            (format!("mR@{k}"), self.macro_recall),
            (format!("mF@{k}"), self.macro_f1),
            (format!("mC@{k}"), self.coverage),
        ];
        if let Some(ps) = self.ps_precision {
            out.push((format!("psP@{k}"), ps));
        }
        out
    }

    pub fn to_key_values(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(key, v)| format!("{key}={v}\n"))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut map = serde_json::Map::new();
        map.insert("k".into(), self.k.into());
        for (key, v) in self.entries() {
            map.insert(key, v.into());
        }
        serde_json::Value::Object(map).to_string()
    }
}

/// Evaluates `preds` against binary `labels`; every row must hold exactly
/// `k` predictions. Macro averages run over all `m` labels and empty
/// denominators contribute 0.
pub fn evaluate(
    preds: &[PredictionRow],
    labels: &SparseRowMatrix,
    k: usize,
    ps_weights: Option<&[f64]>,
) -> Result<EvalReport> {
    let (n, m) = (labels.n_rows(), labels.n_cols());
    if preds.len() != n {
        return Err(Error::DimensionMismatch(format!("{} prediction rows for {n} label rows", preds.len())));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if let Some(w) = ps_weights {
        if w.len() != m {
            return Err(Error::DimensionMismatch(format!("{} propensity weights for {m} labels", w.len())));
        }
    }
    let mut tp = vec![0u64; m];
    let mut pp = vec![0u64; m];
    let mut pos = vec![0u64; m];
    let (mut ip, mut ir) = (0.0, 0.0);
    let (mut ps_hit, mut ps_best) = (0.0, 0.0);
    let mut best = Vec::new();
    for (i, (row, pred)) in labels.rows().zip(preds).enumerate() {
        if pred.k() != k {
            return Err(Error::Validation(format!("row {i} predicts {} labels, expected {k}", pred.k())));
        }
        if row.values.iter().any(|&v| v != 1.0) {
            return Err(Error::Validation(format!("label row {i} is not binary")));
        }
        if let Some(&j) = pred.labels().last() {
            if j as usize >= m {
                return Err(Error::DimensionMismatch(format!("predicted label {j} >= {m} labels")));
            }
        }
        let mut hits = 0u64;
        for &j in pred.labels() {
            pp[j as usize] += 1;
            if row.indices.binary_search(&j).is_ok() {
                tp[j as usize] += 1;
                hits += 1;
                if let Some(w) = ps_weights {
                    ps_hit += w[j as usize];
                }
            }
        }
        for &j in row.indices {
            pos[j as usize] += 1;
        }
        ip += hits as f64 / k as f64;
        if !row.is_empty() {
            ir += hits as f64 / row.len() as f64;
        }
        if let Some(w) = ps_weights {
            best.clear();
            best.extend(row.indices.iter().map(|&j| w[j as usize]));
            best.sort_unstable_by(|a, b| b.total_cmp(a));
            ps_best += best.iter().take(k).sum::<f64>();
        }
    }
    let ratio = |a: u64, b: u64| if b > 0 { a as f64 / b as f64 } else { 0.0 };
    let mean = |f: &dyn Fn(usize) -> f64| {
        if m == 0 {
            0.0
        } else {
            (0..m).map(f).sum::<f64>() / m as f64
        }
    };
    let inv_n = if n > 0 { 1.0 / n as f64 } else { 0.0 };
    Ok(EvalReport {
        k,
        instance_precision: ip * inv_n,
        instance_recall: ir * inv_n,
        macro_precision: mean(&|j| ratio(tp[j], pp[j])),
        macro_recall: mean(&|j| ratio(tp[j], pos[j])),
        macro_f1: mean(&|j| ratio(2 * tp[j], pp[j] + pos[j])),
        coverage: mean(&|j| if tp[j] > 0 { 1.0 } else { 0.0 }),
        ps_precision: ps_weights.map(|_| if ps_best > 0.0 { ps_hit / ps_best } else { 0.0 }),
    })
}
