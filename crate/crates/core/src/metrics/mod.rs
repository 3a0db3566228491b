//! Confusion-matrix utilities `psi(t, p, q)` and task-utility evaluation.
//!
//! All utilities are parameterized by the true-positive rate `t`, the
//! predicted-positive rate `p` and the ground-truth positive rate `q` of a
//! single label, each normalized by the number of instances. A task utility
//! is the sum of one such term per label; macro-averaged families carry the
//! `1/m` factor inside the per-label term.

mod lipschitz;
mod weights;

use std::fs;
use std::path::Path;
use std::sync::Arc;

pub use lipschitz::{lipschitz_profile, thm1_bound, LipschitzProfile};
pub use weights::{load_weights, save_weights, weight_compute, WeightKind, WeightScheme};

use crate::error::{Error, Result};
use crate::matrix::SparseRowMatrix;
use crate::prediction::{check_predictions, PredictionRow};
use crate::stats::RunningStats;

/// Utilities of the four confusion-matrix cells for one label.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelWeights {
    pub w00: f64,
    pub w01: f64,
    pub w10: f64,
    pub w11: f64,
}

impl LabelWeights {
    /// Only true positives are rewarded.
    pub fn tp(w11: f64) -> Self {
        LabelWeights {
            w00: 0.0,
            w01: 0.0,
            w10: 0.0,
            w11,
        }
    }
}

/// A utility family the optimizers and evaluators are parameterized by.
#[derive(Clone, Debug, PartialEq)]
pub enum MetricSpec {
    MacroPrecision,
    MacroRecall,
    MacroFBeta { beta: f64 },
    Coverage,
    InstancePrecisionAtK,
    Hamming,
    WeightedInstance(Arc<[LabelWeights]>),
    /// `(1 - alpha) * a + alpha * b`; neither part is itself mixed.
    Mixed {
        alpha: f64,
        a: Box<MetricSpec>,
        b: Box<MetricSpec>,
    },
}

/// Per-label state fed to gain computations.
#[derive(Clone, Copy, Debug)]
pub struct LabelState {
    pub t: f64,
    pub count: u32,
    pub q: f64,
}

impl MetricSpec {
    pub fn macro_f(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("F-beta needs beta > 0, got {beta}")));
        }
        Ok(MetricSpec::MacroFBeta { beta })
    }

    pub fn weighted(weights: Vec<LabelWeights>) -> Self {
        MetricSpec::WeightedInstance(weights.into())
    }

    pub fn mixed(alpha: f64, a: MetricSpec, b: MetricSpec) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!("mixing weight {alpha} outside [0, 1]")));
        }
        if matches!(a, MetricSpec::Mixed { .. }) || matches!(b, MetricSpec::Mixed { .. }) {
            return Err(Error::Config("mixed metrics cannot be nested".into()));
        }
        Ok(MetricSpec::Mixed {
            alpha,
            a: Box::new(a),
            b: Box::new(b),
        })
    }

    /// Parses the CLI metric grammar: `macro-p`, `macro-r`, `macro-f:<beta>`,
    /// `coverage`, `instance-p`, `hamming`, `weighted:<path>`,
    /// `mixed:<alpha>:<metricA>:<metricB>`.
    pub fn parse(text: &str) -> Result<Self> {
        let tokens: Vec<&str> = text.split(':').collect();
        let (metric, used) = parse_tokens(&tokens, true)?;
        if used != tokens.len() {
            return Err(Error::Config(format!("trailing input in metric {text:?}")));
        }
        Ok(metric)
    }

    pub fn name(&self) -> String {
        match self {
            MetricSpec::MacroPrecision => "macro-p".into(),
            MetricSpec::MacroRecall => "macro-r".into(),
            MetricSpec::MacroFBeta { beta } => format!("macro-f:{beta}"),
            MetricSpec::Coverage => "coverage".into(),
            MetricSpec::InstancePrecisionAtK => "instance-p".into(),
            MetricSpec::Hamming => "hamming".into(),
            MetricSpec::WeightedInstance(_) => "weighted".into(),
            MetricSpec::Mixed { alpha, a, b } => format!("mixed:{alpha}:{}:{}", a.name(), b.name()),
        }
    }

    /// Checks per-label parameters against the label count.
    pub fn check_labels(&self, m: usize) -> Result<()> {
        match self {
            MetricSpec::WeightedInstance(w) if w.len() != m => Err(Error::DimensionMismatch(
                format!("{} label weights for {m} labels", w.len()),
            )),
            MetricSpec::Mixed { a, b, .. } => {
                a.check_labels(m)?;
                b.check_labels(m)
            }
            _ => Ok(()),
        }
    }

    /// Per-label utility `psi^j(t, p, q)` including the family's normalization.
    pub fn label_utility(&self, j: usize, t: f64, p: f64, q: f64, m: usize, k: usize) -> f64 {
        let inv_m = 1.0 / m as f64;
        match self {
            MetricSpec::MacroPrecision => precision(t, p) * inv_m,
            MetricSpec::MacroRecall => recall(t, q) * inv_m,
            MetricSpec::MacroFBeta { beta } => f_beta(t, p, q, *beta) * inv_m,
            MetricSpec::Coverage => coverage(t) * inv_m,
            MetricSpec::InstancePrecisionAtK => t / k as f64,
            MetricSpec::Hamming => (1.0 - p - q + 2.0 * t) * inv_m,
            MetricSpec::WeightedInstance(w) => {
                let w = &w[j];
                w.w00 * (1.0 - p - q + t) + w.w01 * (p - t) + w.w10 * (q - t) + w.w11 * t
            }
            MetricSpec::Mixed { alpha, a, b } => {
                (1.0 - alpha) * a.label_utility(j, t, p, q, m, k)
                    + alpha * b.label_utility(j, t, p, q, m, k)
            }
        }
    }

    /// Task utility at the given per-label statistics.
    pub fn objective(&self, stats: &RunningStats, k: usize) -> f64 {
        let m = stats.n_labels();
        (0..m)
            .map(|j| self.label_utility(j, stats.t_hat(j), stats.p(j), stats.q_hat(j), m, k))
            .sum()
    }

    /// `(f_t(q), f_p(q))` when the utility is `f_t(q) * t + f_p(q) * p + const(q)`.
    pub fn linear_coefficients(&self, j: usize, q: f64, m: usize, k: usize) -> Option<(f64, f64)> {
        match self {
            MetricSpec::InstancePrecisionAtK => Some((1.0 / k as f64, 0.0)),
            MetricSpec::Hamming => Some((2.0 / m as f64, -1.0 / m as f64)),
            MetricSpec::MacroRecall => Some((recall_weight(q, m), 0.0)),
            MetricSpec::WeightedInstance(w) => {
                let w = &w[j];
                Some((((w.w11 - w.w01) - w.w10) + w.w00, w.w01 - w.w00))
            }
            MetricSpec::Mixed { alpha, a, b } => {
                let (ta, pa) = a.linear_coefficients(j, q, m, k)?;
                let (tb, pb) = b.linear_coefficients(j, q, m, k)?;
                Some(((1.0 - alpha) * ta + alpha * tb, (1.0 - alpha) * pa + alpha * pb))
            }
            _ => None,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.linear_coefficients(0, 0.5, 1, 1).is_some()
    }

    /// Whether block coordinate ascent over `psi` supports this metric.
    pub fn supports_bca(&self) -> bool {
        match self {
            MetricSpec::Coverage => false,
            MetricSpec::Mixed { a, b, .. } => a.supports_bca() && b.supports_bca(),
            _ => true,
        }
    }

    /// Gain of predicting label `j` for one instance, holding all other
    /// instances fixed, in per-instance units (`n` times the change in the
    /// task utility). `predicted` says whether the instance currently
    /// predicts `j`; the state includes that prediction.
    #[allow(clippy::too_many_arguments)]
    pub fn gain(
        &self,
        j: usize,
        state: LabelState,
        eta: f64,
        predicted: bool,
        n: usize,
        m: usize,
        k: usize,
    ) -> f64 {
        if let Some((ft, fp)) = self.linear_coefficients(j, state.q, m, k) {
            return eta * ft + fp;
        }
        if let MetricSpec::Mixed { alpha, a, b } = self {
            return (1.0 - alpha) * a.gain(j, state, eta, predicted, n, m, k)
                + alpha * b.gain(j, state, eta, predicted, n, m, k);
        }
        let n_f = n as f64;
        let inv_n = 1.0 / n_f;
        let (on, off) = if predicted {
            let count_off = state.count - 1;
            let t_off = if count_off == 0 {
                0.0
            } else {
                (state.t - inv_n * eta).max(0.0)
            };
            ((state.t, state.count), (t_off, count_off))
        } else {
            ((state.t + inv_n * eta, state.count + 1), (state.t, state.count))
        };
        let psi_on = self.label_utility(j, on.0, on.1 as f64 / n_f, state.q, m, k);
        let psi_off = self.label_utility(j, off.0, off.1 as f64 / n_f, state.q, m, k);
        n_f * (psi_on - psi_off)
    }
}

/// `t / p`, 0 when nothing is predicted.
pub fn precision(t: f64, p: f64) -> f64 {
    if p > 0.0 {
        t / p
    } else {
        0.0
    }
}

/// `t / q`, 0 when the label has no positives.
pub fn recall(t: f64, q: f64) -> f64 {
    if q > 0.0 {
        t / q
    } else {
        0.0
    }
}

/// `(1 + beta^2) t / (beta^2 q + p)`, 0 on a zero denominator.
pub fn f_beta(t: f64, p: f64, q: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * q + p;
    if denom > 0.0 {
        (1.0 + b2) * t / denom
    } else {
        0.0
    }
}

pub fn coverage(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Macro-recall as a weighted true-positive utility: `1 / (m q)`.
pub fn recall_weight(q: f64, m: usize) -> f64 {
    if q > 0.0 {
        1.0 / (m as f64 * q)
    } else {
        0.0
    }
}

/// The per-label utility of `metric` without any macro or budget scaling.
pub fn psi_eval(metric: &MetricSpec, t: f64, p: f64, q: f64) -> f64 {
    metric.label_utility(0, t, p, q, 1, 1)
}

/// Confusion-matrix entries `(t, p, q)` of every label from realized labels.
pub fn confusion_rates(
    labels: &SparseRowMatrix,
    preds: &[PredictionRow],
) -> Result<Vec<(f64, f64, f64)>> {
    check_predictions(preds, labels.n_rows())?;
    let m = labels.n_cols();
    let mut tp = vec![0u64; m];
    let mut pp = vec![0u64; m];
    let mut pos = vec![0u64; m];
    for (row, pred) in labels.rows().zip(preds) {
        if row.values.iter().any(|&v| v != 1.0) {
            return Err(Error::Validation("label matrix must be binary".into()));
        }
        for &j in row.indices {
            pos[j as usize] += 1;
        }
        for &j in pred.labels() {
            if j as usize >= m {
                return Err(Error::DimensionMismatch(format!(
                    "predicted label {j} >= {m} labels"
                )));
            }
            pp[j as usize] += 1;
            if row.indices.binary_search(&j).is_ok() {
                tp[j as usize] += 1;
            }
        }
    }
    let n = labels.n_rows().max(1) as f64;
    Ok((0..m)
        .map(|j| (tp[j] as f64 / n, pp[j] as f64 / n, pos[j] as f64 / n))
        .collect())
}

/// Task utility of `preds` against realized `labels`.
pub fn task_utility(
    metric: &MetricSpec,
    labels: &SparseRowMatrix,
    preds: &[PredictionRow],
) -> Result<f64> {
    metric.check_labels(labels.n_cols())?;
    let rates = confusion_rates(labels, preds)?;
    let m = labels.n_cols();
    let k = preds.first().map_or(1, PredictionRow::k).max(1);
    Ok(rates
        .iter()
        .enumerate()
        .map(|(j, &(t, p, q))| metric.label_utility(j, t, p, q, m, k))
        .sum())
}

fn parse_tokens(tokens: &[&str], allow_mixed: bool) -> Result<(MetricSpec, usize)> {
    let head = *tokens
        .first()
        .ok_or_else(|| Error::Config("empty metric".into()))?;
    let arg = |i: usize| -> Result<&str> {
        tokens
            .get(i)
            .copied()
            .ok_or_else(|| Error::Config(format!("metric {head:?} is missing an argument")))
    };
    let number = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Config(format!("bad number {s:?} in metric")))
    };
    match head {
        "macro-p" => Ok((MetricSpec::MacroPrecision, 1)),
        "macro-r" => Ok((MetricSpec::MacroRecall, 1)),
        "macro-f" => Ok((MetricSpec::macro_f(number(arg(1)?)?)?, 2)),
        "coverage" => Ok((MetricSpec::Coverage, 1)),
        "instance-p" => Ok((MetricSpec::InstancePrecisionAtK, 1)),
        "hamming" => Ok((MetricSpec::Hamming, 1)),
        "weighted" => {
            let path = arg(1)?;
            Ok((MetricSpec::weighted(load_label_weights(path)?), 2))
        }
        "mixed" if allow_mixed => {
            let alpha = number(arg(1)?)?;
            let (a, used_a) = parse_tokens(&tokens[2..], false)?;
            let (b, used_b) = parse_tokens(&tokens[2 + used_a..], false)?;
            Ok((MetricSpec::mixed(alpha, a, b)?, 2 + used_a + used_b))
        }
        "mixed" => Err(Error::Config("mixed metrics cannot be nested".into())),
        other => Err(Error::Config(format!("unknown metric {other:?}"))),
    }
}

/// Reads a per-label weight file: each line holds either `w11` alone or
/// `w00 w01 w10 w11`.
pub fn load_label_weights(path: impl AsRef<Path>) -> Result<Vec<LabelWeights>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_label_weights(&text)
}

pub fn parse_label_weights(text: &str) -> Result<Vec<LabelWeights>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(i + 1, format!("bad weight line {line:?}")))?;
        match vals[..] {
            [w11] => out.push(LabelWeights::tp(w11)),
            [w00, w01, w10, w11] => out.push(LabelWeights { w00, w01, w10, w11 }),
            _ => {
                return Err(Error::parse(
                    i + 1,
                    format!("expected 1 or 4 weights, found {}", vals.len()),
                ))
            }
        }
    }
    Ok(out)
}
