use super::MetricSpec;
use crate::error::{Error, Result};

/// Per-label constants bounding how much `psi^j` moves with `t` and `q`:
/// `|psi(t,p,q) - psi(t',p,q')| <= t_const |t - t'| + p_const |q - q'|`
/// with both constants evaluated at the semi-empirical `q_hat`.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzProfile {
    pub t_const: Vec<f64>,
    pub p_const: Vec<f64>,
}

/// Constants for `metric` at the expected positive rates `q_hat`.
///
/// Macro-F-beta: writing `F = (1+b²)t/(b²q+p)`,
/// `F(t,q) - F(t',q') = (1+b²)(t-t')/(b²q+p) + F(t',q') b²(q'-q)/(b²q+p)`,
/// and `F <= 1` on the feasible set, so `T = (1+b²)/(b² q)` and `P = 1/q`
/// (both times `1/m`).
pub fn lipschitz_profile(metric: &MetricSpec, q_hat: &[f64], k: usize) -> Result<LipschitzProfile> {
    let m = q_hat.len();
    metric.check_labels(m)?;
    let inv_m = 1.0 / m.max(1) as f64;
    let positive_q = |name: &str| -> Result<()> {
        match q_hat.iter().position(|&q| !(q > 0.0)) {
            Some(j) => Err(Error::Capability(format!(
                "{name} bound undefined: q_hat[{j}] = {}",
                q_hat[j]
            ))),
            None => Ok(()),
        }
    };
    let (t_const, p_const) = match metric {
        MetricSpec::MacroRecall => {
            positive_q("macro-recall")?;
            let c: Vec<f64> = q_hat.iter().map(|&q| inv_m / q).collect();
            (c.clone(), c)
        }
        MetricSpec::MacroFBeta { beta } => {
            positive_q("macro-F")?;
            let b2 = beta * beta;
            (
                q_hat.iter().map(|&q| inv_m * (1.0 + b2) / (b2 * q)).collect(),
                q_hat.iter().map(|&q| inv_m / q).collect(),
            )
        }
        MetricSpec::InstancePrecisionAtK => (vec![1.0 / k.max(1) as f64; m], vec![0.0; m]),
        MetricSpec::Hamming => (vec![2.0 * inv_m; m], vec![inv_m; m]),
        MetricSpec::WeightedInstance(w) => (
            w.iter()
                .map(|w| (w.w00 - w.w01 - w.w10 + w.w11).abs())
                .collect(),
            w.iter().map(|w| (w.w10 - w.w00).abs()).collect(),
        ),
        MetricSpec::Mixed { alpha, a, b } => {
            let pa = lipschitz_profile(a, q_hat, k)?;
            let pb = lipschitz_profile(b, q_hat, k)?;
            let mix = |x: &[f64], y: &[f64]| -> Vec<f64> {
                x.iter()
                    .zip(y)
                    .map(|(x, y)| (1.0 - alpha) * x + alpha * y)
                    .collect()
            };
            (mix(&pa.t_const, &pb.t_const), mix(&pa.p_const, &pb.p_const))
        }
        MetricSpec::MacroPrecision | MetricSpec::Coverage => {
            return Err(Error::Capability(format!(
                "{} has no Lipschitz profile",
                metric.name()
            )))
        }
    };
    Ok(LipschitzProfile { t_const, p_const })
}

/// `(1 / (2 sqrt(n))) * sum_j (T_j + P_j)`.
pub fn thm1_bound(profile: &LipschitzProfile, n: usize) -> f64 {
    let total: f64 = profile
        .t_const
        .iter()
        .zip(&profile.p_const)
        .map(|(t, p)| t + p)
        .sum();
    total / (2.0 * (n as f64).sqrt())
}
