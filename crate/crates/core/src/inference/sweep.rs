use crate::error::{Error, Result};
use crate::matrix::SparseRowMatrix;
use crate::metrics::MetricSpec;

use super::{bca_infer, bca_infer_from, InferenceConfig, InferenceReport};

/// One point of a mixing sweep between instance precision and another metric.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub alpha: f64,
    pub report: InferenceReport,
}

/// Parses `start:end:step` into an inclusive grid.
pub fn alpha_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number {s:?} in sweep {text:?}")))
        })
        .collect::<Result<_>>()?;
    let &[start, end, step] = parts.as_slice() else {
        return Err(Error::Config(format!("sweep must be start:end:step, got {text:?}")));
    };
    if !(step > 0.0) || start > end || !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) {
        return Err(Error::Config(format!("invalid sweep {text:?}")));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let a = start + i as f64 * step;
            ((a * 1e12).round() / 1e12).min(end)
        })
        .collect())
}

/// BCA on `(1 - alpha) * instance-p + alpha * metric` for every alpha.
///
/// The first point starts from `cfg.init`; each later point starts from the
/// previous point's predictions, which keeps the curve free of restarts.
pub fn alpha_sweep(
    probs: &SparseRowMatrix,
    metric: &MetricSpec,
    alphas: &[f64],
    cfg: &InferenceConfig,
) -> Result<Vec<SweepPoint>> {
    let mut points: Vec<SweepPoint> = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mixed = MetricSpec::mixed(alpha, MetricSpec::InstancePrecisionAtK, metric.clone())?;
        let report = match points.last() {
            None => bca_infer(probs, &mixed, cfg)?,
            Some(prev) => bca_infer_from(probs, &mixed, cfg, prev.report.predictions.clone())?,
        };
        points.push(SweepPoint { alpha, report });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid() {
        let g = alpha_grid("0.0:1.0:0.1").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[10], 1.0);
        assert!(alpha_grid("0:1").is_err());
        assert!(alpha_grid("0:1:0").is_err());
    }
}
