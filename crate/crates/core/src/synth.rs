//! Synthetic long-tailed multi-label data with known label probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::SparseRowMatrix;

/// Largest label probability the generator emits.
const MAX_ETA: f64 = 0.95;
/// Largest prior of any single label.
const MAX_PRIOR: f64 = 0.5;
/// Candidate labels per instance are drawn with probability
/// `min(1, CANDIDATE_FACTOR * prior)`.
const CANDIDATE_FACTOR: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    /// Label `j` has prior proportional to `(j + 1)^-power_exponent`.
    pub power_exponent: f64,
    pub avg_labels_per_instance: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    /// True label probabilities.
    pub probs: SparseRowMatrix,
    /// Labels drawn from `probs`.
    pub labels: SparseRowMatrix,
    /// Marginal label priors.
    pub priors: Vec<f64>,
}

/// Power-law priors scaled so that they sum to the requested average.
pub fn power_law_priors(m: usize, power: f64, avg: f64) -> Result<Vec<f64>> {
    if !(power > 0.0) {
        return Err(Error::Config(format!("power exponent must be > 0, got {power}")));
    }
    if !(avg > 0.0) || avg > MAX_PRIOR * m as f64 {
        return Err(Error::Config(format!(
            "average labels per instance must be in (0, {}], got {avg}",
            MAX_PRIOR * m as f64
        )));
    }
    let w: Vec<f64> = (0..m).map(|j| ((j + 1) as f64).powf(-power)).collect();
    let total = |c: f64| w.iter().map(|&x| (c * x).min(MAX_PRIOR)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while total(hi) < avg {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < avg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(w.iter().map(|&x| (hi * x).min(MAX_PRIOR)).collect())
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.n == 0 || spec.m == 0 {
        return Err(Error::Config("n and m must be at least 1".into()));
    }
    let priors = power_law_priors(spec.m, spec.power_exponent, spec.avg_labels_per_instance)?;
    let candidate: Vec<f64> = priors.iter().map(|&p| (CANDIDATE_FACTOR * p).min(1.0)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut prob_rows = Vec::with_capacity(spec.n);
    let mut label_rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut probs = Vec::new();
        let mut labels = Vec::new();
        for j in 0..spec.m {
            if !rng.random_bool(candidate[j]) {
                continue;
            }
            let u: f64 = rng.random();
            let eta = (2.0 * u * priors[j] / candidate[j]).min(MAX_ETA);
            if eta <= 0.0 {
                continue;
            }
            probs.push((j as u32, eta));
            if rng.random_bool(eta) {
                labels.push((j as u32, 1.0));
            }
        }
        prob_rows.push(probs);
        label_rows.push(labels);
    }
    Ok(SyntheticData {
        probs: SparseRowMatrix::from_rows(spec.m, prob_rows)?,
        labels: SparseRowMatrix::from_rows(spec.m, label_rows)?,
        priors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn priors_hit_average() {
        let p = power_law_priors(200, 1.5, 3.0).unwrap();
        assert!((p.iter().sum::<f64>() - 3.0).abs() < 1e-9);
        assert!(p.windows(2).all(|w| w[0] >= w[1]));
        assert!(p.iter().all(|&x| x <= MAX_PRIOR));
        assert!(power_law_priors(4, 1.0, 3.0).is_err());
    }

    #[test]
    fn deterministic_and_consistent() {
        let spec = SyntheticSpec {
            n: 300,
            m: 50,
            power_exponent: 1.0,
            avg_labels_per_instance: 2.0,
            seed: 9,
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.probs, b.probs);
        assert_eq!(a.labels, b.labels);
        // Every label drawn has a positive probability.
        for (i, row) in a.labels.rows().enumerate() {
            for (j, _) in row.iter() {
                assert!(a.probs.get(i, j) > 0.0);
            }
        }
        let mean_labels = a.labels.nnz() as f64 / spec.n as f64;
        assert!((mean_labels - 2.0).abs() < 0.5, "{mean_labels}");
    }
}
