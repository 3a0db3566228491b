use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::format_value;

/// How per-label true-positive weights are derived from label priors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightKind {
    /// Inverse-propensity model with parameters `a`, `b`.
    Propensity { a: f64, b: f64 },
    /// `w ∝ prior^(-beta)`.
    PowerLaw { beta: f64 },
    /// `w ∝ -ln(prior)`.
    Log,
}

impl WeightKind {
    pub const DEFAULT_PROPENSITY_A: f64 = 0.55;
    pub const DEFAULT_PROPENSITY_B: f64 = 1.5;

    /// `propensity[:a:b]`, `power[:beta]` (default 0.5) or `log`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = text.split(':');
        let head = parts.next().unwrap_or_default();
        let nums: Vec<f64> = parts
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number {s:?} in weight scheme")))
            })
            .collect::<Result<_>>()?;
        match (head, nums.as_slice()) {
            ("propensity", []) => Ok(WeightKind::Propensity {
                a: Self::DEFAULT_PROPENSITY_A,
                b: Self::DEFAULT_PROPENSITY_B,
            }),
            ("propensity", &[a, b]) => Ok(WeightKind::Propensity { a, b }),
            ("power", []) => Ok(WeightKind::PowerLaw { beta: 0.5 }),
            ("power", &[beta]) => Ok(WeightKind::PowerLaw { beta }),
            ("log", []) => Ok(WeightKind::Log),
            _ => Err(Error::Config(format!("unknown weight scheme {text:?}"))),
        }
    }
}

/// A weighting rule together with the empirical label priors it is applied to.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightScheme {
    pub kind: WeightKind,
    pub priors: Vec<f64>,
    /// Number of training instances the priors were estimated on.
    pub n_train: usize,
}

/// True-positive weights `w11` for every label.
///
/// Propensity weights include the `1/k` budget factor. Power-law and log
/// weights are only defined up to scale and are normalized to a maximum of 1;
/// zero priors are floored at `1/n_train` first.
pub fn weight_compute(scheme: &WeightScheme, k: usize) -> Result<Vec<f64>> {
    if let Some(&bad) = scheme.priors.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Config(format!("prior {bad} outside [0, 1]")));
    }
    if scheme.n_train < 1 {
        return Err(Error::Config("n_train must be at least 1".into()));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let n_train = scheme.n_train as f64;
    match scheme.kind {
        WeightKind::Propensity { a, b } => {
            let c = (n_train.ln() - 1.0) * (b + 1.0).powf(a);
            Ok(scheme
                .priors
                .iter()
                .map(|&pi| (1.0 + c * (n_train * pi + b).powf(-a)) / k as f64)
                .collect())
        }
        WeightKind::PowerLaw { beta } => {
            let floor = 1.0 / n_train;
            Ok(normalize_max(
                scheme.priors.iter().map(|&pi| pi.max(floor).powf(-beta)).collect(),
            ))
        }
        WeightKind::Log => {
            let floor = 1.0 / n_train;
            Ok(normalize_max(
                scheme.priors.iter().map(|&pi| -pi.max(floor).ln()).collect(),
            ))
        }
    }
}

fn normalize_max(mut w: Vec<f64>) -> Vec<f64> {
    let max = w.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for x in &mut w {
            *x /= max;
        }
    }
    w
}

/// Reads one value per line (weights or priors).
pub fn load_weights(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(i + 1, format!("bad value {l:?}")))
        })
        .collect()
}

pub fn save_weights(path: impl AsRef<Path>, weights: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(weights.len() * 12);
    for &w in weights {
        out.push_str(&format_value(w));
        out.push('\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme(kind: WeightKind, priors: Vec<f64>, n_train: usize) -> WeightScheme {
        WeightScheme {
            kind,
            priors,
            n_train,
        }
    }

    #[test]
    fn propensity_reference_value() {
        let s = scheme(WeightKind::Propensity { a: 0.55, b: 1.5 }, vec![0.1], 100);
        let w = weight_compute(&s, 1).unwrap();
        assert!((w[0] - 2.5575).abs() < 1e-3, "{}", w[0]);
        let w3 = weight_compute(&s, 3).unwrap();
        assert!((w3[0] * 3.0 - w[0]).abs() < 1e-12);
    }

    #[test]
    fn power_law_examples() {
        let w = weight_compute(&scheme(WeightKind::PowerLaw { beta: 0.0 }, vec![0.5, 0.01, 0.2], 100), 1)
            .unwrap();
        assert_eq!(w, vec![1.0, 1.0, 1.0]);

        let w = weight_compute(&scheme(WeightKind::PowerLaw { beta: 0.5 }, vec![0.04, 0.01], 1000), 1)
            .unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_priors_are_floored() {
        let w = weight_compute(&scheme(WeightKind::Log, vec![0.0, 0.01, 1.0], 100), 1).unwrap();
        // 0 is floored to 1/100, so it ties with the 0.01 prior.
        assert_eq!(w[0], 1.0);
        assert_eq!(w[1], 1.0);
        assert_eq!(w[2], 0.0);
        assert!(w.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn parameter_errors() {
        let s = scheme(WeightKind::Propensity { a: 0.55, b: 1.5 }, vec![0.1], 0);
        assert!(weight_compute(&s, 1).is_err());
        let s = scheme(WeightKind::Log, vec![1.5], 10);
        assert!(weight_compute(&s, 1).is_err());
    }

    #[test]
    fn parse_kinds() {
        assert_eq!(
            WeightKind::parse("propensity:0.55:1.5").unwrap(),
            WeightKind::Propensity { a: 0.55, b: 1.5 }
        );
        assert_eq!(WeightKind::parse("power").unwrap(), WeightKind::PowerLaw { beta: 0.5 });
        assert_eq!(WeightKind::parse("log").unwrap(), WeightKind::Log);
        assert!(WeightKind::parse("propensity:1").is_err());
        assert!(WeightKind::parse("exp").is_err());
    }
}
