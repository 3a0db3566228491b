//! Prediction strategies under a per-instance budget of `k` labels.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{SparseRow, SparseRowMatrix};
use crate::prediction::PredictionRow;

mod bca;
mod coverage;
mod greedy;
mod objective;
mod select;
mod shortlist;
mod sweep;
mod topk;

pub use bca::{bca_infer, bca_infer_from};
pub use coverage::{bca_coverage_infer, greedy_coverage_infer};
pub use greedy::greedy_infer;
pub use objective::{etu_objective_exact, semi_etu_objective, MAX_ENUMERATION_ROWS};
pub(crate) use objective::label_expectation;
pub use select::{select_top_k, select_top_k_sparse};
pub use shortlist::Shortlist;
pub use sweep::{alpha_grid, alpha_sweep, SweepPoint};
pub use topk::{linear_gain_weights, topk_infer, weighted_topk_infer};

/// How BCA picks its starting predictions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Init {
    /// `k` distinct labels drawn uniformly per row.
    #[default]
    RandomK,
    /// The `k` most probable labels per row.
    TopK,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InferenceConfig {
    pub k: usize,
    /// Shortlist size; 0 disables shortlisting.
    pub k_prime: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub init: Init,
    pub max_passes: usize,
}

impl InferenceConfig {
    pub const DEFAULT_EPSILON: f64 = 1e-7;
    pub const DEFAULT_MAX_PASSES: usize = 100;

    pub fn new(k: usize) -> Self {
        InferenceConfig {
            k,
            k_prime: 0,
            epsilon: Self::DEFAULT_EPSILON,
            seed: 0,
            init: Init::RandomK,
            max_passes: Self::DEFAULT_MAX_PASSES,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.k > m {
            return Err(Error::Config(format!(
                "k = {} exceeds the number of labels {m}",
                self.k
            )));
        }
        if self.k_prime != 0 && self.k_prime < self.k {
            return Err(Error::Config(format!(
                "k' = {} must be 0 or at least k = {}",
                self.k_prime, self.k
            )));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if self.max_passes < 1 {
            return Err(Error::Config("max_passes must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InferenceReport {
    pub predictions: Vec<PredictionRow>,
    /// Objective at the starting point; `None` for single-pass strategies.
    pub initial_objective: Option<f64>,
    /// Objective after each full pass.
    pub objective_trace: Vec<f64>,
    pub passes: usize,
    /// Seconds.
    pub wall_time: f64,
}

impl InferenceReport {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace
            .last()
            .copied()
            .or(self.initial_objective)
            .unwrap_or(f64::NAN)
    }

    /// Tab-separated `pass<TAB>objective` lines, pass 0 being the start.
    pub fn trace_tsv(&self) -> String {
        let mut out = String::from("pass\tobjective\n");
        if let Some(v) = self.initial_objective {
            out.push_str(&format!("0\t{v}\n"));
        }
        for (i, v) in self.objective_trace.iter().enumerate() {
            out.push_str(&format!("{}\t{v}\n", i + 1));
        }
        out
    }
}

pub(crate) fn rng_for(cfg: &InferenceConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

pub(crate) fn initial_predictions(
    probs: &SparseRowMatrix,
    cfg: &InferenceConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<PredictionRow> {
    let m = probs.n_cols();
    match cfg.init {
        Init::RandomK => (0..probs.n_rows())
            .map(|_| {
                let mut labels: Vec<u32> = index::sample(rng, m, cfg.k)
                    .into_iter()
                    .map(|j| j as u32)
                    .collect();
                labels.sort_unstable();
                PredictionRow::from_sorted_unchecked(labels)
            })
            .collect(),
        Init::TopK => probs.rows().map(|row| top_k_of_row(row, cfg.k, m)).collect(),
    }
}

/// The `k` largest entries of a probability row, padded with unlisted labels.
pub(crate) fn top_k_of_row(row: SparseRow<'_>, k: usize, m: usize) -> PredictionRow {
    let gains: Vec<(u32, f64)> = row.iter().collect();
    select_top_k_sparse(&gains, k, m).expect("k validated against m")
}

pub(crate) fn check_dims(probs: &SparseRowMatrix, cfg: &InferenceConfig) -> Result<()> {
    cfg.validate(probs.n_cols())
}
