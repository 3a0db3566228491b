//! Budgeted at-`k` prediction for multi-label utilities under the expected
//! test utility framework: every instance receives exactly `k` labels, chosen
//! to maximize the expectation of a corpus-level metric given label
//! probability estimates.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod inference;
pub mod matrix;
pub mod metrics;
pub mod oracle;
pub mod plt;
pub mod prediction;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport};
pub use inference::{
    alpha_sweep, bca_coverage_infer, bca_infer, bca_infer_from, etu_objective_exact,
    greedy_coverage_infer, greedy_infer, select_top_k, semi_etu_objective, topk_infer,
    weighted_topk_infer, Init, InferenceConfig, InferenceReport,
};
pub use matrix::{MatrixKind, SparseRow, SparseRowMatrix};
pub use metrics::{LabelWeights, MetricSpec};
pub use oracle::{brute_force_etu, brute_force_semi_etu, local_opt_check, OracleResult};
pub use plt::{astar_top_k, path_prob, GainSpec, LabelTree};
pub use prediction::PredictionRow;
pub use stats::{FailureProbVector, RunningStats};
pub use synth::{generate as generate_synthetic, SyntheticData, SyntheticSpec};
