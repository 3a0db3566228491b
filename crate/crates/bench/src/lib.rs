//! Shared fixtures for the benchmarks.

use etuk::{generate_synthetic, SyntheticData, SyntheticSpec};

/// A long-tailed synthetic problem of the given size.
pub fn fixture(n: usize, m: usize, seed: u64) -> SyntheticData {
    generate_synthetic(&SyntheticSpec {
        n,
        m,
        power_exponent: 1.0,
        avg_labels_per_instance: 3.0,
        seed,
    })
    .expect("valid synthetic spec")
}
