//! Shared fixtures for the criterion benches.

use caplab_core::FiniteMetricMeasureSpace;

/// Standard benchmark space: a 2D grid with `n` points per side.
pub fn bench_grid(n: usize) -> FiniteMetricMeasureSpace {
    caplab_core::gen::gen_grid(n, 2).expect("valid grid parameters")
}
