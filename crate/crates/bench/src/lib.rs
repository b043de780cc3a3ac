//! Shared fixtures for the criterion benches.

use lowbody_core::learn::QcnnModel;
use lowbody_core::{LayoutStyle, Task, TruncationPolicy};

/// Deterministic pseudo-random angles in `[-π, π)`.
pub fn angles(len: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    (0..len)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::TAU - std::f64::consts::PI
        })
        .collect()
}

pub fn binary_model(n: usize, k: usize) -> QcnnModel {
    QcnnModel::build(n, LayoutStyle::Brick, Task::Binary, TruncationPolicy::with_max_weight(k)).expect("model builds")
}
