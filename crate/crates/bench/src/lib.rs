//! Benchmark inputs shared by the criterion targets.

use momsos_core::poly::Polynomial;
use momsos_core::scan::linear_objective;

/// Linear objectives at `count` uniformly spaced angles.
pub fn objectives(count: usize) -> Vec<Polynomial> {
    (0..count).map(|k| linear_objective(k as f64 * 360.0 / count as f64)).collect()
}
