//! Fixtures shared by the benchmarks.

use qduffing_core::fock::coherent_state_at;
use qduffing_core::{ModelParams, PhasePoint, StateVector};

/// Benchmark model at `beta` in a basis of `dim` states.
pub fn params(beta: f64, dim: usize) -> ModelParams {
    ModelParams {
        beta,
        dim,
        ..ModelParams::default()
    }
}

/// A coherent state inside the attractor box, safely inside the basis.
pub fn state(dim: usize) -> StateVector {
    coherent_state_at(PhasePoint::new(1.0, -0.5), dim).expect("fixture fits the basis")
}
