//! Quantum state diffusion for the dissipative, periodically driven Duffing
//! oscillator, with a Lindblad master-equation oracle, the classical
//! reference dynamics and pseudo-Lyapunov analysis of trajectory pairs.

pub mod classical;
pub mod error;
pub mod fock;
pub mod lindblad;
pub mod model;
pub mod plyap;
pub mod qsd;

pub use error::{Error, Result};
pub use fock::{BandedOperator, Moments, PhasePoint, StateVector};
pub use model::{ModelOperators, ModelParams};
pub use num_complex::Complex64;
pub use qsd::{QsdIntegrator, SeedSpec, TrajectoryRecord, WienerIncrement};
