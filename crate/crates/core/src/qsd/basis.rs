use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{IntegratorOptions, QsdIntegrator, SeedSpec, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::fock::{coherent_state_at, required_dim, PhasePoint};
use crate::model::ModelParams;

/// How a trajectory's Fock basis is sized; `params.dim` is the cap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisPolicy {
    /// Every trajectory uses `params.dim`.
    Fixed,
    /// Start from [`start_dim`]; on a truncation leak rerun the trajectory
    /// with the same noise in the next basis of [`next_dim`].
    #[default]
    Adaptive,
}

impl BasisPolicy {
    pub fn start(&self, params: &ModelParams, point: PhasePoint) -> usize {
        match self {
            BasisPolicy::Fixed => params.dim,
            BasisPolicy::Adaptive => start_dim(params, point),
        }
    }
}

/// Basis sizes are multiples of this (or the cap).
pub const DIM_QUANTUM: usize = 32;

fn round_dim(n: f64, cap: usize) -> usize {
    let q = (n.max(1.0) / DIM_QUANTUM as f64).ceil() as usize * DIM_QUANTUM;
    q.min(cap)
}

/// Starting basis for a coherent state at `point`: the classical energy of
/// the point pushed five coherent widths outward in both quadratures, read
/// as a Fock level, and never below the coherent truncation rule.
pub fn start_dim(params: &ModelParams, point: PhasePoint) -> usize {
    let reach = 5.0 * std::f64::consts::FRAC_1_SQRT_2;
    let q = point.q.abs() + reach;
    let p = point.p.abs() + reach;
    let beta2 = params.beta * params.beta;
    let energy = 0.5 * p * p + 0.25 * beta2 * q.powi(4) - 0.5 * q * q;
    let level = energy.max(0.5 * (q * q + p * p));
    let coherent = required_dim(0.5 * (point.q * point.q + point.p * point.p));
    round_dim(level, params.dim).max(coherent.min(params.dim))
}

/// Next basis after a leak at `dim`, or `None` at the cap.
pub fn next_dim(dim: usize, cap: usize) -> Option<usize> {
    (dim < cap).then(|| round_dim(1.5 * dim as f64, cap))
}

/// Outcome of one trajectory on a [`BasisLadder`].
#[derive(Clone, Debug, PartialEq)]
pub struct LadderRun {
    pub record: TrajectoryRecord,
    /// Basis the accepted run used.
    pub dim: usize,
    /// Discarded runs that leaked.
    pub reruns: usize,
}

/// Integrators for every basis a set of trajectories can reach.
#[derive(Clone, Debug)]
pub struct BasisLadder {
    cap: usize,
    policy: BasisPolicy,
    integrators: BTreeMap<usize, QsdIntegrator>,
}

impl BasisLadder {
    /// `params.dim` is the cap; `starts` are the starting sizes in use.
    pub fn new(
        params: &ModelParams,
        hamiltonian_enabled: bool,
        options: IntegratorOptions,
        policy: BasisPolicy,
        starts: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let cap = params.dim;
        let mut integrators = BTreeMap::new();
        for start in starts {
            if start > cap {
                return Err(Error::Truncation {
                    dim: cap,
                    required: start,
                });
            }
            let mut next = Some(start);
            while let Some(dim) = next {
                if integrators.contains_key(&dim) {
                    break;
                }
                let p = ModelParams {
                    dim,
                    ..params.clone()
                };
                integrators.insert(dim, QsdIntegrator::with_options(&p, hamiltonian_enabled, options.clone())?);
                next = match policy {
                    BasisPolicy::Fixed => None,
                    BasisPolicy::Adaptive => next_dim(dim, cap),
                };
            }
        }
        Ok(BasisLadder {
            cap,
            policy,
            integrators,
        })
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn dims(&self) -> Vec<usize> {
        self.integrators.keys().copied().collect()
    }

    /// Runs a coherent start at `point` from basis `start`, moving up the
    /// ladder after each truncation leak. Every rerun replays the same noise.
    pub fn evolve(&self, point: PhasePoint, start: usize, seed: SeedSpec) -> Result<LadderRun> {
        let mut dim = start;
        let mut reruns = 0;
        loop {
            let integrator = self.integrators.get(&dim).ok_or(Error::Truncation {
                dim: self.cap,
                required: dim,
            })?;
            let result = coherent_state_at(point, dim).and_then(|s| integrator.evolve(&s, seed));
            match (result, self.policy) {
                (Ok(record), _) => return Ok(LadderRun { record, dim, reruns }),
                (Err(Error::TruncationLeak { .. }), BasisPolicy::Adaptive) if dim < self.cap => {
                    dim = next_dim(dim, self.cap).unwrap_or(self.cap);
                    reruns += 1;
                }
                (Err(e), _) => return Err(e),
            }
        }
    }
}
