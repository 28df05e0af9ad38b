//! Dimensionless Hamiltonian and Lindblad operator of the quantized
//! dissipative Duffing oscillator.
//!
//! ```text
//! H_D  = P^2/2 + (beta^2/4) Q^4 - Q^2/2
//! H_R  = (Gamma/2)(QP + PQ)
//! H_ex = -(g/beta) Q cos(Omega tau)
//! K    = sqrt(Gamma) (Q + iP) = sqrt(2 Gamma) a
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{annihilation, number_operator, quadratures, BandedOperator};

/// Physical parameters plus numerical controls for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Effective Planck constant; `beta^2 = hbar / (m l^2 omega_0)`.
    pub beta: f64,
    /// Dimensionless damping.
    pub gamma: f64,
    /// Drive amplitude.
    pub g: f64,
    /// Drive frequency.
    pub omega: f64,
    /// Fock basis size.
    pub dim: usize,
    /// Time step in units of `1/omega_0`.
    pub dtau: f64,
    pub tau_max: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            beta: 1.0,
            gamma: 0.125,
            g: 0.3,
            omega: 1.0,
            dim: 32,
            dtau: 1e-3,
            tau_max: 10.0,
        }
    }
}

pub const MAX_DTAU: f64 = 1e-2;

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::param("beta", format!("must be positive, got {}", self.beta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::param("gamma", format!("must be non-negative, got {}", self.gamma)));
        }
        if !self.g.is_finite() {
            return Err(Error::param("g", "must be finite"));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::param("omega", format!("must be positive, got {}", self.omega)));
        }
        if !(self.dtau > 0.0 && self.dtau <= MAX_DTAU) {
            return Err(Error::param(
                "dtau",
                format!("must lie in (0, {MAX_DTAU}], got {}", self.dtau),
            ));
        }
        if !(self.tau_max > 0.0 && self.tau_max.is_finite()) {
            return Err(Error::param("tau_max", format!("must be positive, got {}", self.tau_max)));
        }
        if self.dim < 2 {
            return Err(Error::InvalidDimension { dim: self.dim });
        }
        Ok(())
    }

    pub fn drive_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    /// `ceil(tau_max / dtau)`, guarded against round-off just above an integer.
    pub fn n_steps(&self) -> usize {
        let ratio = self.tau_max / self.dtau;
        let nearest = ratio.round();
        if (ratio - nearest).abs() < 1e-9 * ratio.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        }
    }
}

/// Operators shared by the stochastic and density-matrix integrators.
#[derive(Clone, Debug)]
pub struct ModelOperators {
    /// `H_D + H_R`.
    pub h_static: BandedOperator,
    /// `H_D` alone, for energy diagnostics.
    pub h_duffing: BandedOperator,
    /// `Q`; the drive enters as `drive_amplitude(tau) * Q`.
    pub q_op: BandedOperator,
    pub p_op: BandedOperator,
    pub a_op: BandedOperator,
    /// Lindblad operator `K = sqrt(2 Gamma) a`.
    pub k_op: BandedOperator,
    pub k_dag_k: BandedOperator,
}

impl ModelOperators {
    pub fn build(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let (q, p) = quadratures(params.dim)?;
        let (h_duffing, h_relax) = static_parts(params)?;
        let h_static = h_duffing.add(&h_relax)?;
        let k_op = build_lindblad(params)?;
        let k_dag_k = k_op.adjoint().mul(&k_op)?;
        Ok(ModelOperators {
            h_static,
            h_duffing,
            q_op: q,
            p_op: p,
            a_op: annihilation(params.dim)?,
            k_op,
            k_dag_k,
        })
    }

    pub fn dim(&self) -> usize {
        self.q_op.dim()
    }
}

/// Extra levels used when forming operator products, so that the kept
/// block holds the exact matrix elements of `Q^4`, `P^2` and `QP + PQ`.
/// Products of already-truncated quadratures would carry spurious entries on
/// the last levels that soften the basis edge.
const PRODUCT_PADDING: usize = 4;

fn static_parts(params: &ModelParams) -> Result<(BandedOperator, BandedOperator)> {
    let (q, p) = quadratures(params.dim + PRODUCT_PADDING)?;
    Ok((
        duffing_hamiltonian(params.beta, &q, &p)?.leading_block(params.dim)?,
        relaxation_hamiltonian(params.gamma, &q, &p)?.leading_block(params.dim)?,
    ))
}

fn duffing_hamiltonian(beta: f64, q: &BandedOperator, p: &BandedOperator) -> Result<BandedOperator> {
    let q2 = q.mul(q)?;
    let q4 = q2.mul(&q2)?;
    let p2 = p.mul(p)?;
    p2.scale_real(0.5)
        .add(&q4.scale_real(0.25 * beta * beta))?
        .sub(&q2.scale_real(0.5))
}

fn relaxation_hamiltonian(gamma: f64, q: &BandedOperator, p: &BandedOperator) -> Result<BandedOperator> {
    Ok(q.mul(p)?.add(&p.mul(q)?)?.scale_real(0.5 * gamma))
}

/// `H_D + H_R`: Hermitian, half-bandwidth 4, even offsets only.
pub fn build_hamiltonian_static(params: &ModelParams) -> Result<BandedOperator> {
    params.validate()?;
    let (h_duffing, h_relax) = static_parts(params)?;
    h_duffing.add(&h_relax)
}

/// Scalar multiplying `Q` in the drive term: `-(g/beta) cos(Omega tau)`.
pub fn drive_amplitude(params: &ModelParams, tau: f64) -> Result<f64> {
    if params.beta == 0.0 {
        return Err(Error::ZeroBeta);
    }
    Ok(-(params.g / params.beta) * (params.omega * tau).cos())
}

/// `K = sqrt(Gamma)(Q + iP)`, built as `sqrt(2 Gamma) a`, which it equals
/// exactly on the truncated basis.
pub fn build_lindblad(params: &ModelParams) -> Result<BandedOperator> {
    if !(params.gamma >= 0.0) {
        return Err(Error::param("gamma", format!("must be non-negative, got {}", params.gamma)));
    }
    Ok(annihilation(params.dim)?.scale_real((2.0 * params.gamma).sqrt()))
}

/// `K^dagger K = 2 Gamma a^dagger a`.
pub fn lindblad_number_form(params: &ModelParams) -> Result<BandedOperator> {
    Ok(number_operator(params.dim)?.scale_real(2.0 * params.gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, expectation, StateVector};
    use num_complex::Complex64;
    use approx::assert_abs_diff_eq;

    fn params(beta: f64, gamma: f64, dim: usize) -> ModelParams {
        ModelParams {
            beta,
            gamma,
            dim,
            ..ModelParams::default()
        }
    }

    #[test]
    fn vacuum_energy_matches_gaussian_moments() {
        for (beta, expected) in [(1.0, 3.0 / 16.0), (0.4, 0.03)] {
            let ops = ModelOperators::build(&params(beta, 0.0, 12)).unwrap();
            let vac = StateVector::vacuum(12).unwrap();
            let e = expectation(&ops.h_duffing, &vac).unwrap();
            assert_abs_diff_eq!(e.re, expected, epsilon = 1e-14);
            assert_abs_diff_eq!(e.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn relaxation_term_vanishes_on_vacuum() {
        for gamma in [0.0, 0.125, 0.7] {
            let p = params(0.6, gamma, 10);
            let ops = ModelOperators::build(&p).unwrap();
            let vac = StateVector::vacuum(10).unwrap();
            let hr = ops.h_static.sub(&ops.h_duffing).unwrap();
            assert_abs_diff_eq!(expectation(&hr, &vac).unwrap().norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn static_hamiltonian_is_hermitian_pentadiagonal_in_parity() {
        let h = build_hamiltonian_static(&params(0.4, 0.125, 40)).unwrap();
        assert!(h.hermitian_defect() < 1e-14);
        assert_eq!(h.lower_bw(), 4);
        assert_eq!(h.upper_bw(), 4);
        assert_eq!(h.offsets(), vec![-4, -2, 0, 2, 4]);
    }

    #[test]
    fn drive_amplitude_values() {
        let p = ModelParams::default();
        assert_abs_diff_eq!(drive_amplitude(&p, 0.0).unwrap(), -0.3, epsilon = 1e-15);
        let zero_g = ModelParams { g: 0.0, ..p.clone() };
        assert_eq!(drive_amplitude(&zero_g, 1.234).unwrap(), 0.0);
        let small = ModelParams { beta: 0.1, ..p.clone() };
        assert_abs_diff_eq!(
            drive_amplitude(&small, std::f64::consts::PI).unwrap(),
            3.0,
            epsilon = 1e-12
        );
        let bad = ModelParams { beta: 0.0, ..p };
        assert!(matches!(drive_amplitude(&bad, 0.0), Err(Error::ZeroBeta)));
    }

    #[test]
    fn lindblad_operator() {
        let zero = build_lindblad(&params(1.0, 0.0, 6)).unwrap();
        assert_eq!(zero.max_abs(), 0.0);

        let k2 = build_lindblad(&params(1.0, 0.125, 2)).unwrap();
        assert_abs_diff_eq!(k2.get(0, 1).re, 0.5, epsilon = 1e-15);

        let k = build_lindblad(&params(1.0, 0.3, 8)).unwrap();
        let kv = k.apply(StateVector::vacuum(8).unwrap().amps()).unwrap();
        assert!(kv.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn k_dag_k_is_scaled_number_operator() {
        let p = params(1.0, 0.125, 24);
        let ops = ModelOperators::build(&p).unwrap();
        let diff = ops.k_dag_k.sub(&lindblad_number_form(&p).unwrap()).unwrap();
        assert!(diff.max_abs() < 1e-14);
    }

    #[test]
    fn params_validation() {
        let ok = ModelParams::default();
        assert!(ok.validate().is_ok());
        for bad in [
            ModelParams { beta: 0.0, ..ok.clone() },
            ModelParams { gamma: -0.1, ..ok.clone() },
            ModelParams { omega: 0.0, ..ok.clone() },
            ModelParams { dtau: 0.02, ..ok.clone() },
            ModelParams { dtau: 0.0, ..ok.clone() },
            ModelParams { dim: 1, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        assert_eq!(ModelParams { tau_max: 10.0, dtau: 1e-3, ..ok.clone() }.n_steps(), 10_000);
        assert_eq!(ModelParams { tau_max: 0.0105, dtau: 1e-3, ..ok }.n_steps(), 11);
    }

    #[test]
    fn lindblad_matches_quadrature_form() {
        let p = params(1.0, 0.125, 16);
        let (q, pm) = quadratures(16).unwrap();
        let k = q
            .linear_combination(Complex64::new(1.0, 0.0), &pm, Complex64::new(0.0, 1.0))
            .unwrap()
            .scale_real(p.gamma.sqrt());
        let diff = k.sub(&build_lindblad(&p).unwrap()).unwrap();
        assert!(diff.max_abs() < 1e-15);
    }

    fn coherent_energy_argmin(beta: f64, dim: usize, hi: f64) -> f64 {
        let ops = ModelOperators::build(&params(beta, 0.0, dim)).unwrap();
        let energy = |alpha: f64| {
            let s = coherent_state(Complex64::new(alpha, 0.0), dim).unwrap();
            expectation(&ops.h_duffing, &s).unwrap().re
        };
        let (mut best, mut best_e) = (0.0, f64::INFINITY);
        let mut a = 0.0;
        while a < hi {
            let e = energy(a);
            if e < best_e {
                best = a;
                best_e = e;
            }
            a += 1e-3;
        }
        best
    }

    /// Along the real axis a coherent state has
    /// <H_D> = const + (beta^2/4)(Q^4 + 3 Q^2) - Q^2/2, minimized at
    /// Q^2 = 1/beta^2 - 3/2: the classical well position 1/beta shifted
    /// by zero-point spread.
    #[test]
    fn coherent_energy_minimum_gaussian_oracle() {
        let beta = 0.4;
        let best = coherent_energy_argmin(beta, 64, 6.0);
        let oracle = 2f64.sqrt() * (1.0 / (beta * beta) - 1.5).sqrt();
        assert!((best - oracle).abs() < 2e-3, "argmin {best} vs {oracle}");
    }

    #[test]
    fn coherent_energy_minimum_approaches_classical_well() {
        let beta = 0.15;
        let best = coherent_energy_argmin(beta, 160, 14.0);
        let classical = 2f64.sqrt() / beta;
        assert!((best - classical).abs() / classical < 0.05, "argmin {best} vs {classical}");
    }
}
