//! Truncated Fock-basis linear algebra.
//!
//! Conventions: `a|n> = sqrt(n)|n-1>`, `Q = (a + a^dagger)/sqrt(2)`,
//! `P = (a - a^dagger)/(i sqrt(2))`, so `[Q, P] = i` away from the top
//! basis state.

mod banded;

pub use banded::{BandLu, BandedOperator};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Pure state on a truncated Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        check_dim(amps.len())?;
        Ok(StateVector { amps })
    }

    /// Number state `|n>`.
    pub fn basis(dim: usize, n: usize) -> Result<Self> {
        check_dim(dim)?;
        if n >= dim {
            return Err(Error::Truncation {
                dim,
                required: n + 1,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[n] = Complex64::new(1.0, 0.0);
        Ok(StateVector { amps })
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::basis(dim, 0)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit norm and returns the norm it had before.
    pub fn normalize(&mut self) -> Result<f64> {
        let norm = self.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let inv = 1.0 / norm;
        for c in &mut self.amps {
            *c *= inv;
        }
        Ok(norm)
    }

    /// Combined population of the `levels` highest basis states.
    pub fn top_population(&self, levels: usize) -> f64 {
        let n = self.amps.len();
        self.amps[n - levels.min(n)..]
            .iter()
            .map(|c| c.norm_sqr())
            .sum()
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    Ok(())
}

/// Point in the scaled phase space `(<Q>, <P>)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(q: f64, p: f64) -> Self {
        PhasePoint { q, p }
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        (self.q - other.q).hypot(self.p - other.p)
    }

    /// Phase-space label `alpha = sqrt(2) (q + i p)` of the coherent state
    /// centred here.
    pub fn coherent_label(&self) -> Complex64 {
        Complex64::new(self.q, self.p) * std::f64::consts::SQRT_2
    }
}

/// Annihilation operator: single superdiagonal `(1, sqrt 2, ..., sqrt(dim-1))`.
pub fn annihilation(dim: usize) -> Result<BandedOperator> {
    check_dim(dim)?;
    let values = (1..dim)
        .map(|n| Complex64::new((n as f64).sqrt(), 0.0))
        .collect();
    BandedOperator::from_diagonals(dim, vec![(1, values)])
}

pub fn creation(dim: usize) -> Result<BandedOperator> {
    Ok(annihilation(dim)?.adjoint())
}

/// `a^dagger a = diag(0, 1, ..., dim-1)`, exact on the truncated basis.
pub fn number_operator(dim: usize) -> Result<BandedOperator> {
    check_dim(dim)?;
    Ok(BandedOperator::from_diagonal(
        (0..dim).map(|n| Complex64::new(n as f64, 0.0)).collect(),
    ))
}

/// Position and momentum quadratures `(Q, P)`.
pub fn quadratures(dim: usize) -> Result<(BandedOperator, BandedOperator)> {
    let a = annihilation(dim)?;
    let ad = a.adjoint();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = a.add(&ad)?.scale_real(s);
    // (a - a^dagger) / (i sqrt 2) = -i (a - a^dagger) / sqrt 2
    let p = a.sub(&ad)?.scale(Complex64::new(0.0, -s));
    Ok((q, p))
}

/// Smallest basis that holds a coherent state of mean photon number
/// `mean_photons` with top-level population below 1e-8:
/// `n + 10 sqrt(n) + 20`.
pub fn required_dim(mean_photons: f64) -> usize {
    let n = mean_photons.max(0.0);
    (n + 10.0 * n.sqrt() + 20.0).ceil() as usize
}

/// Coherent state with phase-space label `alpha = sqrt(2) (<Q> + i <P>)`.
///
/// The label is twice the `a` eigenvalue, so `<Q> = Re(alpha)/sqrt(2)` and
/// `<P> = Im(alpha)/sqrt(2)`. Amplitudes follow the recurrence
/// `c_{n+1} = c_n * z / sqrt(n+1)` with `z = alpha/2`, carried in log
/// magnitude so that large `|z|` neither overflows nor underflows.
pub fn coherent_state(alpha: Complex64, dim: usize) -> Result<StateVector> {
    check_dim(dim)?;
    let z = alpha * 0.5;
    let mean_photons = z.norm_sqr();
    let required = required_dim(mean_photons);
    if dim < required {
        return Err(Error::Truncation { dim, required });
    }
    let (r, theta) = z.to_polar();
    let mut amps = vec![ZERO; dim];
    if r == 0.0 {
        amps[0] = Complex64::new(1.0, 0.0);
        return Ok(StateVector { amps });
    }
    let ln_r = r.ln();
    let mut log_mag = -0.5 * mean_photons;
    for (n, c) in amps.iter_mut().enumerate() {
        if n > 0 {
            log_mag += ln_r - 0.5 * (n as f64).ln();
        }
        *c = Complex64::from_polar(log_mag.exp(), n as f64 * theta);
    }
    let mut state = StateVector { amps };
    state.normalize()?;
    Ok(state)
}

/// Coherent state centred on a phase-space point.
pub fn coherent_state_at(point: PhasePoint, dim: usize) -> Result<StateVector> {
    coherent_state(point.coherent_label(), dim)
}

/// `<psi| op |psi>`.
pub fn expectation(op: &BandedOperator, state: &StateVector) -> Result<Complex64> {
    if op.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: state.dim(),
        });
    }
    Ok(op.quadratic_form(state.amps()))
}

/// Single-state moments used throughout the trajectory records.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub q: f64,
    pub p: f64,
    /// `<(Q - <Q>)^2>`
    pub vq: f64,
    /// `<(P - <P>)^2>`
    pub vp: f64,
    /// Symmetrized covariance `<dQ dP + dP dQ>/2`.
    pub vqp: f64,
    /// `<a^dagger a>`
    pub n: f64,
    /// `sigma(a^dagger, a) = <a^dagger a> - |<a>|^2`
    pub sigma_a: f64,
}

/// Pre-built quadrature operators plus scratch space for measuring
/// [`Moments`] without allocating.
#[derive(Clone, Debug)]
pub struct Observables {
    q: BandedOperator,
    p: BandedOperator,
    a: BandedOperator,
    qpsi: Vec<Complex64>,
    ppsi: Vec<Complex64>,
}

impl Observables {
    pub fn new(dim: usize) -> Result<Self> {
        let (q, p) = quadratures(dim)?;
        Ok(Observables {
            q,
            p,
            a: annihilation(dim)?,
            qpsi: vec![ZERO; dim],
            ppsi: vec![ZERO; dim],
        })
    }

    /// Moments of a normalized state.
    pub fn measure(&mut self, state: &StateVector) -> Moments {
        let psi = state.amps();
        self.q.apply_to(psi, &mut self.qpsi);
        self.p.apply_to(psi, &mut self.ppsi);
        let mut q = 0.0;
        let mut p = 0.0;
        let mut qq = 0.0;
        let mut pp = 0.0;
        let mut qp = ZERO;
        for ((c, qv), pv) in psi.iter().zip(&self.qpsi).zip(&self.ppsi) {
            q += (c.conj() * qv).re;
            p += (c.conj() * pv).re;
            qq += qv.norm_sqr();
            pp += pv.norm_sqr();
            qp += qv.conj() * pv;
        }
        let n: f64 = psi
            .iter()
            .enumerate()
            .map(|(k, c)| k as f64 * c.norm_sqr())
            .sum();
        let a_mean = self.a.quadratic_form(psi);
        Moments {
            q,
            p,
            vq: qq - q * q,
            vp: pp - p * p,
            vqp: qp.re - q * p,
            n,
            sigma_a: n - a_mean.norm_sqr(),
        }
    }

    pub fn q(&self) -> &BandedOperator {
        &self.q
    }

    pub fn p(&self) -> &BandedOperator {
        &self.p
    }
}
