//! Dense Lindblad master equation
//!
//! ```text
//! drho/dtau = -i [H(tau), rho] + K rho K^dagger - {K^dagger K, rho} / 2
//! ```
//!
//! integrated with classical RK4. This is the ensemble-average oracle for
//! the stochastic integrator, so it only has to handle small bases.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{number_operator, BandedOperator, StateVector};
use crate::model::{drive_amplitude, ModelOperators, ModelParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest basis accepted by [`evolve_density`].
pub const MAX_DENSE_DIM: usize = 128;

/// Eigenvalues below this abort the evolution.
pub const POSITIVITY_TOLERANCE: f64 = 1e-6;

/// RK4 is stable on the imaginary axis up to `2 sqrt 2`; stay well inside.
const RK4_STABILITY_MARGIN: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() < 2 {
            return Err(Error::InvalidDimension { dim: m.nrows() });
        }
        Ok(DensityMatrix { m })
    }

    /// `|psi><psi|` for a normalized state.
    pub fn pure(state: &StateVector) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amps());
        DensityMatrix { m: &v * v.adjoint() }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    pub fn purity(&self) -> f64 {
        // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.m.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn hermitian_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.m[(r, c)] - self.m[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.m + self.m.adjoint()).scale(0.5);
        herm.symmetric_eigenvalues().min()
    }

    /// `Tr(A rho)`.
    pub fn expectation(&self, op: &BandedOperator) -> Result<Complex64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.dim(),
            });
        }
        Ok(op.trace_with(&self.m))
    }
}

/// Right-hand side evaluator with cached operators.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    params: ModelParams,
    ops: ModelOperators,
    k_dag: BandedOperator,
}

impl Liouvillian {
    pub fn new(params: &ModelParams) -> Result<Self> {
        Self::from_ops(params, ModelOperators::build(params)?)
    }

    pub fn from_ops(params: &ModelParams, ops: ModelOperators) -> Result<Self> {
        params.validate()?;
        if ops.dim() != params.dim {
            return Err(Error::DimensionMismatch {
                expected: params.dim,
                found: ops.dim(),
            });
        }
        let k_dag = ops.k_op.adjoint();
        Ok(Liouvillian {
            params: params.clone(),
            ops,
            k_dag,
        })
    }

    pub fn operators(&self) -> &ModelOperators {
        &self.ops
    }

    /// Upper estimate of the spectral radius of the generator.
    pub fn spectral_radius(&self) -> f64 {
        let drive = (self.params.g / self.params.beta).abs() * self.ops.q_op.gershgorin_radius();
        2.0 * (self.ops.h_static.gershgorin_radius() + drive) + self.ops.k_dag_k.gershgorin_radius()
    }

    /// `out = L(tau) rho`; `tmp` is scratch of the same shape.
    pub fn rhs_into(
        &self,
        rho: &DMatrix<Complex64>,
        tau: f64,
        out: &mut DMatrix<Complex64>,
        tmp: &mut DMatrix<Complex64>,
    ) -> Result<()> {
        let f = drive_amplitude(&self.params, tau)?;
        out.fill(ZERO);
        // -i [H, rho]
        self.ops.h_static.left_mul_dense_add(-I, rho, out);
        self.ops.h_static.right_mul_dense_add(I, rho, out);
        if f != 0.0 {
            self.ops.q_op.left_mul_dense_add(-I * f, rho, out);
            self.ops.q_op.right_mul_dense_add(I * f, rho, out);
        }
        // K rho K^dagger - {K^dagger K, rho}/2
        tmp.fill(ZERO);
        self.ops.k_op.left_mul_dense_add(ONE, rho, tmp);
        self.k_dag.right_mul_dense_add(ONE, tmp, out);
        let half = Complex64::new(-0.5, 0.0);
        self.ops.k_dag_k.left_mul_dense_add(half, rho, out);
        self.ops.k_dag_k.right_mul_dense_add(half, rho, out);
        Ok(())
    }
}

pub fn lindblad_rhs(
    rho: &DensityMatrix,
    ops: &ModelOperators,
    params: &ModelParams,
    tau: f64,
) -> Result<DMatrix<Complex64>> {
    if rho.dim() != ops.dim() {
        return Err(Error::DimensionMismatch {
            expected: ops.dim(),
            found: rho.dim(),
        });
    }
    let l = Liouvillian::from_ops(params, ops.clone())?;
    let d = rho.dim();
    let mut out = DMatrix::from_element(d, d, ZERO);
    let mut tmp = out.clone();
    l.rhs_into(rho.matrix(), tau, &mut out, &mut tmp)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityOptions {
    /// Moments are recorded every `record_stride` steps of `params.dtau`.
    pub record_stride: usize,
    /// Positivity is checked and a snapshot kept every `snapshot_stride`
    /// records.
    pub snapshot_stride: usize,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            record_stride: 10,
            snapshot_stride: 100,
        }
    }
}

/// Moment series of a density-matrix evolution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DensityEvolution {
    pub taus: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub q3: Vec<f64>,
    pub n: Vec<f64>,
    /// `Tr(H_D rho)`.
    pub energy: Vec<f64>,
    pub purity: Vec<f64>,
    pub trace: Vec<f64>,
    pub snapshots: Vec<(f64, DensityMatrix)>,
    pub min_eigenvalue: f64,
    /// RK4 substeps per `params.dtau`.
    pub substeps: usize,
}

pub fn evolve_density(
    params: &ModelParams,
    rho0: &DensityMatrix,
    tau_max: f64,
) -> Result<DensityEvolution> {
    evolve_density_with(&Liouvillian::new(params)?, rho0, tau_max, &DensityOptions::default())
}

pub fn evolve_density_with(
    liouvillian: &Liouvillian,
    rho0: &DensityMatrix,
    tau_max: f64,
    options: &DensityOptions,
) -> Result<DensityEvolution> {
    let params = &liouvillian.params;
    let dim = params.dim;
    if dim > MAX_DENSE_DIM {
        return Err(Error::DimensionGuard {
            dim,
            max: MAX_DENSE_DIM,
        });
    }
    if rho0.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rho0.dim(),
        });
    }
    if !(tau_max >= 0.0 && tau_max.is_finite()) {
        return Err(Error::param("tau_max", "must be finite and non-negative"));
    }
    if options.record_stride == 0 || options.snapshot_stride == 0 {
        return Err(Error::param("record_stride", "strides must be at least 1"));
    }
    let steps = ModelParams {
        tau_max,
        ..params.clone()
    }
    .n_steps();
    let substeps = ((params.dtau * liouvillian.spectral_radius()) / RK4_STABILITY_MARGIN)
        .ceil()
        .max(1.0) as usize;
    let h = params.dtau / substeps as f64;

    let ops = &liouvillian.ops;
    let n_op = number_operator(dim)?;
    let q3_op = ops.q_op.mul(&ops.q_op)?.mul(&ops.q_op)?;
    let mut rho = rho0.m.clone();
    let zero = DMatrix::from_element(dim, dim, ZERO);
    let (mut k1, mut k2, mut k3, mut k4) = (zero.clone(), zero.clone(), zero.clone(), zero.clone());
    let (mut stage, mut tmp) = (zero.clone(), zero);

    let mut out = DensityEvolution {
        min_eigenvalue: f64::INFINITY,
        substeps,
        ..DensityEvolution::default()
    };
    let mut records = 0usize;
    for k in 0..=steps {
        let tau = k as f64 * params.dtau;
        if k % options.record_stride == 0 {
            let state = DensityMatrix { m: rho.clone() };
            if !rho.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::NumericalBlowup { tau });
            }
            out.taus.push(tau);
            out.q.push(ops.q_op.trace_with(&rho).re);
            out.p.push(ops.p_op.trace_with(&rho).re);
            out.n.push(n_op.trace_with(&rho).re);
            out.q3.push(q3_op.trace_with(&rho).re);
            out.energy.push(ops.h_duffing.trace_with(&rho).re);
            out.purity.push(state.purity());
            out.trace.push(state.trace().re);
            if records % options.snapshot_stride == 0 || k == steps {
                let lambda = state.min_eigenvalue();
                out.min_eigenvalue = out.min_eigenvalue.min(lambda);
                if lambda < -POSITIVITY_TOLERANCE {
                    return Err(Error::PositivityViolation {
                        tau,
                        min_eigenvalue: lambda,
                    });
                }
                out.snapshots.push((tau, state));
            }
            records += 1;
        }
        if k == steps {
            break;
        }
        for s in 0..substeps {
            let t = tau + s as f64 * h;
            liouvillian.rhs_into(&rho, t, &mut k1, &mut tmp)?;
            stage.copy_from(&rho);
            axpy(&mut stage, Complex64::new(0.5 * h, 0.0), &k1);
            liouvillian.rhs_into(&stage, t + 0.5 * h, &mut k2, &mut tmp)?;
            stage.copy_from(&rho);
            axpy(&mut stage, Complex64::new(0.5 * h, 0.0), &k2);
            liouvillian.rhs_into(&stage, t + 0.5 * h, &mut k3, &mut tmp)?;
            stage.copy_from(&rho);
            axpy(&mut stage, Complex64::new(h, 0.0), &k3);
            liouvillian.rhs_into(&stage, t + h, &mut k4, &mut tmp)?;
            let w = Complex64::new(h / 6.0, 0.0);
            axpy(&mut rho, w, &k1);
            axpy(&mut rho, w * 2.0, &k2);
            axpy(&mut rho, w * 2.0, &k3);
            axpy(&mut rho, w, &k4);
        }
    }
    Ok(out)
}

/// `y += a x`.
fn axpy(y: &mut DMatrix<Complex64>, a: Complex64, x: &DMatrix<Complex64>) {
    for (yv, xv) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yv += a * xv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, quadratures};
    use approx::assert_abs_diff_eq;

    fn params(gamma: f64, g: f64, dim: usize) -> ModelParams {
        ModelParams {
            gamma,
            g,
            dim,
            ..ModelParams::default()
        }
    }

    fn max_abs(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Straightforward dense evaluation used as an oracle.
    fn dense_rhs(rho: &DMatrix<Complex64>, p: &ModelParams, tau: f64) -> DMatrix<Complex64> {
        let ops = ModelOperators::build(p).unwrap();
        let f = drive_amplitude(p, tau).unwrap();
        let h = ops.h_static.to_dense() + ops.q_op.to_dense().scale(f);
        let k = ops.k_op.to_dense();
        let kd = k.adjoint();
        let kdk = &kd * &k;
        (&h * rho - rho * &h) * (-I) + &k * rho * &kd - (&kdk * rho + rho * &kdk).scale(0.5)
    }

    fn random_density(dim: usize, seed: u64) -> DensityMatrix {
        // deterministic pseudo-random Hermitian positive matrix
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(next(), next()));
        let m = &a * a.adjoint();
        let t = m.trace();
        DensityMatrix::from_matrix(m.map(|c| c / t)).unwrap()
    }

    #[test]
    fn rhs_matches_dense_oracle() {
        let p = params(0.125, 0.3, 12);
        let ops = ModelOperators::build(&p).unwrap();
        for seed in 0..5 {
            let rho = random_density(12, seed);
            let fast = lindblad_rhs(&rho, &ops, &p, 0.7).unwrap();
            let slow = dense_rhs(rho.matrix(), &p, 0.7);
            assert!(max_abs(&(fast - slow)) < 1e-12);
        }
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let p = params(0.125, 0.3, 16);
        let ops = ModelOperators::build(&p).unwrap();
        for seed in 0..100 {
            let rho = random_density(16, seed);
            let d = lindblad_rhs(&rho, &ops, &p, seed as f64 * 0.1).unwrap();
            assert!(d.trace().norm() < 1e-12);
            assert!(max_abs(&(&d - d.adjoint())) < 1e-12);
        }
    }

    #[test]
    fn vacuum_dissipator_vanishes() {
        let p = params(0.125, 0.0, 8);
        let ops = ModelOperators::build(&p).unwrap();
        let rho = DensityMatrix::pure(&StateVector::vacuum(8).unwrap());
        let full = lindblad_rhs(&rho, &ops, &p, 0.0).unwrap();
        let h = ops.h_static.to_dense();
        let commutator = (&h * rho.matrix() - rho.matrix() * &h) * (-I);
        assert!(max_abs(&(full - &commutator)) < 1e-15);
        assert!(max_abs(&commutator) > 0.1);
    }

    #[test]
    fn zero_generator_rhs_vanishes() {
        let mut p = params(0.0, 0.0, 8);
        p.beta = 1.0;
        let mut ops = ModelOperators::build(&p).unwrap();
        ops.h_static = BandedOperator::zeros(8);
        let rho = random_density(8, 3);
        assert_eq!(max_abs(&lindblad_rhs(&rho, &ops, &p, 1.0).unwrap()), 0.0);
    }

    #[test]
    fn first_moment_rate_is_exact() {
        // Tr(Q L rho) = Tr(P rho) holds algebraically away from the top level
        let p = params(0.125, 0.3, 32);
        let ops = ModelOperators::build(&p).unwrap();
        let rho = DensityMatrix::pure(&coherent_state(Complex64::new(1.0, -0.5), 32).unwrap());
        let d = lindblad_rhs(&rho, &ops, &p, 0.3).unwrap();
        let (q, pq) = quadratures(32).unwrap();
        assert_abs_diff_eq!(q.trace_with(&d).re, pq.trace_with(rho.matrix()).re, epsilon = 1e-10);
    }

    #[test]
    fn unitary_limit_conserves_energy() {
        let p = ModelParams {
            tau_max: 5.0,
            ..params(0.0, 0.0, 32)
        };
        let rho = DensityMatrix::pure(&coherent_state(Complex64::new(1.0, 0.5), 32).unwrap());
        let evo = evolve_density(&p, &rho, 5.0).unwrap();
        let e0 = evo.energy[0];
        assert!(evo.energy.iter().all(|e| (e - e0).abs() < 1e-8));
    }

    #[test]
    fn invariants_hold_along_driven_run() {
        let p = params(0.125, 0.3, 24);
        let rho = DensityMatrix::pure(&StateVector::vacuum(24).unwrap());
        let evo = evolve_density(&p, &rho, 4.0).unwrap();
        assert!(evo.trace.iter().all(|t| (t - 1.0).abs() < 1e-10));
        assert!(evo.purity.iter().all(|x| *x <= 1.0 + 1e-10));
        assert!(evo.min_eigenvalue >= -1e-8);
        for (_, s) in &evo.snapshots {
            assert!(s.hermitian_defect() < 1e-12);
        }
        assert_eq!(evo.taus.len(), 401);
    }

    #[test]
    fn dimension_guard() {
        let p = params(0.125, 0.3, MAX_DENSE_DIM + 1);
        let rho = DensityMatrix::pure(&StateVector::vacuum(MAX_DENSE_DIM + 1).unwrap());
        assert!(matches!(
            evolve_density(&p, &rho, 0.1),
            Err(Error::DimensionGuard { .. })
        ));
    }
}
