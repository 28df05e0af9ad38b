//! Ito integration of the quantum-state-diffusion equation
//!
//! ```text
//! d|psi> = -i H |psi> dtau
//!          + (<K^dagger> K - K^dagger K / 2 - <K^dagger><K> / 2) |psi> dtau
//!          + (K - <K>) |psi> dzeta
//! ```
//!
//! for one pure-state trajectory.
//!
//! The static part of `H` carries the quartic term, whose spectrum on a
//! truncated basis reaches `~beta^2 dim^2`, and the drive `f(tau) Q` reaches
//! `~(g/beta) sqrt(2 dim)`. Explicit Euler on either is unstable at useful
//! `dtau` (each step amplifies the top modes by `sqrt(1 + (h lambda)^2)`), so
//! both Hamiltonian pieces are advanced with Crank-Nicolson (Cayley) factors
//! and only the dissipative drift and the noise are explicit:
//!
//! ```text
//! phi = (I + i h/2 f Q)^-1 (I - i h/2 f Q) psi,       f = f(tau + h/2)
//! (I + i h/2 H_s) psi' = (I - i h/2 H_s) phi + h D(phi) + (K - <K>) phi dzeta
//! ```
//!
//! followed by renormalization. The band LU of `I + i h/2 H_s` is factored
//! once per parameter set and shared by every trajectory; the tridiagonal
//! drive factor is solved directly each step.

mod basis;
mod ensemble;

pub use basis::{next_dim, start_dim, BasisLadder, BasisPolicy, LadderRun, DIM_QUANTUM};
pub use ensemble::{
    map_indexed, run_ensemble, EnsembleMoments, EnsembleSpec, MomentSeries,
};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fock::{BandLu, BandedOperator, Moments, Observables, PhasePoint, StateVector};
use crate::model::{drive_amplitude, ModelOperators, ModelParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Identifies one reproducible noise stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    /// Trajectory id; distinct ids give independent ChaCha streams.
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        SeedSpec {
            master_seed,
            stream_index,
        }
    }

    pub fn stream(&self) -> NoiseStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        NoiseStream(rng)
    }
}

/// Deterministic RNG owned by one trajectory.
#[derive(Clone, Debug)]
pub struct NoiseStream(ChaCha8Rng);

impl NoiseStream {
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.0
    }
}

/// Complex Wiener increment over one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WienerIncrement {
    pub dz: Complex64,
}

impl WienerIncrement {
    pub const ZERO: WienerIncrement = WienerIncrement { dz: ZERO };
}

/// `dzeta = (g1 + i g2) sqrt(dtau/2)` with independent standard normals, so
/// `M{dzeta} = M{dzeta^2} = 0` and `M{|dzeta|^2} = dtau`.
pub fn sample_increment<R: Rng + ?Sized>(rng: &mut R, dtau: f64) -> WienerIncrement {
    let scale = (0.5 * dtau).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    WienerIncrement {
        dz: Complex64::new(re * scale, im * scale),
    }
}

/// Knobs of the trajectory integrator that are not model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorOptions {
    /// Observables are recorded every `record_stride` steps.
    pub record_stride: usize,
    /// Maximum tolerated population in the top `leak_levels` basis states.
    pub leak_threshold: f64,
    pub leak_levels: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            record_stride: 10,
            leak_threshold: 1e-6,
            leak_levels: 5,
        }
    }
}

/// One drive-period sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrobeSample {
    pub period: usize,
    pub tau: f64,
    pub point: PhasePoint,
    pub vq: f64,
    pub vp: f64,
}

/// Observable time series of one trajectory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryRecord {
    pub taus: Vec<f64>,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub vq: Vec<f64>,
    pub vp: Vec<f64>,
    pub vqp: Vec<f64>,
    pub n: Vec<f64>,
    pub sigma_a: Vec<f64>,
    pub strobe: Vec<StrobeSample>,
    /// Mean of `| ||psi|| - 1 |` before renormalization, over all steps.
    pub mean_norm_deviation: f64,
    /// Largest top-level population seen.
    pub max_top_population: f64,
}

impl TrajectoryRecord {
    fn push(&mut self, tau: f64, m: &Moments) {
        self.taus.push(tau);
        self.q.push(m.q);
        self.p.push(m.p);
        self.vq.push(m.vq);
        self.vp.push(m.vp);
        self.vqp.push(m.vqp);
        self.n.push(m.n);
        self.sigma_a.push(m.sigma_a);
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

/// Diagnostics of a single step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub norm_before: f64,
    pub top_population: f64,
}

/// Scratch buffers for [`QsdIntegrator::step`].
#[derive(Clone, Debug)]
pub struct StepWorkspace {
    rhs: Vec<Complex64>,
    kpsi: Vec<Complex64>,
    sweep: Vec<Complex64>,
}

impl StepWorkspace {
    pub fn new(dim: usize) -> Self {
        StepWorkspace {
            rhs: vec![ZERO; dim],
            kpsi: vec![ZERO; dim],
            sweep: vec![ZERO; dim],
        }
    }
}

/// Hermitian tridiagonal operator: real diagonal, complex superdiagonal.
#[derive(Clone, Debug)]
struct Tridiagonal {
    diag: Vec<f64>,
    upper: Vec<Complex64>,
}

impl Tridiagonal {
    fn from_banded(op: &BandedOperator) -> Result<Self> {
        if op.lower_bw() > 1 || op.upper_bw() > 1 {
            return Err(Error::param("q_op", "must be tridiagonal"));
        }
        let dim = op.dim();
        let diag = match op.diagonal(0) {
            Some(d) => d.iter().map(|c| c.re).collect(),
            None => vec![0.0; dim],
        };
        let upper = match op.diagonal(1) {
            Some(u) => u.to_vec(),
            None => vec![ZERO; dim - 1],
        };
        Ok(Tridiagonal { diag, upper })
    }

    /// `psi <- (I + i a T)^-1 (I - i a T) psi` by the Thomas algorithm.
    /// No pivoting is needed: the Hermitian part of `I + i a T` is `I`.
    fn cayley_in_place(&self, a: f64, psi: &mut [Complex64], rhs: &mut [Complex64], sweep: &mut [Complex64]) {
        let n = psi.len();
        let ia = Complex64::new(0.0, a);
        for i in 0..n {
            let mut t = self.diag[i] * psi[i];
            if i + 1 < n {
                t += self.upper[i] * psi[i + 1];
            }
            if i > 0 {
                t += self.upper[i - 1].conj() * psi[i - 1];
            }
            rhs[i] = psi[i] - ia * t;
        }
        let diag = |i: usize| ONE + ia * self.diag[i];
        let r = diag(0).inv();
        sweep[0] = ia * self.upper[0] * r;
        rhs[0] *= r;
        for i in 1..n {
            let sub = ia * self.upper[i - 1].conj();
            let r = (diag(i) - sub * sweep[i - 1]).inv();
            if i + 1 < n {
                sweep[i] = ia * self.upper[i] * r;
            }
            rhs[i] = (rhs[i] - sub * rhs[i - 1]) * r;
        }
        psi[n - 1] = rhs[n - 1];
        for i in (0..n - 1).rev() {
            psi[i] = rhs[i] - sweep[i] * psi[i + 1];
        }
    }
}

/// Prepared stepper for one parameter set; immutable and shareable.
#[derive(Clone, Debug)]
pub struct QsdIntegrator {
    params: ModelParams,
    ops: ModelOperators,
    hamiltonian_enabled: bool,
    options: IntegratorOptions,
    /// `-i h/2 H_s`, applied explicitly.
    half_explicit: BandedOperator,
    /// Factor of `I + i h/2 H_s`.
    implicit: BandLu,
    /// Diagonal of `K^dagger K`.
    kdk: Vec<f64>,
    drive: Tridiagonal,
}

impl QsdIntegrator {
    pub fn new(params: &ModelParams, hamiltonian_enabled: bool) -> Result<Self> {
        let ops = ModelOperators::build(params)?;
        Self::from_ops(params, ops, hamiltonian_enabled, IntegratorOptions::default())
    }

    pub fn with_options(
        params: &ModelParams,
        hamiltonian_enabled: bool,
        options: IntegratorOptions,
    ) -> Result<Self> {
        let ops = ModelOperators::build(params)?;
        Self::from_ops(params, ops, hamiltonian_enabled, options)
    }

    pub fn from_ops(
        params: &ModelParams,
        ops: ModelOperators,
        hamiltonian_enabled: bool,
        options: IntegratorOptions,
    ) -> Result<Self> {
        params.validate()?;
        if ops.dim() != params.dim {
            return Err(Error::DimensionMismatch {
                expected: params.dim,
                found: ops.dim(),
            });
        }
        if options.record_stride == 0 {
            return Err(Error::param("record_stride", "must be at least 1"));
        }
        let h = params.dtau;
        let half_explicit = ops.h_static.scale(Complex64::new(0.0, -0.5 * h));
        let implicit_op = BandedOperator::identity(params.dim)
            .linear_combination(ONE, &ops.h_static, Complex64::new(0.0, 0.5 * h))?;
        let implicit = BandLu::factor(&implicit_op)?;
        if ops.k_dag_k.offsets().iter().any(|&o| o != 0) {
            return Err(Error::param("k_dag_k", "must be diagonal in the Fock basis"));
        }
        let drive = Tridiagonal::from_banded(&ops.q_op)?;
        let kdk = match ops.k_dag_k.diagonal(0) {
            Some(d) => d.iter().map(|c| c.re).collect(),
            None => vec![0.0; params.dim],
        };
        Ok(QsdIntegrator {
            params: params.clone(),
            ops,
            hamiltonian_enabled,
            options,
            half_explicit,
            implicit,
            kdk,
            drive,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn operators(&self) -> &ModelOperators {
        &self.ops
    }

    pub fn options(&self) -> &IntegratorOptions {
        &self.options
    }

    pub fn hamiltonian_enabled(&self) -> bool {
        self.hamiltonian_enabled
    }

    fn leak_levels(&self) -> usize {
        self.options.leak_levels.min(self.params.dim / 4).max(1)
    }

    /// Advances `state` from `tau` to `tau + dtau` in place.
    pub fn step(
        &self,
        state: &mut StateVector,
        tau: f64,
        inc: WienerIncrement,
        ws: &mut StepWorkspace,
    ) -> Result<StepInfo> {
        let h = self.params.dtau;
        let dim = self.params.dim;
        if state.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: state.dim(),
            });
        }
        let StepWorkspace { rhs, kpsi, sweep } = ws;
        if self.hamiltonian_enabled {
            let f = drive_amplitude(&self.params, tau + 0.5 * h)?;
            if f != 0.0 {
                self.drive.cayley_in_place(0.5 * h * f, state.amps_mut(), rhs, sweep);
            }
        }
        let psi = state.amps();

        self.ops.k_op.apply_to(psi, kpsi);
        let k_mean: Complex64 = psi.iter().zip(kpsi.iter()).map(|(c, k)| c.conj() * k).sum();

        rhs.copy_from_slice(psi);
        if self.hamiltonian_enabled {
            self.half_explicit.apply_add(ONE, psi, rhs);
        }

        // Dissipative drift and noise share K psi.
        let k_mean_conj = k_mean.conj();
        let shift = -0.5 * k_mean.norm_sqr();
        let dz = inc.dz;
        for i in 0..dim {
            let c = psi[i];
            let drift = k_mean_conj * kpsi[i] + (shift - 0.5 * self.kdk[i]) * c;
            let noise = kpsi[i] - k_mean * c;
            rhs[i] += h * drift + dz * noise;
        }

        if self.hamiltonian_enabled {
            self.implicit.solve_in_place(rhs);
        }

        state.amps_mut().copy_from_slice(rhs);
        let norm = state.norm();
        if !norm.is_finite() {
            return Err(Error::NumericalBlowup { tau: tau + h });
        }
        state.normalize()?;
        let top = state.top_population(self.leak_levels());
        if top > self.options.leak_threshold {
            return Err(Error::TruncationLeak {
                tau: tau + h,
                population: top,
                threshold: self.options.leak_threshold,
            });
        }
        Ok(StepInfo {
            norm_before: norm,
            top_population: top,
        })
    }

    /// Integrates one trajectory over `[0, tau_max]`.
    pub fn evolve(&self, initial: &StateVector, seed: SeedSpec) -> Result<TrajectoryRecord> {
        let mut noise = seed.stream();
        self.evolve_with_noise(initial, |dtau| sample_increment(noise.rng(), dtau))
    }

    /// Integrates with caller-supplied increments (e.g. zero noise).
    pub fn evolve_with_noise(
        &self,
        initial: &StateVector,
        mut next_increment: impl FnMut(f64) -> WienerIncrement,
    ) -> Result<TrajectoryRecord> {
        let dim = self.params.dim;
        if initial.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: initial.dim(),
            });
        }
        let mut state = initial.clone();
        state.normalize()?;
        let h = self.params.dtau;
        let n_steps = self.params.n_steps();
        let stride = self.options.record_stride;
        let period = self.params.drive_period();
        let strobe_step = |k: usize| (k as f64 * period / h).round() as usize;

        let mut obs = Observables::new(dim)?;
        let mut ws = StepWorkspace::new(dim);
        let mut record = TrajectoryRecord::default();
        let mut next_period = 0usize;
        let mut norm_dev = 0.0;
        let mut max_top = state.top_population(self.leak_levels());

        for k in 0..=n_steps {
            let tau = k as f64 * h;
            let on_record = k % stride == 0;
            let on_strobe = strobe_step(next_period) == k;
            if on_record || on_strobe {
                let m = obs.measure(&state);
                if on_record {
                    record.push(tau, &m);
                }
                if on_strobe {
                    record.strobe.push(StrobeSample {
                        period: next_period,
                        tau,
                        point: PhasePoint::new(m.q, m.p),
                        vq: m.vq,
                        vp: m.vp,
                    });
                    next_period += 1;
                }
            }
            if k == n_steps {
                break;
            }
            let info = self.step(&mut state, tau, next_increment(h), &mut ws)?;
            norm_dev += (info.norm_before - 1.0).abs();
            max_top = max_top.max(info.top_population);
        }
        record.mean_norm_deviation = if n_steps > 0 {
            norm_dev / n_steps as f64
        } else {
            0.0
        };
        record.max_top_population = max_top;
        Ok(record)
    }
}

/// One step from `state`, building the implicit factor on the fly. Prefer
/// [`QsdIntegrator::step`] in loops.
pub fn qsd_step(
    state: &StateVector,
    ops: &ModelOperators,
    params: &ModelParams,
    tau: f64,
    increment: WienerIncrement,
) -> Result<StateVector> {
    let integrator = QsdIntegrator::from_ops(params, ops.clone(), true, IntegratorOptions::default())?;
    let mut next = state.clone();
    let mut ws = StepWorkspace::new(params.dim);
    integrator.step(&mut next, tau, increment, &mut ws)?;
    Ok(next)
}

pub fn evolve_trajectory(
    params: &ModelParams,
    initial: &StateVector,
    seed: SeedSpec,
    hamiltonian_enabled: bool,
) -> Result<TrajectoryRecord> {
    QsdIntegrator::new(params, hamiltonian_enabled)?.evolve(initial, seed)
}
