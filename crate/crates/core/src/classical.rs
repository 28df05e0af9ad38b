//! Classical driven, damped double well
//!
//! ```text
//! x'' + 2 Gamma x' + x^3 - x = g cos(Omega t)
//! ```
//!
//! integrated with fixed-step RK4. Only `gamma`, `g`, `omega` and `dtau`
//! of [`ModelParams`] are used.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub x: f64,
    pub p: f64,
    pub t: f64,
}

impl ClassicalState {
    pub fn new(x: f64, p: f64) -> Self {
        ClassicalState { x, p, t: 0.0 }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.p.is_finite()
    }
}

/// `p^2/2 + x^4/4 - x^2/2`.
pub fn energy(s: &ClassicalState) -> f64 {
    0.5 * s.p * s.p + 0.25 * s.x.powi(4) - 0.5 * s.x * s.x
}

pub fn duffing_rhs(state: &ClassicalState, params: &ModelParams) -> (f64, f64) {
    let ClassicalState { x, p, t } = *state;
    (
        p,
        -2.0 * params.gamma * p - x * x * x + x + params.g * (params.omega * t).cos(),
    )
}

fn rk4_step(s: &ClassicalState, params: &ModelParams, h: f64) -> ClassicalState {
    let at = |x: f64, p: f64, t: f64| duffing_rhs(&ClassicalState { x, p, t }, params);
    let (k1x, k1p) = at(s.x, s.p, s.t);
    let (k2x, k2p) = at(s.x + 0.5 * h * k1x, s.p + 0.5 * h * k1p, s.t + 0.5 * h);
    let (k3x, k3p) = at(s.x + 0.5 * h * k2x, s.p + 0.5 * h * k2p, s.t + 0.5 * h);
    let (k4x, k4p) = at(s.x + h * k3x, s.p + h * k3p, s.t + h);
    ClassicalState {
        x: s.x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        p: s.p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
        t: s.t + h,
    }
}

/// Orbit and its stroboscopic section.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClassicalTrajectory {
    /// Samples every `record_stride` steps, starting with the initial state.
    pub samples: Vec<ClassicalState>,
    /// State at `t = k 2 pi / Omega` (nearest grid step), `k = 0, 1, ...`
    pub poincare: Vec<ClassicalState>,
    pub final_state: ClassicalState,
}

pub fn integrate_classical(
    params: &ModelParams,
    initial: ClassicalState,
    t_max: f64,
) -> Result<ClassicalTrajectory> {
    integrate_classical_with(params, initial, t_max, 100)
}

pub fn integrate_classical_with(
    params: &ModelParams,
    initial: ClassicalState,
    t_max: f64,
    record_stride: usize,
) -> Result<ClassicalTrajectory> {
    check_params(params, t_max)?;
    if record_stride == 0 {
        return Err(Error::param("record_stride", "must be at least 1"));
    }
    let h = params.dtau;
    let steps = steps_for(t_max, h);
    let period = 2.0 * std::f64::consts::PI / params.omega;
    let strobe_step = |k: usize| (k as f64 * period / h).round() as usize;
    let mut next_section = 0usize;

    let mut out = ClassicalTrajectory::default();
    let mut s = initial;
    let t0 = initial.t;
    for k in 0..=steps {
        if k % record_stride == 0 {
            out.samples.push(s);
        }
        if strobe_step(next_section) == k {
            out.poincare.push(s);
            next_section += 1;
        }
        if k == steps {
            break;
        }
        s = rk4_step(&s, params, h);
        // keep the clock on the grid instead of accumulating round-off
        s.t = t0 + (k + 1) as f64 * h;
        if !s.is_finite() {
            return Err(Error::NumericalBlowup { tau: s.t });
        }
    }
    out.final_state = s;
    Ok(out)
}

fn check_params(params: &ModelParams, t_max: f64) -> Result<()> {
    if !(params.dtau > 0.0 && params.dtau.is_finite()) {
        return Err(Error::param("dtau", "must be positive"));
    }
    if !(params.omega > 0.0 && params.omega.is_finite()) {
        return Err(Error::param("omega", "must be positive"));
    }
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::param("t_max", "must be finite and non-negative"));
    }
    Ok(())
}

fn steps_for(t_max: f64, h: f64) -> usize {
    let raw = t_max / h;
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 * raw.max(1.0) {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovOptions {
    /// Time between tangent-vector renormalizations.
    pub renormalize_every: f64,
    /// Initial stretch excluded from the average.
    pub transient: f64,
}

impl LyapunovOptions {
    pub fn for_params(params: &ModelParams) -> Self {
        let period = 2.0 * std::f64::consts::PI / params.omega;
        LyapunovOptions {
            renormalize_every: period,
            transient: 50.0 * period,
        }
    }
}

/// Maximal Lyapunov exponent by Benettin's method on the linearized flow.
pub fn classical_lyapunov(params: &ModelParams, initial: ClassicalState, t_max: f64) -> Result<f64> {
    classical_lyapunov_with(params, initial, t_max, &LyapunovOptions::for_params(params))
}

pub fn classical_lyapunov_with(
    params: &ModelParams,
    initial: ClassicalState,
    t_max: f64,
    options: &LyapunovOptions,
) -> Result<f64> {
    check_params(params, t_max)?;
    let h = params.dtau;
    let every = steps_for(options.renormalize_every, h).max(1);
    let skip = steps_for(options.transient, h);
    let steps = steps_for(t_max, h);
    if steps <= skip {
        return Err(Error::param("t_max", "must exceed the transient"));
    }

    // state, tangent vector (dx, dp)
    let rhs = |y: [f64; 4], t: f64| {
        let (x, p, dx, dp) = (y[0], y[1], y[2], y[3]);
        [
            p,
            -2.0 * params.gamma * p - x * x * x + x + params.g * (params.omega * t).cos(),
            dp,
            -2.0 * params.gamma * dp - (3.0 * x * x - 1.0) * dx,
        ]
    };
    let axpy = |y: [f64; 4], a: f64, k: [f64; 4]| [y[0] + a * k[0], y[1] + a * k[1], y[2] + a * k[2], y[3] + a * k[3]];

    let mut y = [initial.x, initial.p, 1.0, 0.0];
    let mut log_sum = 0.0;
    for k in 0..steps {
        let t = initial.t + k as f64 * h;
        let k1 = rhs(y, t);
        let k2 = rhs(axpy(y, 0.5 * h, k1), t + 0.5 * h);
        let k3 = rhs(axpy(y, 0.5 * h, k2), t + 0.5 * h);
        let k4 = rhs(axpy(y, h, k3), t + h);
        for i in 0..4 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalBlowup { tau: t + h });
        }
        let done = k + 1;
        if done % every == 0 || done == skip || done == steps {
            let norm = y[2].hypot(y[3]);
            if norm == 0.0 {
                return Err(Error::ZeroNorm);
            }
            if done > skip {
                log_sum += norm.ln();
            }
            y[2] /= norm;
            y[3] /= norm;
        }
    }
    Ok(log_sum / ((steps - skip) as f64 * h))
}

/// Area of the triangle spanned by three orbits started at `center`,
/// `center + (size, 0)` and `center + (0, size)`, sampled every
/// `record_stride` steps. Returns `(t, area)` pairs.
pub fn triangle_areas(
    params: &ModelParams,
    center: ClassicalState,
    size: f64,
    t_max: f64,
    record_stride: usize,
) -> Result<Vec<(f64, f64)>> {
    let a = integrate_classical_with(params, center, t_max, record_stride)?;
    let b = integrate_classical_with(
        params,
        ClassicalState { x: center.x + size, ..center },
        t_max,
        record_stride,
    )?;
    let c = integrate_classical_with(
        params,
        ClassicalState { p: center.p + size, ..center },
        t_max,
        record_stride,
    )?;
    Ok(a
        .samples
        .iter()
        .zip(&b.samples)
        .zip(&c.samples)
        .map(|((a, b), c)| {
            let cross = (b.x - a.x) * (c.p - a.p) - (b.p - a.p) * (c.x - a.x);
            (a.t, 0.5 * cross.abs())
        })
        .collect())
}
