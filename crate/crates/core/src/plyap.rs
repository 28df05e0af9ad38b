//! Pseudo-Lyapunov analysis: separation of ensemble-mean phase-space
//! trajectories started from nearby coherent states, the dissipative upper
//! bound `D`, and the crossover estimators.
//!
//! ```text
//! Delta(tau) = (1/N) sum_pairs |(Qbar_1, Pbar_1)(tau) - (Qbar_2, Pbar_2)(tau)|
//! D(s)       = ((1 + 1/beta^2) exp(2 Gamma s) - 1)^(-1/2)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{required_dim, PhasePoint};
use crate::model::ModelParams;
use crate::qsd::{map_indexed, BasisLadder, BasisPolicy, IntegratorOptions, SeedSpec};

/// Separation used by [`EpsilonPolicy::Fixed`].
pub const FIXED_EPSILON: f64 = 0.01;

/// Classical attractor bounding box, before scaling by `1/beta`.
pub const ATTRACTOR_X: (f64, f64) = (-1.6, 1.6);
pub const ATTRACTOR_P: (f64, f64) = (-1.0, 1.0);

/// Effective Planck cell in scaled phase space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanckCell {
    pub beta: f64,
    pub linear_size: f64,
    pub area: f64,
}

impl PlanckCell {
    pub fn new(beta: f64) -> Self {
        PlanckCell {
            beta,
            linear_size: beta,
            area: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonPolicy {
    /// `epsilon = 0.01`
    Fixed,
    /// `epsilon = beta`
    Planck,
}

impl EpsilonPolicy {
    pub fn epsilon(&self, beta: f64) -> f64 {
        match self {
            EpsilonPolicy::Fixed => FIXED_EPSILON,
            EpsilonPolicy::Planck => beta,
        }
    }
}

/// How the two endpoints of a pair draw their noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoisePairing {
    /// Every trajectory has its own stream.
    #[default]
    Independent,
    /// Realization `r` of both endpoints uses the same stream.
    Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub base: PhasePoint,
    /// Unit vector `(cos theta, sin theta)`.
    pub direction: (f64, f64),
    pub epsilon: f64,
}

impl PairSpec {
    pub fn new(base: PhasePoint, angle: f64, epsilon: f64) -> Self {
        PairSpec {
            base,
            direction: (angle.cos(), angle.sin()),
            epsilon,
        }
    }

    pub fn second(&self) -> PhasePoint {
        PhasePoint::new(
            self.base.q + self.epsilon * self.direction.0,
            self.base.p + self.epsilon * self.direction.1,
        )
    }

    pub fn endpoints(&self) -> [PhasePoint; 2] {
        [self.base, self.second()]
    }
}

/// Base points uniform over the attractor box scaled by `1/beta`, offset
/// directions uniform on the circle.
pub fn make_pairs<R: Rng + ?Sized>(
    n_pairs: usize,
    policy: EpsilonPolicy,
    params: &ModelParams,
    rng: &mut R,
) -> Result<Vec<PairSpec>> {
    if n_pairs == 0 {
        return Err(Error::param("pairs", "need at least one pair"));
    }
    params.validate()?;
    let beta = params.beta;
    let epsilon = policy.epsilon(beta);
    Ok((0..n_pairs)
        .map(|_| {
            let x = rng.random_range(ATTRACTOR_X.0..=ATTRACTOR_X.1);
            let p = rng.random_range(ATTRACTOR_P.0..=ATTRACTOR_P.1);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            PairSpec::new(PhasePoint::new(x / beta, p / beta), angle, epsilon)
        })
        .collect())
}

/// Smallest basis that holds every pair endpoint as a coherent state.
pub fn required_pair_dim(pairs: &[PairSpec]) -> usize {
    pairs
        .iter()
        .flat_map(|pair| pair.endpoints())
        .map(|pt| required_dim(0.5 * (pt.q * pt.q + pt.p * pt.p)))
        .max()
        .unwrap_or(2)
}

/// Pointwise Euclidean distance of two phase-space series.
pub fn separation(q1: &[f64], p1: &[f64], q2: &[f64], p2: &[f64]) -> Result<Vec<f64>> {
    let n = q1.len();
    for other in [p1.len(), q2.len(), p2.len()] {
        if other != n {
            return Err(Error::LengthMismatch { left: n, right: other });
        }
    }
    Ok((0..n).map(|i| (q1[i] - q2[i]).hypot(p1[i] - p2[i])).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub n_realizations: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub noise: NoisePairing,
    pub basis: BasisPolicy,
    pub record_stride: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_realizations: 1,
            master_seed: 0,
            workers: 1,
            noise: NoisePairing::Independent,
            basis: BasisPolicy::Adaptive,
            record_stride: IntegratorOptions::default().record_stride,
        }
    }
}

/// Ensemble-mean trajectory of one endpoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeanPath {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeparationSeries {
    pub taus: Vec<f64>,
    pub delta: Vec<f64>,
    /// `D(tau - tau0)` for `tau >= tau0`.
    pub bound: Vec<Option<f64>>,
    pub tau0: Option<f64>,
    pub delta_asymp: Option<f64>,
    pub tau_asymp: Option<f64>,
    pub n_pairs: usize,
    pub n_realizations: usize,
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Largest trajectory basis used.
    pub max_dim: usize,
    pub escalations: usize,
}

impl SeparationSeries {
    pub fn new(taus: Vec<f64>, delta: Vec<f64>, beta: f64, gamma: f64) -> Result<Self> {
        if taus.len() != delta.len() {
            return Err(Error::LengthMismatch {
                left: taus.len(),
                right: delta.len(),
            });
        }
        let epsilon = delta.first().copied().unwrap_or(0.0);
        Ok(SeparationSeries {
            bound: vec![None; taus.len()],
            taus,
            delta,
            beta,
            gamma,
            epsilon,
            ..SeparationSeries::default()
        })
    }

    /// Fills `tau0`, `delta_asymp`, `tau_asymp` and `bound`.
    pub fn analyze(&mut self, analysis: &Analysis) -> Result<()> {
        let cell = PlanckCell::new(self.beta);
        self.tau0 = estimate_tau0(&self.taus, &self.delta, &cell, analysis.residence);
        self.delta_asymp = Some(estimate_delta_asymp(&self.delta, analysis.tail_fraction)?.mean);
        self.tau_asymp = match (self.tau0, self.delta_asymp) {
            (Some(t0), Some(da)) => solve_tau_asymp(da, t0, self.beta, self.gamma).ok(),
            _ => None,
        };
        self.bound = match self.tau0 {
            Some(t0) => self
                .taus
                .iter()
                .map(|&t| if t >= t0 { bound_d(self.beta, self.gamma, t - t0).ok() } else { None })
                .collect(),
            None => vec![None; self.taus.len()],
        };
        Ok(())
    }
}

/// Estimator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    /// Required residence below the cell for `tau0`.
    pub residence: f64,
    /// Fraction of the series averaged for `delta_asymp`.
    pub tail_fraction: f64,
}

impl Analysis {
    pub fn for_params(params: &ModelParams) -> Self {
        Analysis {
            residence: params.drive_period(),
            tail_fraction: 0.2,
        }
    }
}

/// Ensemble-mean paths in pair order, endpoints `[first, second]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathSet {
    pub taus: Vec<f64>,
    pub paths: Vec<[MeanPath; 2]>,
    /// Largest basis any trajectory ended in.
    pub max_dim: usize,
    /// Trajectory reruns caused by truncation leaks.
    pub escalations: usize,
}

/// Runs every endpoint ensemble.
pub fn mean_paths(params: &ModelParams, pairs: &[PairSpec], config: &EnsembleConfig) -> Result<PathSet> {
    if pairs.is_empty() {
        return Err(Error::param("pairs", "need at least one pair"));
    }
    if config.n_realizations == 0 {
        return Err(Error::param("realizations", "need at least one realization"));
    }
    let need = required_pair_dim(pairs);
    if params.dim < need {
        return Err(Error::Truncation {
            dim: params.dim,
            required: need,
        });
    }
    let options = IntegratorOptions {
        record_stride: config.record_stride,
        ..IntegratorOptions::default()
    };
    let points: Vec<PhasePoint> = pairs.iter().flat_map(|pair| pair.endpoints()).collect();
    let starts: Vec<usize> = points.iter().map(|&pt| config.basis.start(params, pt)).collect();
    let ladder = BasisLadder::new(params, true, options, config.basis, starts.iter().copied())?;
    let r_count = config.n_realizations;

    let jobs = map_indexed(2 * pairs.len(), config.workers, |job| {
        let (pair, endpoint) = (job / 2, job % 2);
        let mut sum_q: Vec<f64> = Vec::new();
        let mut sum_p: Vec<f64> = Vec::new();
        let mut taus = Vec::new();
        let mut max_dim = 0;
        let mut escalations = 0;
        for r in 0..r_count {
            let stream = match config.noise {
                NoisePairing::Common => pair * r_count + r,
                NoisePairing::Independent => job * r_count + r,
            } as u64;
            let seed = SeedSpec::new(config.master_seed, stream);
            let run = ladder
                .evolve(points[job], starts[job], seed)
                .map_err(|e| Error::Trajectory {
                    pair,
                    endpoint,
                    realization: r,
                    source: Box::new(e),
                })?;
            max_dim = max_dim.max(run.dim);
            escalations += run.reruns;
            let rec = run.record;
            if r == 0 {
                sum_q = rec.q;
                sum_p = rec.p;
                taus = rec.taus;
            } else {
                sum_q.iter_mut().zip(&rec.q).for_each(|(s, x)| *s += x);
                sum_p.iter_mut().zip(&rec.p).for_each(|(s, x)| *s += x);
            }
        }
        let scale = 1.0 / r_count as f64;
        sum_q.iter_mut().for_each(|s| *s *= scale);
        sum_p.iter_mut().for_each(|s| *s *= scale);
        Ok((taus, MeanPath { q: sum_q, p: sum_p }, max_dim, escalations))
    })?;

    let mut set = PathSet {
        taus: jobs[0].0.clone(),
        ..PathSet::default()
    };
    let mut it = jobs.into_iter().map(|(_, path, dim, reruns)| {
        set.max_dim = set.max_dim.max(dim);
        set.escalations += reruns;
        path
    });
    while let (Some(a), Some(b)) = (it.next(), it.next()) {
        set.paths.push([a, b]);
    }
    Ok(set)
}

/// `Delta(tau)` over the pair set, with the default analysis applied.
pub fn delta_series(
    params: &ModelParams,
    pairs: &[PairSpec],
    config: &EnsembleConfig,
) -> Result<SeparationSeries> {
    let PathSet {
        taus,
        paths,
        max_dim,
        escalations,
    } = mean_paths(params, pairs, config)?;
    let mut delta = vec![0.0; taus.len()];
    for [a, b] in &paths {
        let d = separation(&a.q, &a.p, &b.q, &b.p)?;
        delta.iter_mut().zip(d).for_each(|(s, x)| *s += x);
    }
    let n = paths.len() as f64;
    delta.iter_mut().for_each(|s| *s /= n);
    let mut series = SeparationSeries::new(taus, delta, params.beta, params.gamma)?;
    series.n_pairs = pairs.len();
    series.n_realizations = config.n_realizations;
    series.epsilon = pairs[0].epsilon;
    series.max_dim = max_dim;
    series.escalations = escalations;
    series.analyze(&Analysis::for_params(params))?;
    Ok(series)
}

/// `D(s) = ((1 + 1/beta^2) e^{2 Gamma s} - 1)^{-1/2}`.
pub fn bound_d(beta: f64, gamma: f64, s: f64) -> Result<f64> {
    if beta == 0.0 {
        return Err(Error::ZeroBeta);
    }
    if !(s >= 0.0) {
        return Err(Error::param("s", format!("elapsed time must be non-negative, got {s}")));
    }
    let c = 1.0 + 1.0 / (beta * beta);
    Ok(((c * (2.0 * gamma * s).exp()) - 1.0).powf(-0.5))
}

/// First recorded `tau` with `delta < cell` that stays below the cell for
/// `residence` (or until the series ends).
pub fn estimate_tau0(taus: &[f64], delta: &[f64], cell: &PlanckCell, residence: f64) -> Option<f64> {
    let size = cell.linear_size;
    let below = |d: f64| d < size * (1.0 - 1e-9);
    let n = taus.len().min(delta.len());
    let mut start = None;
    for i in 0..n {
        if below(delta[i]) {
            let s = *start.get_or_insert(i);
            if taus[i] - taus[s] >= residence {
                return Some(taus[s]);
            }
        } else {
            start = None;
        }
    }
    start.map(|s| taus[s])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub mean: f64,
    pub std: f64,
    pub points: usize,
}

/// Mean and standard deviation of the last `tail_fraction` of the series.
pub fn estimate_delta_asymp(delta: &[f64], tail_fraction: f64) -> Result<TailEstimate> {
    if !(tail_fraction > 0.0 && tail_fraction <= 0.5) {
        return Err(Error::param("tail_fraction", "must lie in (0, 0.5]"));
    }
    if delta.is_empty() {
        return Err(Error::param("delta", "series is empty"));
    }
    let points = ((delta.len() as f64 * tail_fraction).round() as usize).max(1);
    let tail = &delta[delta.len() - points..];
    let mean = tail.iter().sum::<f64>() / points as f64;
    let std = if points > 1 {
        (tail.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (points - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(TailEstimate { mean, std, points })
}

/// Inverts `D(tau_asymp - tau0) = delta_asymp`.
pub fn solve_tau_asymp(delta_asymp: f64, tau0: f64, beta: f64, gamma: f64) -> Result<f64> {
    if !(delta_asymp > 0.0 && delta_asymp < beta) {
        return Err(Error::NoSolution { delta_asymp, beta });
    }
    if !(gamma > 0.0) {
        return Err(Error::param("gamma", "must be positive to invert the bound"));
    }
    let ratio = (1.0 + 1.0 / (delta_asymp * delta_asymp)) / (1.0 + 1.0 / (beta * beta));
    Ok(tau0 + ratio.ln() / (2.0 * gamma))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub rate: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Least-squares slope of `ln delta` against `tau` over `[start, end]`.
pub fn fit_growth_rate(taus: &[f64], delta: &[f64], window: (f64, f64)) -> Result<GrowthFit> {
    if taus.len() != delta.len() {
        return Err(Error::LengthMismatch {
            left: taus.len(),
            right: delta.len(),
        });
    }
    let (start, end) = window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &d) in taus.iter().zip(delta) {
        if t < start || t > end {
            continue;
        }
        if !(d > 0.0) {
            return Err(Error::NonPositiveSeparation { tau: t, value: d });
        }
        xs.push(t);
        ys.push(d.ln());
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientData { start, end, points: n });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let rate = sxy / sxx;
    let intercept = my - rate * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - rate * x).powi(2))
        .sum();
    let stderr = (ssr / (nf - 2.0) / sxx).sqrt();
    Ok(GrowthFit {
        rate,
        stderr,
        points: n,
    })
}
