use qduffing_core::plyap::{
    delta_series, estimate_delta_asymp, fit_growth_rate, make_pairs, EnsembleConfig, PairSpec, PlanckCell,
    SeparationSeries,
};
use qduffing_core::qsd::start_dim;
use qduffing_core::ModelParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{RunConfig, LARGE_DIM_GUARD};
use crate::error::{CliError, CliResult};
use crate::output::{Csv, OutputSet};

#[derive(Clone, Debug, Serialize)]
pub struct PlyapSummary {
    pub beta: f64,
    pub epsilon: f64,
    pub cell_size: f64,
    pub pairs: usize,
    pub realizations: usize,
    pub tau0: Option<f64>,
    pub delta_asymp: f64,
    pub delta_asymp_std: f64,
    pub tau_asymp: Option<f64>,
    /// Slope of `ln Delta` over `growth_window`.
    pub growth_rate: Option<f64>,
    pub growth_stderr: Option<f64>,
    pub growth_window: (f64, f64),
    /// Largest `Delta` at or after `tau0`.
    pub max_delta_after_tau0: Option<f64>,
    /// Largest `Delta / D(tau - tau0)` on `[tau0, tau_asymp]`.
    pub max_bound_ratio: Option<f64>,
    pub max_dim: usize,
    pub escalations: usize,
}

#[derive(Clone, Debug)]
pub struct PlyapOutcome {
    pub series: SeparationSeries,
    pub summary: PlyapSummary,
}

/// Pair generator for one sweep value; independent of the sweep order.
pub fn pair_rng(seed: u64, beta: f64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(beta.to_bits());
    rng
}

/// Largest starting basis any endpoint needs, ignoring the cap.
pub fn required_start_dim(params: &ModelParams, pairs: &[PairSpec]) -> usize {
    let uncapped = ModelParams {
        dim: usize::MAX,
        ..params.clone()
    };
    pairs
        .iter()
        .flat_map(|p| p.endpoints())
        .map(|pt| start_dim(&uncapped, pt))
        .max()
        .unwrap_or(0)
}

pub fn run(config: &RunConfig, files: &mut OutputSet) -> CliResult<Vec<PlyapOutcome>> {
    let mut outcomes = Vec::new();
    let mut table = Csv::new("plyap-summary", &["beta", "tau0", "delta_asymp", "tau_asymp", "growth_rate"]);
    for &beta in &config.beta {
        let outcome = run_beta(config, beta)?;
        let s = &outcome.summary;
        table.row(&[Some(beta), s.tau0, Some(s.delta_asymp), s.tau_asymp, s.growth_rate]);
        let mut csv = Csv::new("plyap", &["tau", "delta", "bound_d"]);
        for ((t, d), b) in outcome.series.taus.iter().zip(&outcome.series.delta).zip(&outcome.series.bound) {
            csv.row(&[Some(*t), Some(*d), *b]);
        }
        files.add(format!("plyap_beta{beta}.csv"), csv.into_bytes());
        files.add_json(format!("plyap_beta{beta}.json"), s);
        outcomes.push(outcome);
    }
    files.add("plyap_summary.csv", table.into_bytes());
    Ok(outcomes)
}

pub fn run_beta(config: &RunConfig, beta: f64) -> CliResult<PlyapOutcome> {
    let mut params = config.params(beta);
    let pairs = make_pairs(config.pairs, config.epsilon_policy, &params, &mut pair_rng(config.seed, beta))?;
    let required = required_start_dim(&params, &pairs);
    if required > LARGE_DIM_GUARD {
        if !config.allow_large_dim {
            return Err(CliError::usage(format!(
                "beta = {beta} needs a basis of about {required} states, above the guard of \
                 {LARGE_DIM_GUARD}; pass --allow-large-dim to run it"
            )));
        }
        params.dim = params.dim.max(required);
    }
    let ensemble = EnsembleConfig {
        n_realizations: config.realizations,
        master_seed: config.seed,
        workers: config.workers,
        noise: config.noise,
        basis: config.basis,
        record_stride: config.record_stride,
    };
    let series = delta_series(&params, &pairs, &ensemble)?;
    let summary = summarize(&series, growth_window(&params))?;
    Ok(PlyapOutcome { series, summary })
}

/// Drive periods covered by the growth fit.
pub const GROWTH_PERIODS: f64 = 5.0;

/// The first [`GROWTH_PERIODS`] drive periods, clipped to the run.
pub fn growth_window(params: &ModelParams) -> (f64, f64) {
    (0.0, (GROWTH_PERIODS * params.drive_period()).min(params.tau_max))
}

pub fn summarize(series: &SeparationSeries, window: (f64, f64)) -> CliResult<PlyapSummary> {
    let tail = estimate_delta_asymp(&series.delta, 0.2)?;
    let fit = fit_growth_rate(&series.taus, &series.delta, window).ok();
    let after = |from: f64| series.taus.iter().zip(&series.delta).filter(move |(t, _)| **t >= from);
    let max_delta_after_tau0 = series.tau0.map(|t0| after(t0).map(|(_, d)| *d).fold(0.0, f64::max));
    let max_bound_ratio = match (series.tau0, series.tau_asymp) {
        (Some(_), Some(ta)) => Some(
            series
                .taus
                .iter()
                .zip(&series.delta)
                .zip(&series.bound)
                .filter(|((t, _), _)| **t <= ta)
                .filter_map(|((_, d), b)| b.map(|b| d / b))
                .fold(0.0, f64::max),
        ),
        _ => None,
    };
    Ok(PlyapSummary {
        beta: series.beta,
        epsilon: series.epsilon,
        cell_size: PlanckCell::new(series.beta).linear_size,
        pairs: series.n_pairs,
        realizations: series.n_realizations,
        tau0: series.tau0,
        delta_asymp: tail.mean,
        delta_asymp_std: tail.std,
        tau_asymp: series.tau_asymp,
        growth_rate: fit.map(|f| f.rate),
        growth_stderr: fit.map(|f| f.stderr),
        growth_window: window,
        max_delta_after_tau0,
        max_bound_ratio,
        max_dim: series.max_dim,
        escalations: series.escalations,
    })
}
