use qduffing_core::fock::StateVector;
use qduffing_core::lindblad::{evolve_density_with, DensityMatrix, DensityOptions, Liouvillian};
use qduffing_core::qsd::{run_ensemble, EnsembleSpec, IntegratorOptions, MomentSeries};
use qduffing_core::QsdIntegrator;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{Csv, OutputSet};

pub const N_SIGMA: f64 = 3.0;
pub const REQUIRED_FRACTION: f64 = 0.99;

#[derive(Clone, Debug, Serialize)]
pub struct Agreement {
    pub observable: &'static str,
    /// Recorded times with `|qsd - me| <= 3 sigma_mc`.
    pub within: usize,
    pub times: usize,
    pub fraction: f64,
    pub max_abs_diff: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MasterCheckReport {
    pub pass: bool,
    pub trajectories: usize,
    pub dim: usize,
    pub n_sigma: f64,
    pub required_fraction: f64,
    pub qsd_gamma: f64,
    pub me_gamma: f64,
    pub observables: Vec<Agreement>,
}

fn agreement(observable: &'static str, qsd: &MomentSeries, me: &[f64]) -> Agreement {
    let mut within = 0;
    let mut max_abs_diff: f64 = 0.0;
    for ((m, se), x) in qsd.mean.iter().zip(&qsd.stderr).zip(me) {
        let d = (m - x).abs();
        max_abs_diff = max_abs_diff.max(d);
        // the tolerance floor only matters at tau = 0, where sigma vanishes
        if d <= N_SIGMA * se + 1e-9 {
            within += 1;
        }
    }
    let times = me.len();
    Agreement {
        observable,
        within,
        times,
        fraction: within as f64 / times as f64,
        max_abs_diff,
    }
}

/// QSD ensemble against the master equation, both from the coherent vacuum.
pub fn run(config: &RunConfig, files: &mut OutputSet) -> CliResult<MasterCheckReport> {
    let params = config.params(config.beta[0]);
    let options = IntegratorOptions {
        record_stride: config.record_stride,
        leak_threshold: config.leak_threshold,
        ..IntegratorOptions::default()
    };
    let integrator = QsdIntegrator::with_options(&params, true, options)?;
    let vacuum = StateVector::vacuum(params.dim)?;
    let qsd = run_ensemble(
        &integrator,
        &vacuum,
        &EnsembleSpec {
            master_seed: config.seed,
            stream_base: 0,
            realizations: config.realizations,
            workers: config.workers,
        },
    )?;

    let me_gamma = config.me_gamma.unwrap_or(params.gamma);
    let me_params = qduffing_core::ModelParams {
        gamma: me_gamma,
        ..params.clone()
    };
    let me = evolve_density_with(
        &Liouvillian::new(&me_params)?,
        &DensityMatrix::pure(&vacuum),
        params.tau_max,
        &DensityOptions {
            record_stride: config.record_stride,
            ..DensityOptions::default()
        },
    )?;
    if me.taus.len() != qsd.taus.len() {
        return Err(CliError::Core(qduffing_core::Error::LengthMismatch {
            left: qsd.taus.len(),
            right: me.taus.len(),
        }));
    }

    let mut csv = Csv::new(
        "master-check",
        &[
            "tau",
            "qsd_mean_q",
            "me_q",
            "sigma_mc_q",
            "qsd_mean_p",
            "me_p",
            "sigma_mc_p",
            "qsd_mean_n",
            "me_n",
            "sigma_mc_n",
        ],
    );
    for k in 0..me.taus.len() {
        csv.row(&[
            Some(qsd.taus[k]),
            Some(qsd.q.mean[k]),
            Some(me.q[k]),
            Some(qsd.q.stderr[k]),
            Some(qsd.p.mean[k]),
            Some(me.p[k]),
            Some(qsd.p.stderr[k]),
            Some(qsd.n.mean[k]),
            Some(me.n[k]),
            Some(qsd.n.stderr[k]),
        ]);
    }
    files.add("master_check.csv", csv.into_bytes());

    let observables = vec![
        agreement("q", &qsd.q, &me.q),
        agreement("p", &qsd.p, &me.p),
        agreement("n", &qsd.n, &me.n),
    ];
    let report = MasterCheckReport {
        pass: observables.iter().all(|a| a.fraction >= REQUIRED_FRACTION),
        trajectories: config.realizations,
        dim: params.dim,
        n_sigma: N_SIGMA,
        required_fraction: REQUIRED_FRACTION,
        qsd_gamma: params.gamma,
        me_gamma,
        observables,
    };
    files.add_json("master_check.json", &report);
    Ok(report)
}
