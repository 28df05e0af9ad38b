use qduffing_core::classical::{classical_lyapunov, integrate_classical_with, ClassicalState};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{Csv, OutputSet};

/// Periods dropped from the section before it is written.
pub const TRANSIENT_PERIODS: usize = 50;

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalSummary {
    pub lyapunov: f64,
    pub poincare_points: usize,
    pub transient_periods: usize,
    pub max_abs_x: f64,
    pub max_abs_p: f64,
}

#[derive(Clone, Debug)]
pub struct ClassicalOutcome {
    pub poincare: Vec<ClassicalState>,
    pub summary: ClassicalSummary,
}

pub fn run(config: &RunConfig, files: &mut OutputSet) -> CliResult<ClassicalOutcome> {
    let params = config.params(config.beta[0]);
    let initial = ClassicalState::new(config.x0, config.p0);
    let orbit = integrate_classical_with(&params, initial, config.tau_max, usize::MAX)?;
    let poincare: Vec<ClassicalState> = orbit.poincare.into_iter().skip(TRANSIENT_PERIODS).collect();
    let lyapunov = classical_lyapunov(&params, initial, config.tau_max)?;

    let mut csv = Csv::new("poincare", &["period_index", "t", "x", "p"]);
    for (k, s) in poincare.iter().enumerate() {
        csv.row(&[Some((k + TRANSIENT_PERIODS) as f64), Some(s.t), Some(s.x), Some(s.p)]);
    }
    files.add("poincare.csv", csv.into_bytes());
    let summary = ClassicalSummary {
        lyapunov,
        poincare_points: poincare.len(),
        transient_periods: TRANSIENT_PERIODS,
        max_abs_x: poincare.iter().map(|s| s.x.abs()).fold(0.0, f64::max),
        max_abs_p: poincare.iter().map(|s| s.p.abs()).fold(0.0, f64::max),
    };
    files.add_json("lyapunov.json", &summary);
    Ok(ClassicalOutcome { poincare, summary })
}
