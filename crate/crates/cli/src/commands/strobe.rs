use qduffing_core::qsd::{BasisLadder, IntegratorOptions, StrobeSample};
use qduffing_core::{PhasePoint, SeedSpec};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::output::{Csv, OutputSet};

#[derive(Clone, Debug, Serialize)]
pub struct StrobeSummary {
    pub beta: f64,
    pub periods: usize,
    pub dim: usize,
    pub escalations: usize,
}

#[derive(Clone, Debug)]
pub struct StrobeOutcome {
    pub samples: Vec<StrobeSample>,
    pub summary: StrobeSummary,
}

/// One realization from the coherent vacuum, sampled once per drive period.
pub fn run(config: &RunConfig, files: &mut OutputSet) -> CliResult<StrobeOutcome> {
    let beta = config.beta[0];
    let params = config.params(beta);
    let options = IntegratorOptions {
        record_stride: config.record_stride,
        leak_threshold: config.leak_threshold,
        ..IntegratorOptions::default()
    };
    let origin = PhasePoint::new(0.0, 0.0);
    let start = config.basis.start(&params, origin);
    let ladder = BasisLadder::new(&params, true, options, config.basis, [start])?;
    let run = ladder.evolve(origin, start, SeedSpec::new(config.seed, 0))?;

    let mut csv = Csv::new("strobe", &["period_index", "q", "p", "vq", "vp"]);
    for s in &run.record.strobe {
        csv.row(&[Some(s.period as f64), Some(s.point.q), Some(s.point.p), Some(s.vq), Some(s.vp)]);
    }
    files.add("strobe.csv", csv.into_bytes());
    let summary = StrobeSummary {
        beta,
        periods: run.record.strobe.len(),
        dim: run.dim,
        escalations: run.reruns,
    };
    files.add_json("strobe.json", &summary);
    Ok(StrobeOutcome {
        samples: run.record.strobe,
        summary,
    })
}
