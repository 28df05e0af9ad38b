use rayon::prelude::*;

use super::{QsdIntegrator, SeedSpec, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::fock::StateVector;

/// Evaluates `f(0..n)` on `workers` threads and returns results in index
/// order. The first error by index wins, so failures are reproducible too.
/// `workers == 0` uses rayon's default pool size.
pub fn map_indexed<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let results: Vec<Result<T>> = if workers == 1 || n <= 1 {
        (0..n).map(&f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::ThreadPool(e.to_string()))?;
        pool.install(|| (0..n).into_par_iter().map(&f).collect())
    };
    results.into_iter().collect()
}

/// Which realizations to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub master_seed: u64,
    /// Realization `r` uses stream `stream_base + r`.
    pub stream_base: u64,
    pub realizations: usize,
    pub workers: usize,
}

/// Mean and standard error of one observable over realizations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MomentSeries {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl MomentSeries {
    fn from_samples<'a>(len: usize, samples: impl Iterator<Item = &'a [f64]> + Clone) -> Self {
        let count = samples.clone().count();
        let mut mean = vec![0.0; len];
        for s in samples.clone() {
            for (m, x) in mean.iter_mut().zip(s) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let mut var = vec![0.0; len];
        for s in samples {
            for ((v, x), m) in var.iter_mut().zip(s).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        let stderr = if count > 1 {
            var.iter()
                .map(|v| (v / (count as f64 - 1.0) / count as f64).sqrt())
                .collect()
        } else {
            vec![0.0; len]
        };
        MomentSeries { mean, stderr }
    }
}

/// Ensemble averages of the recorded observables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnsembleMoments {
    pub taus: Vec<f64>,
    pub realizations: usize,
    pub q: MomentSeries,
    pub p: MomentSeries,
    pub n: MomentSeries,
    pub sigma_a: MomentSeries,
}

impl EnsembleMoments {
    pub fn from_records(records: &[TrajectoryRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::param("realizations", "must be at least 1"))?;
        let len = first.len();
        for r in records {
            if r.len() != len {
                return Err(Error::LengthMismatch {
                    left: len,
                    right: r.len(),
                });
            }
        }
        let series = |pick: fn(&TrajectoryRecord) -> &[f64]| {
            MomentSeries::from_samples(len, records.iter().map(pick))
        };
        Ok(EnsembleMoments {
            taus: first.taus.clone(),
            realizations: records.len(),
            q: series(|r| &r.q),
            p: series(|r| &r.p),
            n: series(|r| &r.n),
            sigma_a: series(|r| &r.sigma_a),
        })
    }
}

pub fn run_ensemble(
    integrator: &QsdIntegrator,
    initial: &StateVector,
    spec: &EnsembleSpec,
) -> Result<EnsembleMoments> {
    let records = map_indexed(spec.realizations, spec.workers, |r| {
        integrator
            .evolve(initial, SeedSpec::new(spec.master_seed, spec.stream_base + r as u64))
            .map_err(|e| Error::Trajectory {
                pair: 0,
                endpoint: 0,
                realization: r,
                source: Box::new(e),
            })
    })?;
    EnsembleMoments::from_records(&records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    #[test]
    fn map_preserves_order_and_first_error() {
        let v = map_indexed(50, 3, |i| Ok(i * i)).unwrap();
        assert_eq!(v, (0..50).map(|i| i * i).collect::<Vec<_>>());
        let err = map_indexed(50, 3, |i| {
            if i % 7 == 3 {
                Err(Error::InvalidDimension { dim: i })
            } else {
                Ok(i)
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::InvalidDimension { dim: 3 }));
    }

    #[test]
    fn moment_series_matches_hand_values() {
        let a = [1.0, 2.0];
        let b = [3.0, 2.0];
        let s = MomentSeries::from_samples(2, [&a[..], &b[..]].into_iter());
        assert_eq!(s.mean, vec![2.0, 2.0]);
        assert!((s.stderr[0] - 1.0).abs() < 1e-15);
        assert_eq!(s.stderr[1], 0.0);
    }

    #[test]
    fn ensemble_is_independent_of_worker_count() {
        let params = ModelParams {
            dim: 48,
            tau_max: 1.0,
            ..ModelParams::default()
        };
        let integrator = QsdIntegrator::new(&params, true).unwrap();
        let init = StateVector::vacuum(48).unwrap();
        let spec = |workers| EnsembleSpec {
            master_seed: 11,
            stream_base: 0,
            realizations: 6,
            workers,
        };
        let one = run_ensemble(&integrator, &init, &spec(1)).unwrap();
        let three = run_ensemble(&integrator, &init, &spec(3)).unwrap();
        assert_eq!(one, three);
    }
}
