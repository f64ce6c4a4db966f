use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::{verify_growth_bound, CoefficientModel, GrowthBoundReport, GrowthSampling};
use crate::error::{Error, Result};
use crate::modulus::ModulusSpec;
use crate::report::Verdict;
use crate::scalar::Scalar;
use crate::sde::{simulate_path, SimConfig};
use crate::stats::quantile;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplosionReport<T> {
    pub growth: GrowthBoundReport<T>,
    pub n_paths: usize,
    pub explosions: usize,
    pub first_explosion_time: Option<T>,
    pub median_explosion_time: Option<T>,
    /// Sorted explosion times, one per exploded path.
    pub explosion_times: Vec<T>,
    /// Whether the growth classification predicts explosions.
    pub expect_explosions: bool,
    pub verdict: Verdict,
    pub note: String,
}

/// Counts paths reaching `|X| >= M` before the horizon and compares with the growth classification:
/// none for a model satisfying the bound, at least one for a violating fixture.
pub fn explosion_experiment<T: Scalar>(
    model: &CoefficientModel<T>,
    a: &[T],
    rho: &ModulusSpec<T>,
    c: T,
    sampling: &GrowthSampling,
    config: &SimConfig<T>,
    n_paths: usize,
) -> Result<ExplosionReport<T>> {
    if n_paths == 0 {
        return Err(Error::arg("n_paths must be at least 1"));
    }
    let growth = verify_growth_bound(model, rho, c, sampling)?;
    let mut cfg = *config;
    cfg.validate()?;
    cfg.record_stride = cfg.n_steps();
    cfg.n_paths = n_paths;
    let times: Vec<Option<T>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let traj = simulate_path(model, a, &cfg, p)?;
            Ok(traj.exploded_at().map(|s| T::from_usize_lossy(s) * cfg.dt))
        })
        .collect::<Result<_>>()?;
    let mut hits: Vec<T> = times.into_iter().flatten().collect();
    hits.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let expect_explosions = growth.verdict != Verdict::Pass;
    let explosions = hits.len();
    let verdict = Verdict::from_bool(if expect_explosions { explosions > 0 } else { explosions == 0 });
    Ok(ExplosionReport {
        n_paths,
        explosions,
        first_explosion_time: hits.first().copied(),
        median_explosion_time: (!hits.is_empty()).then(|| quantile(&hits, 0.5)),
        explosion_times: hits,
        expect_explosions,
        verdict,
        note: "explosion counts are for the Euler scheme at the configured dt".to_string(),
        growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shell() -> GrowthSampling {
        GrowthSampling {
            radius_min: 2.0,
            radius_max: 1e3,
            n_samples: 2000,
            seed: 0,
        }
    }

    fn cfg() -> SimConfig<f64> {
        SimConfig {
            dt: 1e-3,
            horizon: 1.0,
            explosion_threshold: 1e6,
            seed: 4,
            ..Default::default()
        }
    }

    #[test]
    fn frozen_model_never_explodes() {
        let m = CoefficientModel::constant(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let rep = explosion_experiment(&m, &[1.0, 1.0], &ModulusSpec::log_growth(), 1.0, &shell(), &cfg(), 20).unwrap();
        assert_eq!(rep.explosions, 0);
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn cyclic_versus_superlinear() {
        let cyc = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let rep = explosion_experiment(&cyc, &[1.0, 1.0], &ModulusSpec::log_growth(), 1.0, &shell(), &cfg(), 100).unwrap();
        assert!(!rep.expect_explosions);
        assert_eq!(rep.explosions, 0);

        let rad = CoefficientModel::radial(vec![0.0, 0.0], 1.0, 2.0).unwrap();
        let rep = explosion_experiment(&rad, &[5.0, 5.0], &ModulusSpec::log_growth(), 1.0, &shell(), &cfg(), 100).unwrap();
        assert!(rep.expect_explosions);
        assert!(rep.explosions > 0, "{rep:?}");
        assert_eq!(rep.verdict, Verdict::Pass);
    }
}
