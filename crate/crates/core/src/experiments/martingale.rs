use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::report::Verdict;
use crate::scalar::Scalar;
use crate::sde::{simulate_path, SimConfig, Trajectory};
use crate::stats::mean_and_se;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentMean<T> {
    pub component: usize,
    pub target: T,
    pub mean: T,
    pub se: T,
    /// `a_i |(1 + α_i dt)^n e^{-α_i t} - 1|`, the mean shift of the Euler recursion itself.
    pub euler_bias: T,
    pub difference: T,
    pub allowance: T,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport<T> {
    pub t: T,
    pub n_paths: usize,
    pub used_paths: usize,
    pub exploded_paths: usize,
    pub components: Vec<ComponentMean<T>>,
    pub verdict: Verdict,
    pub note: String,
}

/// Compares the sample mean of `e^{-α_i t} X_t^i` with `a_i`.
///
/// Passes per component iff the difference is within 4 standard errors plus the
/// deterministic Euler bias. Exploded paths are dropped; more than 1% gives Inconclusive.
pub fn martingale_experiment<T: Scalar>(
    model: &CoefficientModel<T>,
    a: &[T],
    t: T,
    n_paths: usize,
    config: &SimConfig<T>,
) -> Result<MartingaleReport<T>> {
    if !(t > T::zero()) || t > config.horizon {
        return Err(Error::arg(format!("evaluation time t = {t} must lie in (0, T = {}]", config.horizon)));
    }
    if n_paths == 0 {
        return Err(Error::arg("n_paths must be at least 1"));
    }
    let mut cfg = config.with_horizon(t);
    cfg.validate()?;
    let n_steps = cfg.n_steps();
    // only the endpoints are needed
    cfg.record_stride = n_steps;
    cfg.n_paths = n_paths;
    let finals: Vec<Option<Vec<T>>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let traj = simulate_path(model, a, &cfg, p)?;
            Ok(traj.exploded_at().is_none().then(|| traj.last_state().to_vec()))
        })
        .collect::<Result<_>>()?;
    let used: Vec<&Vec<T>> = finals.iter().flatten().collect();
    let exploded = n_paths - used.len();
    let t_eff = T::from_usize_lossy(n_steps) * cfg.dt;
    let rounding = T::epsilon() * T::from_usize_lossy(n_steps + 16);
    let four = T::lit(4.0);
    let components: Vec<ComponentMean<T>> = (0..model.d())
        .map(|i| {
            let alpha = model.alpha()[i];
            let w = (-alpha * t_eff).exp();
            let values: Vec<T> = used.iter().map(|x| w * x[i]).collect();
            let (mean, se) = mean_and_se(&values);
            let growth = (T::one() + alpha * cfg.dt).powi(n_steps as i32);
            let euler_bias = a[i] * (growth * w - T::one()).abs();
            let difference = (mean - a[i]).abs();
            let allowance = four * se + euler_bias + rounding * a[i];
            ComponentMean {
                component: i,
                target: a[i],
                mean,
                se,
                euler_bias,
                difference,
                allowance,
                verdict: Verdict::from_bool(difference <= allowance),
            }
        })
        .collect();
    let too_many = exploded * 100 > n_paths || used.is_empty();
    let verdict = if too_many {
        Verdict::Inconclusive
    } else {
        Verdict::all(components.iter().map(|c| c.verdict))
    };
    Ok(MartingaleReport {
        t: t_eff,
        n_paths,
        used_paths: used.len(),
        exploded_paths: exploded,
        components,
        verdict,
        note: format!("{exploded} exploded paths excluded"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapViolation<T> {
    pub path: usize,
    pub component: usize,
    pub step: usize,
    pub value: T,
    pub kind: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrapAuditReport<T> {
    pub n_paths: usize,
    pub path_steps: usize,
    pub recorded_values: usize,
    /// Fraction of paths in which each component was trapped.
    pub trap_frequency: Vec<f64>,
    pub violations: Vec<TrapViolation<T>>,
    pub verdict: Verdict,
}

/// Scans a batch for positive values after a trap, negative values, and zeros that were never flagged.
pub fn trap_audit<T: Scalar>(batch: &[Trajectory<T>]) -> TrapAuditReport<T> {
    let d = batch.first().map(|t| t.d()).unwrap_or(0);
    let mut trapped = vec![0usize; d];
    let mut violations = Vec::new();
    let mut path_steps = 0;
    let mut recorded = 0;
    for (p, traj) in batch.iter().enumerate() {
        path_steps += traj.path_steps();
        for (i, count) in trapped.iter_mut().enumerate() {
            let at = traj.trapped_at()[i];
            *count += at.is_some() as usize;
            for k in 0..traj.len() {
                let step = traj.steps()[k];
                let v = traj.state(k)[i];
                recorded += 1;
                let kind = if v < T::zero() || v.is_nan() {
                    Some("negative")
                } else if at.is_some_and(|s| step >= s) && v.to_f64_lossy().to_bits() != 0 {
                    Some("positive after trap")
                } else if v == T::zero() && at.map_or(true, |s| s > step) {
                    Some("unflagged zero")
                } else {
                    None
                };
                if let Some(kind) = kind {
                    violations.push(TrapViolation {
                        path: p,
                        component: i,
                        step,
                        value: v,
                        kind,
                    });
                }
            }
        }
    }
    let n = batch.len().max(1) as f64;
    TrapAuditReport {
        n_paths: batch.len(),
        path_steps,
        recorded_values: recorded,
        trap_frequency: trapped.iter().map(|&c| c as f64 / n).collect(),
        verdict: Verdict::from_bool(violations.is_empty()),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::simulate_batch;

    fn cfg(n_paths: usize, horizon: f64) -> SimConfig<f64> {
        SimConfig {
            dt: 1e-3,
            horizon,
            n_paths,
            seed: 21,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_orbit_within_euler_bias() {
        let m = CoefficientModel::constant(vec![0.1], vec![0.0]).unwrap();
        let rep = martingale_experiment(&m, &[1.0], 1.0, 10, &cfg(10, 1.0)).unwrap();
        let c = &rep.components[0];
        assert!(c.se < 1e-15);
        assert!(c.difference < 1e-5 && c.difference > 0.0);
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn zero_start_has_zero_mean() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let rep = martingale_experiment(&m, &[0.0, 0.0], 1.0, 50, &cfg(50, 1.0)).unwrap();
        assert!(rep.components.iter().all(|c| c.mean == 0.0));
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn cyclic_means_are_consistent() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let rep = martingale_experiment(&m, &[1.0, 1.0], 1.0, 4000, &cfg(4000, 1.0)).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{rep:?}");
    }

    #[test]
    fn rejects_time_beyond_horizon() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(martingale_experiment(&m, &[1.0, 1.0], 2.0, 10, &cfg(10, 1.0)).is_err());
    }

    #[test]
    fn forced_trap_frequency() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let batch = simulate_batch(&m, &[0.0, 1.0], &cfg(40, 0.5)).unwrap();
        let rep = trap_audit(&batch);
        assert_eq!(rep.trap_frequency[0], 1.0);
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn no_traps_without_noise() {
        let m = CoefficientModel::constant(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let rep = trap_audit(&simulate_batch(&m, &[1.0, 2.0], &cfg(10, 0.5)).unwrap());
        assert_eq!(rep.trap_frequency, vec![0.0, 0.0]);
    }

    #[test]
    fn long_cyclic_batch_traps() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let rep = trap_audit(&simulate_batch(&m, &[0.3, 0.3], &cfg(200, 3.0)).unwrap());
        assert!(rep.trap_frequency.iter().any(|&f| f > 0.0));
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn tampered_batch_fails() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mut batch = simulate_batch(&m, &[0.0, 1.0], &cfg(2, 0.1)).unwrap();
        let last = batch[0].len() - 1;
        batch[0].states[last * 2] = 1e-300;
        let rep = trap_audit(&batch);
        assert_eq!(rep.verdict, Verdict::Fail);
        assert_eq!(rep.violations[0].kind, "positive after trap");
    }
}
