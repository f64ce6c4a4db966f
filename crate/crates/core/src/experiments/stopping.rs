use serde::Serialize;

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sde::CoupledRun;

/// Band `[ε, 1/ε]` for the coordinates and coefficients of a coupled pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingBand<T> {
    epsilon: T,
    active: Vec<usize>,
    cap_only: Vec<usize>,
}

impl<T: Scalar> StoppingBand<T> {
    pub fn new(epsilon: T, active: Vec<usize>, cap_only: Vec<usize>) -> Result<Self> {
        if !(epsilon > T::zero()) || !(epsilon < epsilon.recip()) {
            return Err(Error::arg(format!("band needs 0 < ε < 1/ε, got ε = {epsilon}")));
        }
        if active.is_empty() {
            return Err(Error::arg("band needs at least one active index"));
        }
        if cap_only.iter().any(|k| active.contains(k)) {
            return Err(Error::arg("cap-only indices must not be active"));
        }
        let mut active = active;
        let mut cap_only = cap_only;
        active.sort_unstable();
        active.dedup();
        cap_only.sort_unstable();
        cap_only.dedup();
        Ok(Self {
            epsilon,
            active,
            cap_only,
        })
    }

    /// Every index active, nothing cap-only.
    pub fn full(epsilon: T, d: usize) -> Result<Self> {
        Self::new(epsilon, (0..d).collect(), Vec::new())
    }

    /// Component `k` trapped: the others stay active and `k` is cap-only.
    pub fn stage(epsilon: T, d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::arg(format!("trapped index {k} out of range for d = {d}")));
        }
        Self::new(epsilon, (0..d).filter(|&i| i != k).collect(), vec![k])
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn cap_only(&self) -> &[usize] {
        &self.cap_only
    }

    fn check_dimension(&self, d: usize) -> Result<()> {
        match self.active.iter().chain(&self.cap_only).max() {
            Some(&m) if m >= d => Err(Error::arg(format!("band index {m} out of range for d = {d}"))),
            _ => Ok(()),
        }
    }

    /// Whether the state `(x, y)` with coefficients `(fx, fy)` is outside the band.
    pub fn violated(&self, x: &[T], y: &[T], fx: &[T], fy: &[T]) -> bool {
        let lo = self.epsilon;
        let hi = self.epsilon.recip();
        let active = self.active.iter().any(|&i| {
            let q = [fx[i], fy[i], x[i], y[i]];
            let min = q.iter().copied().fold(T::infinity(), T::min);
            let max = q.iter().copied().fold(T::neg_infinity(), T::max);
            min <= lo || max >= hi || q.iter().any(|v| v.is_nan())
        });
        active
            || self.cap_only.iter().any(|&k| {
                x[k].max(y[k]) >= hi
                    || fx[k].min(fy[k]) <= lo
                    || fx[k].max(fy[k]) >= hi
                    || [x[k], y[k], fx[k], fy[k]].iter().any(|v| v.is_nan())
            })
    }
}

/// Coefficients `f(X)` and `f(Y)` at every recorded step, flat with stride `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSeries<T> {
    d: usize,
    pub(crate) fx: Vec<T>,
    pub(crate) fy: Vec<T>,
}

impl<T: Scalar> CoefficientSeries<T> {
    pub fn new(run: &CoupledRun<T>, model: &CoefficientModel<T>) -> Self {
        let d = run.d();
        let mut fx = vec![T::zero(); d * run.len()];
        let mut fy = vec![T::zero(); d * run.len()];
        for k in 0..run.len() {
            model.eval_unchecked(run.x().state(k), &mut fx[k * d..(k + 1) * d]);
            model.eval_unchecked(run.y().state(k), &mut fy[k * d..(k + 1) * d]);
        }
        Self { d, fx, fy }
    }

    pub fn fx(&self, k: usize) -> &[T] {
        &self.fx[k * self.d..(k + 1) * self.d]
    }

    pub fn fy(&self, k: usize) -> &[T] {
        &self.fy[k * self.d..(k + 1) * self.d]
    }
}

/// First record position `>= from` at which the pair leaves the band.
pub fn tau_eps_index<T: Scalar>(run: &CoupledRun<T>, coeffs: &CoefficientSeries<T>, band: &StoppingBand<T>, from: usize) -> Option<usize> {
    (from..run.len()).find(|&k| band.violated(run.x().state(k), run.y().state(k), coeffs.fx(k), coeffs.fy(k)))
}

/// First recorded time at which the pair leaves the band. Resolved on the record grid.
pub fn detect_tau_eps<T: Scalar>(run: &CoupledRun<T>, model: &CoefficientModel<T>, band: &StoppingBand<T>) -> Result<Option<T>> {
    band.check_dimension(run.d())?;
    let coeffs = CoefficientSeries::new(run, model);
    Ok(tau_eps_index(run, &coeffs, band, 0).map(|k| run.time(k)))
}

/// First record position `>= from` with `ζ >= c0²`.
pub fn tau_c0_index<T: Scalar>(run: &CoupledRun<T>, c0: T, from: usize) -> Option<usize> {
    let level = c0 * c0;
    (from..run.len()).find(|&k| !(run.zeta()[k] < level))
}

/// First recorded time with `ζ >= c0²`.
pub fn detect_tau_c0<T: Scalar>(run: &CoupledRun<T>, c0: T) -> Option<T> {
    tau_c0_index(run, c0, 0).map(|k| run.time(k))
}

/// Earlier of the two stopping positions, if either fires.
pub(crate) fn stop_index<T: Scalar>(
    run: &CoupledRun<T>,
    coeffs: &CoefficientSeries<T>,
    band: &StoppingBand<T>,
    c0: T,
    from: usize,
) -> Option<usize> {
    match (tau_eps_index(run, coeffs, band, from), tau_c0_index(run, c0, from)) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{simulate_coupled, SimConfig};

    fn cfg(seed: u64) -> SimConfig<f64> {
        SimConfig {
            dt: 1e-3,
            horizon: 1.0,
            seed,
            record_stride: 10,
            ..Default::default()
        }
    }

    #[test]
    fn band_validation() {
        assert!(StoppingBand::full(1.0, 2).is_err());
        assert!(StoppingBand::full(0.0, 2).is_err());
        assert!(StoppingBand::<f64>::new(0.1, vec![], vec![]).is_err());
        assert!(StoppingBand::new(0.1, vec![0], vec![0]).is_err());
        let s = StoppingBand::stage(0.1, 3, 1).unwrap();
        assert_eq!(s.active(), &[0, 2]);
        assert_eq!(s.cap_only(), &[1]);
    }

    #[test]
    fn quiet_run_never_stops() {
        let m = CoefficientModel::constant(vec![0.0, 0.0], vec![1e-4, 1e-4]).unwrap();
        let run = simulate_coupled(&m, &[1.0, 1.0], &[1.0, 1.0], &cfg(1), 0).unwrap();
        let band = StoppingBand::full(1e-4 / 2.0, 2).unwrap();
        assert_eq!(detect_tau_eps(&run, &m, &band).unwrap(), None);
    }

    #[test]
    fn wide_epsilon_stops_at_zero() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let run = simulate_coupled(&m, &[0.5, 0.5], &[0.5, 0.6], &cfg(1), 0).unwrap();
        let band = StoppingBand::full(0.7, 2).unwrap();
        assert_eq!(detect_tau_eps(&run, &m, &band).unwrap(), Some(0.0));
    }

    #[test]
    fn band_fires_no_later_than_trap() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mut hits = 0;
        for p in 0..200 {
            let run = simulate_coupled(&m, &[0.2, 0.2], &[0.2, 0.21], &cfg(5), p).unwrap();
            let band = StoppingBand::full(0.01, 2).unwrap();
            let tau = detect_tau_eps(&run, &m, &band).unwrap();
            let trap = run
                .x()
                .trapped_at()
                .iter()
                .chain(run.y().trapped_at())
                .flatten()
                .min()
                .copied();
            if let Some(step) = trap {
                hits += 1;
                let t_trap = step as f64 * 1e-3;
                let tau = tau.expect("a trapped pair must have left the band");
                assert!(tau <= t_trap + 1e-12, "tau {tau} after trap {t_trap}");
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn cap_only_lower_bound_applies_to_f_only() {
        let band = StoppingBand::stage(0.1, 2, 0).unwrap();
        // x^0 = 0 is allowed for a cap-only index
        assert!(!band.violated(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.5], &[1.0, 0.5]));
        assert!(band.violated(&[0.0, 1.0], &[0.0, 1.0], &[0.05, 0.5], &[1.0, 0.5]));
        assert!(band.violated(&[11.0, 1.0], &[0.0, 1.0], &[1.0, 0.5], &[1.0, 0.5]));
        // the full band fires on the same state
        let full = StoppingBand::full(0.1, 2).unwrap();
        assert!(full.violated(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.5], &[1.0, 0.5]));
    }

    #[test]
    fn tau_c0_cases() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let same = simulate_coupled(&m, &[1.0, 1.0], &[1.0, 1.0], &cfg(2), 0).unwrap();
        assert_eq!(detect_tau_c0(&same, 0.1), None);

        let frozen = CoefficientModel::constant(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let run = simulate_coupled(&frozen, &[1.0, 1.0], &[1.5, 1.0], &cfg(2), 0).unwrap();
        assert_eq!(detect_tau_c0(&run, 0.5), Some(0.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let run = simulate_coupled(&m, &[1.0, 1.0], &[1.0, 1.0], &cfg(2), 0).unwrap();
        let band = StoppingBand::full(0.1, 3).unwrap();
        assert!(detect_tau_eps(&run, &m, &band).is_err());
    }
}
