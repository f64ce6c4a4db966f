use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::scalar::{squared_norm, Scalar};
use crate::sde::noise::NoiseStream;
use crate::sde::trajectory::{CoupledRun, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrapMode {
    /// A component that steps to `<= 0` is set to exactly `0` and frozen.
    #[default]
    AbsorbAtZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct SimConfig<T> {
    pub dt: T,
    pub horizon: T,
    pub trap_mode: TrapMode,
    /// Paths stop once `|X| >= M`.
    pub explosion_threshold: T,
    pub seed: u64,
    pub n_paths: usize,
    pub record_stride: usize,
}

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-3),
            horizon: T::one(),
            trap_mode: TrapMode::AbsorbAtZero,
            explosion_threshold: T::lit(1e6),
            seed: 0,
            n_paths: 1000,
            record_stride: 10,
        }
    }
}

impl<T: Scalar> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::arg("dt must be positive"));
        }
        if !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return Err(Error::arg("horizon T must be positive"));
        }
        if self.dt > self.horizon {
            return Err(Error::arg(format!("dt ({}) must not exceed the horizon T ({})", self.dt, self.horizon)));
        }
        if !(self.explosion_threshold > T::zero()) {
            return Err(Error::arg("explosion threshold M must be positive"));
        }
        if self.record_stride == 0 {
            return Err(Error::arg("record_stride must be at least 1"));
        }
        Ok(())
    }

    fn validate_start(&self, a: &[T], d: usize) -> Result<()> {
        self.validate()?;
        if a.len() != d {
            return Err(Error::arg(format!("initial state has {} components, expected {d}", a.len())));
        }
        if a.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::arg("initial state must lie in the nonnegative orthant"));
        }
        let max = a.iter().copied().fold(T::zero(), T::max);
        if !(self.explosion_threshold > max) {
            return Err(Error::arg(format!(
                "explosion threshold M ({}) must exceed the largest initial coordinate ({max})",
                self.explosion_threshold
            )));
        }
        Ok(())
    }

    /// Number of Euler steps, `round(T / dt)`.
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round().to_usize().unwrap_or(0).max(1)
    }

    pub fn with_horizon(mut self, horizon: T) -> Self {
        self.horizon = horizon;
        self
    }
}

/// Result of one explicit step from a given state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub state: Vec<T>,
    pub trapped: Vec<bool>,
    pub non_finite: bool,
}

/// In-place full-truncation Euler–Maruyama step with absorption at zero.
/// `f` must hold the coefficients evaluated at `x`. Returns whether the result is non-finite.
#[inline]
fn advance<T: Scalar>(x: &mut [T], db: &[T], trapped: &mut [bool], f: &[T], alpha: &[T], dt: T) -> bool {
    let mut non_finite = false;
    for i in 0..x.len() {
        if trapped[i] {
            x[i] = T::zero();
            continue;
        }
        let xi = x[i];
        let diffusion = (f[i].max(T::zero()) * xi.max(T::zero())).sqrt();
        let next = xi + alpha[i] * xi * dt + diffusion * db[i];
        if next.is_nan() {
            non_finite = true;
            x[i] = T::infinity();
        } else if next <= T::zero() {
            x[i] = T::zero();
            trapped[i] = true;
        } else {
            non_finite |= next.is_infinite();
            x[i] = next;
        }
    }
    non_finite
}

/// One step `x' = x + α x dt + sqrt(f(x)⁺ x⁺) dB`, clamping `x' <= 0` to an absorbing `0`.
pub fn step<T: Scalar>(x: &[T], db: &[T], trapped: &[bool], model: &CoefficientModel<T>, dt: T) -> Result<StepOutcome<T>> {
    let d = model.d();
    if db.len() != d || trapped.len() != d {
        return Err(Error::arg("increment and trap vectors must have length d"));
    }
    if trapped.iter().zip(x).any(|(&t, &v)| t && v != T::zero()) {
        return Err(Error::arg("trapped components must be exactly zero"));
    }
    let mut f = vec![T::zero(); d];
    model.eval_into(x, &mut f)?;
    let mut state = x.to_vec();
    let mut flags = trapped.to_vec();
    let non_finite = advance(&mut state, db, &mut flags, &f, model.alpha(), dt);
    Ok(StepOutcome {
        state,
        trapped: flags,
        non_finite,
    })
}

fn initial_flags<T: Scalar>(a: &[T]) -> Vec<bool> {
    a.iter().map(|&v| v == T::zero()).collect()
}

fn out_of_bounds<T: Scalar>(x: &[T], m2: T, non_finite: bool) -> bool {
    non_finite || !(squared_norm(x) < m2)
}

/// Simulates one path to the horizon, stopping early once `|X| >= M` or the state overflows.
pub fn simulate_path<T: Scalar>(model: &CoefficientModel<T>, a: &[T], config: &SimConfig<T>, path_index: u64) -> Result<Trajectory<T>> {
    let d = model.d();
    config.validate_start(a, d)?;
    let noise = NoiseStream::new(config.seed, config.dt);
    let n_steps = config.n_steps();
    let m2 = config.explosion_threshold * config.explosion_threshold;
    let mut traj = Trajectory::new(d, config.dt);
    let mut x = a.to_vec();
    let mut trapped = initial_flags(a);
    for (i, t) in trapped.iter().enumerate() {
        if *t {
            traj.trapped_at[i] = Some(0);
        }
    }
    let mut f = vec![T::zero(); d];
    let mut db = vec![T::zero(); d];
    traj.push(0, &x);
    for n in 0..n_steps {
        model.eval_unchecked(&x, &mut f);
        noise.fill(path_index, n as u64, &mut db);
        let non_finite = advance(&mut x, &db, &mut trapped, &f, model.alpha(), config.dt);
        let k = n + 1;
        for i in 0..d {
            if trapped[i] && traj.trapped_at[i].is_none() {
                traj.trapped_at[i] = Some(k);
            }
        }
        if out_of_bounds(&x, m2, non_finite) {
            traj.exploded_at = Some(k);
            traj.push(k, &x);
            break;
        }
        if k % config.record_stride == 0 || k == n_steps {
            traj.push(k, &x);
        }
    }
    Ok(traj)
}

/// Advances two solutions from `ax` and `ay` with identical increments.
pub fn simulate_coupled<T: Scalar>(
    model: &CoefficientModel<T>,
    ax: &[T],
    ay: &[T],
    config: &SimConfig<T>,
    path_index: u64,
) -> Result<CoupledRun<T>> {
    let d = model.d();
    config.validate_start(ax, d)?;
    config.validate_start(ay, d)?;
    let noise = NoiseStream::new(config.seed, config.dt);
    let n_steps = config.n_steps();
    let m2 = config.explosion_threshold * config.explosion_threshold;
    let mut run = CoupledRun {
        x: Trajectory::new(d, config.dt),
        y: Trajectory::new(d, config.dt),
        zeta: Vec::new(),
        xi: Vec::new(),
        eta: Vec::new(),
    };
    let (mut x, mut y) = (ax.to_vec(), ay.to_vec());
    let (mut tx, mut ty) = (initial_flags(ax), initial_flags(ay));
    for i in 0..d {
        if tx[i] {
            run.x.trapped_at[i] = Some(0);
        }
        if ty[i] {
            run.y.trapped_at[i] = Some(0);
        }
    }
    let (mut fx, mut fy) = (vec![T::zero(); d], vec![T::zero(); d]);
    let mut db = vec![T::zero(); d];
    model.eval_unchecked(&x, &mut fx);
    model.eval_unchecked(&y, &mut fy);
    run.x.push(0, &x);
    run.y.push(0, &y);
    run.push_derived(&x, &y, &fx, &fy);
    for n in 0..n_steps {
        noise.fill(path_index, n as u64, &mut db);
        let bad_x = advance(&mut x, &db, &mut tx, &fx, model.alpha(), config.dt);
        let bad_y = advance(&mut y, &db, &mut ty, &fy, model.alpha(), config.dt);
        let k = n + 1;
        for i in 0..d {
            if tx[i] && run.x.trapped_at[i].is_none() {
                run.x.trapped_at[i] = Some(k);
            }
            if ty[i] && run.y.trapped_at[i].is_none() {
                run.y.trapped_at[i] = Some(k);
            }
        }
        let ex = out_of_bounds(&x, m2, bad_x);
        let ey = out_of_bounds(&y, m2, bad_y);
        if !(bad_x || bad_y) {
            model.eval_unchecked(&x, &mut fx);
            model.eval_unchecked(&y, &mut fy);
        }
        if ex || ey || k % config.record_stride == 0 || k == n_steps {
            run.x.push(k, &x);
            run.y.push(k, &y);
            run.push_derived(&x, &y, &fx, &fy);
        }
        if ex || ey {
            if ex {
                run.x.exploded_at = Some(k);
            }
            if ey {
                run.y.exploded_at = Some(k);
            }
            break;
        }
    }
    Ok(run)
}

/// Independent paths `0..n_paths` in parallel, returned in path order.
pub fn simulate_batch<T: Scalar>(model: &CoefficientModel<T>, a: &[T], config: &SimConfig<T>) -> Result<Vec<Trajectory<T>>> {
    (0..config.n_paths as u64)
        .into_par_iter()
        .map(|p| simulate_path(model, a, config, p))
        .collect()
}

/// First recorded time with `|X| >= M` (or a non-finite state).
pub fn detect_explosion<T: Scalar>(traj: &Trajectory<T>, m: T) -> Option<T> {
    let m2 = m * m;
    let scanned = (0..traj.len()).find(|&k| {
        let s = traj.state(k);
        out_of_bounds(s, m2, s.iter().any(|v| !v.is_finite()))
    });
    let flagged = traj
        .exploded_at
        .and_then(|step| traj.record_at_or_after(step))
        .filter(|&k| traj.state(k).iter().any(|v| !v.is_finite()));
    match (scanned, flagged) {
        (Some(a), Some(b)) => Some(traj.time(a.min(b))),
        (a, b) => a.or(b).map(|k| traj.time(k)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn zero_model(alpha: Vec<f64>) -> CoefficientModel<f64> {
        let d = alpha.len();
        CoefficientModel::constant(alpha, vec![0.0; d]).unwrap()
    }

    fn cfg(dt: f64, horizon: f64, stride: usize) -> SimConfig<f64> {
        SimConfig {
            dt,
            horizon,
            record_stride: stride,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn trapped_component_stays_zero() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let out = step(&[0.0, 1.0], &[5.0, -0.3], &[true, false], &m, 0.01).unwrap();
        assert_eq!(f64::to_bits(out.state[0]), 0.0f64.to_bits());
        assert!(out.trapped[0]);
    }

    #[test]
    fn zero_is_fixed_point() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let out = step(&[0.0, 0.0], &[0.7, -2.0], &[false, false], &m, 0.01).unwrap();
        assert_eq!(out.state, vec![0.0, 0.0]);
        assert_eq!(out.trapped, vec![true, true]);
    }

    #[test]
    fn deterministic_drift_step() {
        let out = step(&[1.0], &[123.0], &[false], &zero_model(vec![0.1]), 0.01).unwrap();
        assert_relative_eq!(out.state[0], 1.001, max_relative = 1e-15);
    }

    #[test]
    fn negative_step_is_absorbed() {
        let m = CoefficientModel::constant(vec![0.0], vec![1.0]).unwrap();
        let out = step(&[0.01], &[-1.0], &[false], &m, 0.01).unwrap();
        assert_eq!(out.state, vec![0.0]);
        assert!(out.trapped[0]);
    }

    #[test]
    fn step_rejects_inconsistent_flags() {
        let m = zero_model(vec![0.0]);
        assert!(step(&[0.5], &[0.0], &[true], &m, 0.01).is_err());
    }

    #[test]
    fn constant_trajectory_without_noise_or_drift() {
        let t = simulate_path(&zero_model(vec![0.0, 0.0]), &[0.3, 2.0], &cfg(1e-3, 1.0, 10), 0).unwrap();
        for k in 0..t.len() {
            assert_eq!(t.state(k), &[0.3, 2.0]);
        }
        assert_eq!(t.len(), 101);
        assert_eq!(t.path_steps(), 1000);
    }

    #[test]
    fn euler_orbit_of_linear_drift() {
        let t = simulate_path(&zero_model(vec![0.5, -1.0]), &[1.0, 2.0], &cfg(1e-3, 1.0, 100), 0).unwrap();
        for k in 0..t.len() {
            let n = t.steps()[k] as i32;
            assert_relative_eq!(t.state(k)[0], 1.0005f64.powi(n), max_relative = 1e-12);
            assert_relative_eq!(t.state(k)[1], 2.0 * 0.999f64.powi(n), max_relative = 1e-12);
        }
        // O(dt) from the exponential
        assert!((t.last_state()[0] - 0.5f64.exp()).abs() < 1e-3);
    }

    #[test]
    fn bitwise_reproducible() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let a = simulate_path(&m, &[1.0, 1.0], &cfg(1e-3, 1.0, 10), 3).unwrap();
        let b = simulate_path(&m, &[1.0, 1.0], &cfg(1e-3, 1.0, 10), 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&m, &[1.0, 1.0], &cfg(1e-3, 1.0, 10), 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn initial_zero_is_trapped_at_step_zero() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let t = simulate_path(&m, &[0.0, 1.0], &cfg(1e-3, 0.5, 10), 0).unwrap();
        assert_eq!(t.trapped_at()[0], Some(0));
        assert!((0..t.len()).all(|k| t.state(k)[0] == 0.0));
        // f_2 = γ x_1 = 0: the second component is frozen as well
        assert!((0..t.len()).all(|k| t.state(k)[1] == 1.0));
    }

    #[test]
    fn config_validation() {
        let m = zero_model(vec![0.0]);
        assert!(simulate_path(&m, &[1.0], &cfg(2.0, 1.0, 1), 0).is_err());
        assert!(simulate_path(&m, &[-1.0], &cfg(0.1, 1.0, 1), 0).is_err());
        let mut c = cfg(0.1, 1.0, 1);
        c.explosion_threshold = 0.5;
        assert!(simulate_path(&m, &[1.0], &c, 0).is_err());
        assert!(simulate_path(&m, &[1.0], &cfg(0.1, 1.0, 0), 0).is_err());
    }

    #[test]
    fn exact_coupling_gives_zero_gap() {
        let m = CoefficientModel::cyclic(vec![0.1, -0.2], vec![1.0, 1.0]).unwrap();
        let run = simulate_coupled(&m, &[1.0, 1.0], &[1.0, 1.0], &cfg(1e-3, 1.0, 10), 9).unwrap();
        assert!(run.zeta().iter().all(|z| z.to_bits() == 0));
        assert_eq!(run.x(), run.y());
    }

    #[test]
    fn frozen_gap_without_dynamics() {
        let run = simulate_coupled(&zero_model(vec![0.0, 0.0]), &[1.0, 1.0], &[1.5, 0.5], &cfg(1e-2, 1.0, 5), 0).unwrap();
        assert!(run.zeta().iter().all(|&z| z == 0.5));
    }

    #[test]
    fn coupled_initial_gap() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let run = simulate_coupled(&m, &[1.0, 1.0], &[1.0 + 1e-3, 1.0], &cfg(1e-3, 1.0, 10), 0).unwrap();
        assert_relative_eq!(run.zeta()[0], 1e-6, max_relative = 1e-9);
        assert_eq!(run.len(), run.x().len());
        // the coupled X path equals the uncoupled path with the same index
        let solo = simulate_path(&m, &[1.0, 1.0], &cfg(1e-3, 1.0, 10), 0).unwrap();
        assert_eq!(run.x(), &solo);
    }

    #[test]
    fn explosion_detection() {
        let flat = simulate_path(&zero_model(vec![0.0]), &[1.0], &cfg(1e-3, 1.0, 10), 0).unwrap();
        assert_eq!(detect_explosion(&flat, 10.0), None);

        let mut c = cfg(1e-3, 2.0, 1);
        c.explosion_threshold = 100.0;
        let grow = simulate_path(&zero_model(vec![1.0]), &[1.0], &c, 0).unwrap();
        let t = detect_explosion(&grow, std::f64::consts::E).unwrap();
        // (1 + dt)^n >= e first at n = ceil(1 / log(1 + dt))
        let n = (1.0 / (1.0f64 + 1e-3).ln()).ceil();
        assert_relative_eq!(t, n * 1e-3, max_relative = 1e-12);
        assert!((t - 1.0).abs() < 2e-3);
    }

    #[test]
    fn overflow_sets_explosion_flag() {
        let m = CoefficientModel::constant(vec![1e308], vec![0.0]).unwrap();
        let mut c = cfg(0.5, 1.0, 1);
        c.explosion_threshold = f64::MAX;
        let t = simulate_path(&m, &[1.0], &c, 0).unwrap();
        assert_eq!(t.exploded_at(), Some(1));
        assert_eq!(detect_explosion(&t, f64::MAX), Some(0.5));
    }

    #[test]
    fn single_precision_path() {
        let m = CoefficientModel::<f32>::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let c = SimConfig::<f32> {
            dt: 1e-3,
            horizon: 1.0,
            ..Default::default()
        };
        let t = simulate_path(&m, &[1.0, 1.0], &c, 0).unwrap();
        assert!(t.states.iter().all(|v| *v >= 0.0));
    }
}
