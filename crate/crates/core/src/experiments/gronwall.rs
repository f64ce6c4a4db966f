use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::{verify_extended_lipschitz, CoefficientModel, LipschitzSampling};
use crate::error::{Error, Result};
use crate::modulus::{estimate_c2, ModulusSpec, PhiFamily};
use crate::report::Verdict;
use crate::scalar::{squared_norm, Scalar};
use crate::sde::{simulate_coupled, CoupledRun, SimConfig};
use crate::stats::log_mean_exp;

use super::eta::{audit_segment, eta_factor, EtaAudit};
use super::stopping::{stop_index, CoefficientSeries, StoppingBand};

fn check_inputs<T: Scalar>(alpha: &[T], c: T, c1: T, c2: T, d: usize) -> Result<T> {
    if alpha.is_empty() || d == 0 {
        return Err(Error::arg("Gronwall constant needs d >= 1"));
    }
    if !(c >= T::zero() && c1 >= T::zero() && c2 >= T::zero()) {
        return Err(Error::arg("C, C1 and C2 must be nonnegative"));
    }
    Ok(T::lit(2.0) * alpha.iter().fold(T::zero(), |m, a| m.max(a.abs())))
}

/// `K = α C1 + d (C + C1) / (2ε⁴) + d C1 C2 (C + C1) / ε⁴` with `α = 2 max |α_i|`.
pub fn gronwall_constant<T: Scalar>(alpha: &[T], c: T, c1: T, c2: T, d: usize, epsilon: T) -> Result<T> {
    let a = check_inputs(alpha, c, c1, c2, d)?;
    if !(epsilon > T::zero()) {
        return Err(Error::arg("ε must be positive"));
    }
    let e4 = epsilon.powi(4);
    let df = T::from_usize_lossy(d);
    Ok(a * c1 + df * (c + c1) / (T::lit(2.0) * e4) + df * c1 * c2 * (c + c1) / e4)
}

/// The same constant with `1/(2ε⁴)` replaced by a general factor `F`:
/// `K = α C1 + d F (C + C1)(1 + 2 C1 C2)`.
pub fn gronwall_constant_with_factor<T: Scalar>(alpha: &[T], c: T, c1: T, c2: T, d: usize, factor: T) -> Result<T> {
    let a = check_inputs(alpha, c, c1, c2, d)?;
    if !(factor > T::zero()) {
        return Err(Error::arg("factor must be positive"));
    }
    let df = T::from_usize_lossy(d);
    Ok(a * c1 + df * factor * (c + c1) * (T::one() + T::lit(2.0) * c1 * c2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallParams<T> {
    pub delta: T,
    pub epsilon: T,
    /// Number of intervals in the reporting grid on `[0, T]`.
    pub n_grid: usize,
    pub lipschitz: LipschitzSampling,
    /// Sampled `C` is multiplied by this before use.
    pub c_inflation: T,
    /// Sample multiplier for the re-estimation after an η violation.
    pub resample_factor: usize,
    pub max_violations: usize,
}

impl<T: Scalar> Default for GronwallParams<T> {
    fn default() -> Self {
        Self {
            delta: T::lit(1e-2),
            epsilon: T::lit(0.1),
            n_grid: 20,
            lipschitz: LipschitzSampling::default(),
            c_inflation: T::lit(1.1),
            resample_factor: 10,
            max_violations: 20,
        }
    }
}

/// Constants entering `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GronwallConstants<T> {
    pub c_hat: T,
    pub c: T,
    pub c1: T,
    pub c2: T,
    pub k: T,
    pub resampled: bool,
}

/// Sampled `C` (inflated), `C1`, `C2` and `K` for a model and modulus.
pub fn estimate_constants<T: Scalar>(
    model: &CoefficientModel<T>,
    r: &ModulusSpec<T>,
    epsilon: T,
    sampling: &LipschitzSampling,
    inflation: T,
) -> Result<GronwallConstants<T>> {
    let c_hat = verify_extended_lipschitz(model, r, sampling)?.c_hat;
    let c = c_hat * inflation;
    let c1 = r.floor_c1();
    let c2 = estimate_c2(r, &r.probes())?;
    let k = gronwall_constant(model.alpha(), c, c1, c2, model.d(), epsilon)?;
    Ok(GronwallConstants {
        c_hat,
        c,
        c1,
        c2,
        k,
        resampled: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint<T> {
    pub t: T,
    pub log_estimate: T,
    pub se_log: T,
    pub log_bound: T,
    /// `log_bound + 3 SE - log_estimate`.
    pub margin: T,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallReport<T> {
    pub constants: GronwallConstants<T>,
    pub delta: T,
    pub epsilon: T,
    pub zeta0: T,
    pub log_phi0: T,
    pub phi0: T,
    pub n_paths: usize,
    pub stopped_paths: usize,
    pub stopped_at_zero: usize,
    pub exploded_paths: usize,
    /// Stopped values beyond the Lyapunov domain, evaluated at `c0`.
    pub clamped_values: usize,
    pub grid: Vec<GridPoint<T>>,
    pub min_margin: T,
    pub envelope: Verdict,
    pub eta: EtaAudit<T>,
    pub verdict: Verdict,
    pub note: String,
}

#[derive(Debug)]
pub(crate) struct StoppedPath<T> {
    pub run: CoupledRun<T>,
    pub coeffs: CoefficientSeries<T>,
    /// Record position of `t ∧ τ ∧ τ_ε` for the final time.
    pub stop: Option<usize>,
    pub exploded: bool,
}

impl<T: Scalar> StoppedPath<T> {
    pub fn simulate(
        model: &CoefficientModel<T>,
        ax: &[T],
        ay: &[T],
        band: &StoppingBand<T>,
        c0: T,
        config: &SimConfig<T>,
        path: u64,
    ) -> Result<Self> {
        let run = simulate_coupled(model, ax, ay, config, path)?;
        let coeffs = CoefficientSeries::new(&run, model);
        let stop = stop_index(&run, &coeffs, band, c0, 0);
        let exploded = run.x().exploded_at().is_some() || run.y().exploded_at().is_some();
        Ok(Self {
            run,
            coeffs,
            stop,
            exploded,
        })
    }

    /// Record position used for the stopped value at simulation step `step`.
    pub fn stopped_record(&self, step: usize) -> usize {
        let last = self.run.len() - 1;
        let k = self.run.x().record_at_or_after(step).unwrap_or(last);
        self.stop.map_or(k, |s| k.min(s))
    }

    pub fn stopped_zeta(&self, step: usize) -> T {
        self.run.zeta()[self.stopped_record(step)]
    }
}

/// Grid steps on `[0, T]`, snapped to the record stride.
pub(crate) fn grid_steps<T: Scalar>(config: &SimConfig<T>, n_grid: usize) -> Vec<usize> {
    let n = config.n_steps();
    let stride = config.record_stride;
    let mut steps: Vec<usize> = (0..=n_grid.max(1))
        .map(|j| {
            let raw = (j * n) as f64 / n_grid.max(1) as f64;
            (((raw / stride as f64).round() as usize) * stride).min(n)
        })
        .collect();
    steps.dedup();
    steps
}

pub(crate) fn clamped_phi<T: Scalar>(phi: &PhiFamily<T>, zeta: T) -> Result<(T, bool)> {
    let c0 = phi.c0();
    if zeta > c0 {
        Ok((phi.phi(c0)?, true))
    } else {
        Ok((phi.phi(zeta)?, false))
    }
}

struct PathOutcome<T> {
    log_phi: Vec<T>,
    clamped: usize,
    stopped: bool,
    stopped_at_zero: bool,
    exploded: bool,
    audit: EtaAudit<T>,
}

#[allow(clippy::too_many_arguments)]
fn run_paths<T: Scalar>(
    model: &CoefficientModel<T>,
    r: &ModulusSpec<T>,
    phi: &PhiFamily<T>,
    ax: &[T],
    ay: &[T],
    band: &StoppingBand<T>,
    c: T,
    config: &SimConfig<T>,
    steps: &[usize],
) -> Result<Vec<PathOutcome<T>>> {
    let factor = eta_factor(band.epsilon())?;
    (0..config.n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let sp = StoppedPath::simulate(model, ax, ay, band, r.c0(), config, p)?;
            let mut clamped = 0;
            let mut log_phi = Vec::with_capacity(steps.len());
            for &s in steps {
                let (v, cl) = clamped_phi(phi, sp.stopped_zeta(s))?;
                clamped += cl as usize;
                log_phi.push(v);
            }
            let to = sp.stop.unwrap_or(sp.run.len());
            let audit = audit_segment(&sp.run, &sp.coeffs, r, c, factor, 0, to, p, p == 0)?;
            Ok(PathOutcome {
                log_phi,
                clamped,
                stopped: sp.stop.is_some(),
                stopped_at_zero: sp.stop == Some(0),
                exploded: sp.exploded,
                audit,
            })
        })
        .collect()
}

/// Monte Carlo check of `E Φ_δ(ζ_{t∧τ∧τ_ε}) <= Φ_δ(ζ₀) e^{Kt}` on a time grid, in log space.
///
/// `C` is sampled and inflated. If the η audit finds a violation, `C` is re-sampled with
/// `resample_factor` times more pairs and the paths are re-run once.
pub fn gronwall_experiment<T: Scalar>(
    model: &CoefficientModel<T>,
    r: &ModulusSpec<T>,
    ax: &[T],
    gap: &[T],
    params: &GronwallParams<T>,
    config: &SimConfig<T>,
) -> Result<GronwallReport<T>> {
    let d = model.d();
    if ax.len() != d || gap.len() != d {
        return Err(Error::arg("initial state and gap must have length d"));
    }
    if config.n_paths == 0 {
        return Err(Error::arg("n_paths must be at least 1"));
    }
    let ay: Vec<T> = ax.iter().zip(gap).map(|(&a, &g)| a + g).collect();
    let zeta0 = squared_norm(gap);
    let c0 = r.c0();
    if zeta0 > c0 * c0 {
        return Err(Error::arg(format!("initial gap ζ0 = {zeta0} exceeds c0² = {}", c0 * c0)));
    }
    let band = StoppingBand::full(params.epsilon, d)?;
    let phi = PhiFamily::new(r.clone(), params.delta)?;
    let steps = grid_steps(config, params.n_grid);
    let log_phi0 = phi.phi(zeta0)?;

    let mut constants = estimate_constants(model, r, params.epsilon, &params.lipschitz, params.c_inflation)?;
    let mut outcomes = run_paths(model, r, &phi, ax, &ay, &band, constants.c, config, &steps)?;
    if outcomes.iter().any(|o| o.audit.verdict != Verdict::Pass) {
        let mut wider = params.lipschitz;
        wider.n_pairs *= params.resample_factor.max(1);
        let fresh = estimate_constants(model, r, params.epsilon, &wider, params.c_inflation)?;
        constants = GronwallConstants {
            resampled: true,
            ..if fresh.c > constants.c { fresh } else { constants }
        };
        outcomes = run_paths(model, r, &phi, ax, &ay, &band, constants.c, config, &steps)?;
    }

    let factor = eta_factor(params.epsilon)?;
    let mut eta = EtaAudit::empty(constants.c, factor);
    let mut first = true;
    for o in &mut outcomes {
        let audit = std::mem::replace(&mut o.audit, EtaAudit::empty(constants.c, factor));
        if first {
            eta.slack_series = audit.slack_series.clone();
            first = false;
        }
        eta.absorb(audit, params.max_violations);
    }

    let dt = config.dt;
    let three = T::lit(3.0);
    let grid: Vec<GridPoint<T>> = steps
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let t = T::from_usize_lossy(s) * dt;
            let column: Vec<T> = outcomes.iter().map(|o| o.log_phi[j]).collect();
            let (log_estimate, se_log) = log_mean_exp(&column);
            let log_bound = log_phi0 + constants.k * t;
            let margin = log_bound + three * se_log - log_estimate;
            GridPoint {
                t,
                log_estimate,
                se_log,
                log_bound,
                margin,
                verdict: Verdict::from_bool(margin >= T::zero()),
            }
        })
        .collect();
    let min_margin = grid.iter().map(|g| g.margin).fold(T::infinity(), T::min);
    let stopped_at_zero = outcomes.iter().filter(|o| o.stopped_at_zero).count();
    let (envelope, note) = if stopped_at_zero == outcomes.len() {
        (Verdict::Inconclusive, "every path left the band at t = 0; widen the band".to_string())
    } else {
        (
            Verdict::all(grid.iter().map(|g| g.verdict)),
            "stopping times resolved on the record grid".to_string(),
        )
    };
    let verdict = Verdict::all([envelope, eta.verdict]);
    Ok(GronwallReport {
        constants,
        delta: params.delta,
        epsilon: params.epsilon,
        zeta0,
        log_phi0,
        phi0: log_phi0.exp(),
        n_paths: outcomes.len(),
        stopped_paths: outcomes.iter().filter(|o| o.stopped).count(),
        stopped_at_zero,
        exploded_paths: outcomes.iter().filter(|o| o.exploded).count(),
        clamped_values: outcomes.iter().map(|o| o.clamped).sum(),
        grid,
        min_margin,
        envelope,
        eta,
        verdict,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_hand_value() {
        assert_eq!(gronwall_constant(&[0.0, 0.0], 1.0, 1.0, 0.0, 2, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn epsilon_scaling() {
        let k = |e: f64| gronwall_constant(&[0.0, 0.0], 0.3, 0.5, 1.2, 2, e).unwrap();
        assert_relative_eq!(k(0.05) / k(0.1), 16.0, max_relative = 1e-12);
        let kd = |e: f64| gronwall_constant(&[1.0, 0.0], 0.3, 0.5, 1.2, 2, e).unwrap();
        assert!((kd(1e-3) / kd(2e-3) - 16.0).abs() < 1e-6);
    }

    #[test]
    fn drift_term_uses_twice_max_abs() {
        let a = gronwall_constant(&[1.0, -1.0], 0.0, 1.0, 0.0, 1, 1e6).unwrap();
        let base = gronwall_constant(&[0.0, 0.0], 0.0, 1.0, 0.0, 1, 1e6).unwrap();
        assert_relative_eq!(a - base, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn factor_form_matches_at_default_factor() {
        let e: f64 = 0.1;
        let k = gronwall_constant(&[0.2, -0.4], 0.3, 0.5, 1.2, 3, e).unwrap();
        let f = gronwall_constant_with_factor(&[0.2, -0.4], 0.3, 0.5, 1.2, 3, 1.0 / (2.0 * e.powi(4))).unwrap();
        assert_relative_eq!(k, f, max_relative = 1e-14);
    }

    #[test]
    fn argument_errors() {
        assert!(gronwall_constant(&[0.0], 1.0, 1.0, 1.0, 1, 0.0).is_err());
        assert!(gronwall_constant(&[0.0], -1.0, 1.0, 1.0, 1, 0.1).is_err());
        assert!(gronwall_constant::<f64>(&[], 1.0, 1.0, 1.0, 0, 0.1).is_err());
    }

    #[test]
    fn grid_is_snapped_and_covers_horizon() {
        let c = SimConfig::<f64> {
            dt: 1e-3,
            horizon: 1.0,
            record_stride: 10,
            ..Default::default()
        };
        let g = grid_steps(&c, 20);
        assert_eq!(g.first(), Some(&0));
        assert_eq!(g.last(), Some(&1000));
        assert!(g.iter().all(|s| s % 10 == 0));
        assert_eq!(g.len(), 21);
    }

    fn small_config() -> SimConfig<f64> {
        SimConfig {
            dt: 1e-3,
            horizon: 0.5,
            n_paths: 200,
            seed: 3,
            ..Default::default()
        }
    }

    fn params() -> GronwallParams<f64> {
        GronwallParams {
            lipschitz: LipschitzSampling {
                n_pairs: 5000,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn zero_gap_gives_unit_expectation() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let rep = gronwall_experiment(&m, &ModulusSpec::log(), &[1.0, 1.0], &[0.0, 0.0], &params(), &small_config()).unwrap();
        assert!(rep.grid.iter().all(|g| g.log_estimate == 0.0));
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn frozen_model_keeps_phi0() {
        let m = CoefficientModel::constant(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let rep = gronwall_experiment(&m, &ModulusSpec::log(), &[1.0, 1.0], &[1e-3, 0.0], &params(), &small_config()).unwrap();
        for g in &rep.grid {
            assert_relative_eq!(g.log_estimate, rep.log_phi0, max_relative = 1e-12);
            assert_eq!(g.verdict, Verdict::Pass);
        }
        // f = 0 sits on the band's lower edge, so every path stops at t = 0
        assert_eq!(rep.envelope, Verdict::Inconclusive);
    }

    #[test]
    fn misconfigured_band_is_inconclusive() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mut p = params();
        p.epsilon = 0.9;
        let rep = gronwall_experiment(&m, &ModulusSpec::log(), &[0.5, 0.5], &[1e-3, 0.0], &p, &small_config()).unwrap();
        assert_eq!(rep.envelope, Verdict::Inconclusive);
        assert_eq!(rep.stopped_at_zero, 200);
    }

    #[test]
    fn oversized_gap_rejected() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(gronwall_experiment(&m, &ModulusSpec::log(), &[1.0, 1.0], &[0.5, 0.0], &params(), &small_config()).is_err());
    }
}
