use serde::Serialize;

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::modulus::ModulusSpec;
use crate::report::Verdict;
use crate::scalar::Scalar;
use crate::sde::CoupledRun;

use super::stopping::{stop_index, CoefficientSeries, StoppingBand};

/// `max(1/(2ε⁴), 1/(4ε⁶))`.
pub fn eta_factor<T: Scalar>(epsilon: T) -> Result<T> {
    if !(epsilon > T::zero()) {
        return Err(Error::arg("ε must be positive"));
    }
    let e2 = epsilon * epsilon;
    let e4 = e2 * e2;
    Ok((T::lit(2.0) * e4).recip().max((T::lit(4.0) * e4 * e2).recip()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaViolation<T> {
    pub path: u64,
    pub time: T,
    pub component: usize,
    pub eta_sq: T,
    pub bound: T,
    pub zeta: T,
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub fx: Vec<T>,
    pub fy: Vec<T>,
}

/// `(η^i)² <= F (C ζ r(ζ) + ζ)` checked on records before the stopping position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaAudit<T> {
    pub c: T,
    pub factor: T,
    pub audited_steps: usize,
    /// Smallest `bound - η²` over all audited steps and components.
    pub worst_slack: T,
    /// Per audited record: `(t, min_i (bound - (η^i)²))`.
    pub slack_series: Vec<(T, T)>,
    pub violations: Vec<EtaViolation<T>>,
    pub verdict: Verdict,
}

impl<T: Scalar> EtaAudit<T> {
    pub(crate) fn empty(c: T, factor: T) -> Self {
        Self {
            c,
            factor,
            audited_steps: 0,
            worst_slack: T::infinity(),
            slack_series: Vec::new(),
            violations: Vec::new(),
            verdict: Verdict::Pass,
        }
    }

    /// Folds another audit in. The slack series is kept only for the receiver.
    pub(crate) fn absorb(&mut self, other: EtaAudit<T>, keep: usize) {
        self.audited_steps += other.audited_steps;
        self.worst_slack = self.worst_slack.min(other.worst_slack);
        let room = keep.saturating_sub(self.violations.len());
        let extra = other.violations.len();
        self.violations.extend(other.violations.into_iter().take(room));
        if extra > 0 {
            self.verdict = Verdict::Fail;
        }
    }
}

/// Audits records `[from, to)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn audit_segment<T: Scalar>(
    run: &CoupledRun<T>,
    coeffs: &CoefficientSeries<T>,
    r: &ModulusSpec<T>,
    c: T,
    factor: T,
    from: usize,
    to: usize,
    path: u64,
    with_series: bool,
) -> Result<EtaAudit<T>> {
    let mut audit = EtaAudit::empty(c, factor);
    for k in from..to {
        let zeta = run.zeta()[k];
        let bound = factor * (c * r.s_times_r(zeta)? + zeta);
        let mut slack = T::infinity();
        for (i, &eta) in run.eta(k).iter().enumerate() {
            let eta_sq = eta * eta;
            let s = bound - eta_sq;
            slack = slack.min(s);
            if !(eta_sq <= bound) {
                audit.verdict = Verdict::Fail;
                audit.violations.push(EtaViolation {
                    path,
                    time: run.time(k),
                    component: i,
                    eta_sq,
                    bound,
                    zeta,
                    x: run.x().state(k).to_vec(),
                    y: run.y().state(k).to_vec(),
                    fx: coeffs.fx(k).to_vec(),
                    fy: coeffs.fy(k).to_vec(),
                });
            }
        }
        audit.audited_steps += 1;
        audit.worst_slack = audit.worst_slack.min(slack);
        if with_series {
            audit.slack_series.push((run.time(k), slack));
        }
    }
    Ok(audit)
}

/// Audits every record before `τ ∧ τ_ε` with `τ` taken at the modulus' `c0`.
pub fn eta_bound_audit<T: Scalar>(
    run: &CoupledRun<T>,
    model: &CoefficientModel<T>,
    r: &ModulusSpec<T>,
    c: T,
    band: &StoppingBand<T>,
) -> Result<EtaAudit<T>> {
    if !(c >= T::zero()) {
        return Err(Error::arg("Lipschitz constant C must be nonnegative"));
    }
    let coeffs = CoefficientSeries::new(run, model);
    let stop = stop_index(run, &coeffs, band, r.c0(), 0).unwrap_or(run.len());
    audit_segment(run, &coeffs, r, c, eta_factor(band.epsilon())?, 0, stop, 0, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{verify_extended_lipschitz, LipschitzSampling};
    use crate::sde::{simulate_coupled, SimConfig};

    fn cfg() -> SimConfig<f64> {
        SimConfig {
            dt: 1e-3,
            horizon: 1.0,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn factor_switches_at_unit_over_sqrt2() {
        assert_eq!(eta_factor(1.0f64).unwrap(), 0.5);
        assert!((eta_factor(0.1f64).unwrap() - 2.5e5).abs() < 1e-6);
        let e = 0.5f64.sqrt();
        let f: f64 = eta_factor(e).unwrap();
        assert!((f - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_coupling_slack_is_rhs() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let run = simulate_coupled(&m, &[1.0, 1.0], &[1.0, 1.0], &cfg(), 0).unwrap();
        let band = StoppingBand::full(0.1, 2).unwrap();
        let audit = eta_bound_audit(&run, &m, &ModulusSpec::log(), 0.3, &band).unwrap();
        assert_eq!(audit.verdict, Verdict::Pass);
        assert_eq!(audit.worst_slack, 0.0);
        assert!(audit.audited_steps > 0);
    }

    #[test]
    fn constant_model_passes_without_lipschitz_term() {
        let m = CoefficientModel::constant(vec![0.0, 0.0], vec![0.8, 1.3]).unwrap();
        let band = StoppingBand::full(0.1, 2).unwrap();
        for p in 0..20 {
            let run = simulate_coupled(&m, &[1.0, 1.0], &[1.02, 0.99], &cfg(), p).unwrap();
            // η^i = sqrt(f_i)(sqrt(x^i) - sqrt(y^i)) directly
            for k in 0..run.len() {
                for i in 0..2 {
                    let direct = [0.8f64, 1.3][i].sqrt() * (run.x().state(k)[i].sqrt() - run.y().state(k)[i].sqrt());
                    assert!((run.eta(k)[i] - direct).abs() <= 1e-14);
                }
            }
            let audit = eta_bound_audit(&run, &m, &ModulusSpec::log(), 0.0, &band).unwrap();
            assert_eq!(audit.verdict, Verdict::Pass, "path {p}");
        }
    }

    #[test]
    fn cyclic_fixture_passes() {
        let m = CoefficientModel::cyclic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let r = ModulusSpec::log();
        let c = 1.1 * verify_extended_lipschitz(&m, &r, &LipschitzSampling::default()).unwrap().c_hat;
        let band = StoppingBand::full(0.1, 2).unwrap();
        let run = simulate_coupled(&m, &[1.0, 1.0], &[1.001, 1.0], &cfg(), 0).unwrap();
        let audit = eta_bound_audit(&run, &m, &r, c, &band).unwrap();
        assert_eq!(audit.verdict, Verdict::Pass);
        assert_eq!(audit.slack_series.len(), audit.audited_steps);
    }

    #[test]
    fn undersized_bound_is_reported() {
        let m = CoefficientModel::constant(vec![0.0], vec![1.0]).unwrap();
        let run = simulate_coupled(&m, &[1.0], &[1.05], &cfg(), 0).unwrap();
        let band = StoppingBand::full(0.99, 1).unwrap();
        let mut audit = audit_segment(&run, &CoefficientSeries::new(&run, &m), &ModulusSpec::log(), 0.0, 1e-3, 0, 1, 0, true).unwrap();
        assert_eq!(audit.verdict, Verdict::Fail);
        assert_eq!(audit.violations[0].x, vec![1.0]);
        let _ = band;
        let other = audit.clone();
        audit.absorb(other, 1);
        assert_eq!(audit.violations.len(), 1);
    }
}
