use serde::Serialize;

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::modulus::{ModulusSpec, PhiFamily};
use crate::report::Verdict;
use crate::scalar::Scalar;
use crate::sde::CoupledRun;

use super::eta::{audit_segment, eta_factor, EtaAudit};
use super::gronwall::{clamped_phi, gronwall_constant_with_factor};
use super::stopping::{stop_index, CoefficientSeries, StoppingBand};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CascadeParams<T> {
    pub epsilon: T,
    pub delta: T,
    /// Inflated Lipschitz constant `C`.
    pub c: T,
    pub c1: T,
    pub c2: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopePoint<T> {
    pub t: T,
    pub log_phi: T,
    pub log_bound: T,
}

/// Components whose coefficient vanishes on the whole post-trap segment follow the
/// Euler orbit of `ẋ = α x` exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeterministicComponents<T> {
    pub components: Vec<usize>,
    pub max_rel_error: T,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeReport<T> {
    pub trapped_component: Option<usize>,
    pub joint_trap_time: Option<T>,
    pub active: Vec<usize>,
    pub cap_only: Vec<usize>,
    pub stage_start_time: Option<T>,
    pub stage_stop_time: Option<T>,
    /// The stage band was already violated at the joint trap.
    pub immediate_stop: bool,
    pub k_stage: Option<T>,
    pub eta: Option<EtaAudit<T>>,
    pub envelope: Vec<EnvelopePoint<T>>,
    pub envelope_holds: bool,
    pub deterministic: Option<DeterministicComponents<T>>,
    pub verdict: Verdict,
    pub note: String,
}

impl<T: Scalar> CascadeReport<T> {
    fn inconclusive(note: &str) -> Self {
        Self {
            trapped_component: None,
            joint_trap_time: None,
            active: Vec::new(),
            cap_only: Vec::new(),
            stage_start_time: None,
            stage_stop_time: None,
            immediate_stop: false,
            k_stage: None,
            eta: None,
            envelope: Vec::new(),
            envelope_holds: false,
            deterministic: None,
            verdict: Verdict::Inconclusive,
            note: note.to_string(),
        }
    }
}

/// Earliest step at which a component is trapped in both solutions.
fn joint_trap<T: Scalar>(run: &CoupledRun<T>) -> Option<(usize, usize)> {
    (0..run.d())
        .filter_map(|k| match (run.x().trapped_at()[k], run.y().trapped_at()[k]) {
            (Some(a), Some(b)) => Some((a.max(b), k)),
            _ => None,
        })
        .min()
}

fn deterministic_check<T: Scalar>(
    run: &CoupledRun<T>,
    coeffs: &CoefficientSeries<T>,
    model: &CoefficientModel<T>,
    trapped: usize,
    start: usize,
) -> Option<DeterministicComponents<T>> {
    let components: Vec<usize> = (0..run.d())
        .filter(|&l| l != trapped)
        .filter(|&l| (start..run.len()).all(|k| coeffs.fx(k)[l] == T::zero() && coeffs.fy(k)[l] == T::zero()))
        .collect();
    if components.is_empty() {
        return None;
    }
    let dt = run.x().dt();
    let base_step = run.x().steps()[start];
    let mut worst = T::zero();
    for &l in &components {
        let growth = T::one() + model.alpha()[l] * dt;
        for traj in [run.x(), run.y()] {
            let x0 = traj.state(start)[l];
            for k in start..run.len() {
                let n = (traj.steps()[k] - base_step) as i32;
                let expected = x0 * growth.powi(n);
                let got = traj.state(k)[l];
                let err = if expected == T::zero() {
                    got.abs()
                } else {
                    ((got - expected) / expected).abs()
                };
                worst = worst.max(err);
            }
        }
    }
    Some(DeterministicComponents {
        components,
        max_rel_error: worst,
        verdict: Verdict::from_bool(worst <= T::lit(1e-10)),
    })
}

/// One induction stage after a joint trap of component `k`: the band drops `k` to
/// cap-only, and the η audit and a pathwise Lyapunov envelope are re-run on the
/// post-trap segment.
pub fn cascade_demo<T: Scalar>(
    model: &CoefficientModel<T>,
    r: &ModulusSpec<T>,
    run: &CoupledRun<T>,
    params: &CascadeParams<T>,
) -> Result<CascadeReport<T>> {
    let d = run.d();
    if model.d() != d {
        return Err(Error::arg("model and run dimensions differ"));
    }
    if run.is_empty() {
        return Err(Error::arg("empty run"));
    }
    let Some((trap_step, k)) = joint_trap(run) else {
        return Ok(CascadeReport::inconclusive("no component is trapped in both solutions"));
    };
    let trap_time = T::from_usize_lossy(trap_step) * run.x().dt();
    if d == 1 {
        let mut rep = CascadeReport::inconclusive("d = 1 leaves no active index after the trap");
        rep.trapped_component = Some(k);
        rep.joint_trap_time = Some(trap_time);
        return Ok(rep);
    }
    let Some(start) = run.x().record_at_or_after(trap_step) else {
        let mut rep = CascadeReport::inconclusive("joint trap falls after the last record");
        rep.trapped_component = Some(k);
        rep.joint_trap_time = Some(trap_time);
        return Ok(rep);
    };
    let band = StoppingBand::stage(params.epsilon, d, k)?;
    let coeffs = CoefficientSeries::new(run, model);
    let stop = stop_index(run, &coeffs, &band, r.c0(), start);
    let factor = eta_factor(params.epsilon)?;
    let k_stage = gronwall_constant_with_factor(model.alpha(), params.c, params.c1, params.c2, d, factor)?;
    let eta = audit_segment(run, &coeffs, r, params.c, factor, start, stop.unwrap_or(run.len()), 0, true)?;

    let phi = PhiFamily::new(r.clone(), params.delta)?;
    let t0 = run.time(start);
    let (log_phi0, _) = clamped_phi(&phi, run.zeta()[start])?;
    let mut envelope = Vec::with_capacity(run.len() - start);
    for j in start..run.len() {
        let eff = stop.map_or(j, |s| j.min(s));
        let (log_phi, _) = clamped_phi(&phi, run.zeta()[eff])?;
        let t = run.time(j);
        envelope.push(EnvelopePoint {
            t,
            log_phi,
            log_bound: log_phi0 + k_stage * (t - t0),
        });
    }
    let envelope_holds = envelope.iter().all(|p| p.log_phi <= p.log_bound);
    let deterministic = deterministic_check(run, &coeffs, model, k, start);
    let immediate_stop = stop == Some(start);
    let verdict = Verdict::all(
        [eta.verdict, Verdict::from_bool(envelope_holds)]
            .into_iter()
            .chain(deterministic.as_ref().map(|c| c.verdict)),
    );
    let note = if immediate_stop {
        "stage band violated at the joint trap: a remaining coefficient vanishes there".to_string()
    } else {
        "envelope is pathwise on a single run".to_string()
    };
    Ok(CascadeReport {
        trapped_component: Some(k),
        joint_trap_time: Some(trap_time),
        active: band.active().to_vec(),
        cap_only: band.cap_only().to_vec(),
        stage_start_time: Some(t0),
        stage_stop_time: stop.map(|s| run.time(s)),
        immediate_stop,
        k_stage: Some(k_stage),
        eta: Some(eta),
        envelope,
        envelope_holds,
        deterministic,
        verdict,
        note,
    })
}
