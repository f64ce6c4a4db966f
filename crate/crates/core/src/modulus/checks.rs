//! Numerical checkers for the modulus conditions near the origin and at infinity.
//!
//! Every report is sampled evidence on a fixed probe schedule, never a proof.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::modulus::spec::{Domain, ModulusSpec};
use crate::quadrature::{integrate, Tolerance};
use crate::report::Verdict;
use crate::scalar::Scalar;

pub const EVIDENCE_NOTE: &str = "numerical evidence, not proof";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionId {
    /// `liminf_{s→0} r(s) > 0`
    #[serde(rename = "R_i")]
    RI,
    /// `s r'(s) / r(s) → 0` as `s → 0`
    #[serde(rename = "R_ii")]
    RIi,
    /// `∫_0^a ds / (s r(s)) = ∞`
    #[serde(rename = "R_iii")]
    RIii,
    /// `ρ(s) → ∞`
    #[serde(rename = "Rho_i")]
    RhoI,
    /// `s ρ'(s) / ρ(s) → 0` as `s → ∞`
    #[serde(rename = "Rho_ii")]
    RhoIi,
    /// `∫_K^∞ ds / (s ρ(s) + 1) = ∞`
    #[serde(rename = "Rho_iii")]
    RhoIii,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence<T> {
    pub s: T,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport<T> {
    pub condition_id: ConditionId,
    pub verdict: Verdict,
    pub summary: T,
    pub evidence: Vec<Evidence<T>>,
    pub note: String,
}

impl<T: Scalar> ConditionReport<T> {
    fn new(condition_id: ConditionId, verdict: Verdict, summary: T, evidence: Vec<Evidence<T>>, note: impl Into<String>) -> Self {
        Self {
            condition_id,
            verdict,
            summary,
            evidence,
            note: note.into(),
        }
    }

    fn inconclusive(condition_id: ConditionId, evidence: Vec<Evidence<T>>, why: String) -> Self {
        Self::new(
            condition_id,
            Verdict::Inconclusive,
            T::nan(),
            evidence,
            format!("{EVIDENCE_NOTE}; {why}"),
        )
    }
}

/// Thresholds for the checkers. Defaults are the published schedule values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckTolerances {
    pub tol_pos: f64,
    pub tol_ratio: f64,
    pub tol_div: f64,
    /// Number of probes nearest the limit point examined by the tail checks.
    pub tail_window: usize,
    /// Increment ratio at or below which decay counts as geometric.
    pub geometric_ratio: f64,
    pub growth_window: usize,
    pub growth_factor: f64,
    pub decades: usize,
    pub divergence_from: usize,
    pub quad_rel_tol: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        Self {
            tol_pos: 1e-6,
            tol_ratio: 0.02,
            tol_div: 1e-3,
            tail_window: 20,
            geometric_ratio: 0.9,
            growth_window: 10,
            growth_factor: 10.0,
            decades: 12,
            divergence_from: 6,
            quad_rel_tol: 1e-10,
        }
    }
}

/// Relative tolerance clamped to what the scalar type can resolve.
pub(crate) fn quad_rel<T: Scalar>(rel: f64) -> T {
    T::lit(rel).max(T::lit(100.0) * T::epsilon())
}

/// Probes ordered toward the limit point (`0` for origin moduli, `∞` for growth moduli).
fn tail<T: Scalar>(probes: &[T], window: usize) -> &[T] {
    &probes[probes.len().saturating_sub(window)..]
}

/// Origin condition (i): the modulus stays bounded away from zero near the origin.
pub fn check_liminf_positive<T: Scalar>(r: &ModulusSpec<T>, tol: &CheckTolerances) -> ConditionReport<T> {
    let id = ConditionId::RI;
    let probes = r.probes();
    let mut evidence = Vec::with_capacity(probes.len());
    for &s in &probes {
        match r.eval(s) {
            Ok(v) => evidence.push(Evidence { s, value: v }),
            Err(e) => {
                evidence.push(Evidence { s, value: T::nan() });
                return ConditionReport::inconclusive(id, evidence, format!("evaluation failed: {e}"));
            }
        }
    }
    let window = evidence.len().saturating_sub(tol.tail_window);
    let running_min = evidence[window..].iter().map(|e| e.value).fold(T::infinity(), T::min);
    let verdict = Verdict::from_bool(running_min >= T::lit(tol.tol_pos));
    ConditionReport::new(id, verdict, running_min, evidence, EVIDENCE_NOTE)
}

fn slope_ratio_report<T: Scalar>(id: ConditionId, r: &ModulusSpec<T>, tol: &CheckTolerances) -> ConditionReport<T> {
    let probes = r.probes();
    let tail = tail_toward_limit(&probes, tol.tail_window);
    let near_zero = T::min_positive_value() / T::epsilon();
    let mut evidence = Vec::with_capacity(tail.len());
    for &s in &tail {
        let value = match (r.eval(s), r.elasticity(s)) {
            (Ok(v), _) if v.abs() < near_zero => {
                evidence.push(Evidence { s, value: T::nan() });
                return ConditionReport::inconclusive(id, evidence, format!("r({s}) is numerically zero"));
            }
            (Ok(_), Ok(q)) => q.abs(),
            (Err(e), _) | (_, Err(e)) => {
                evidence.push(Evidence { s, value: T::nan() });
                return ConditionReport::inconclusive(id, evidence, format!("evaluation failed: {e}"));
            }
        };
        evidence.push(Evidence { s, value });
    }
    let slack = T::lit(1e-9);
    let monotone = evidence
        .windows(2)
        .all(|w| w[1].value <= w[0].value * (T::one() + slack) + T::min_positive_value());
    let last = evidence.last().map(|e| e.value).unwrap_or_else(T::nan);
    let verdict = Verdict::from_bool(monotone && last <= T::lit(tol.tol_ratio));
    ConditionReport::new(id, verdict, last, evidence, EVIDENCE_NOTE)
}

/// The `window` probes nearest the limit point, ordered toward it.
fn tail_toward_limit<T: Scalar>(probes: &[T], window: usize) -> Vec<T> {
    tail(probes, window).to_vec()
}

/// Origin condition (ii): the elasticity `s r'/r` vanishes at the origin.
pub fn check_slope_ratio<T: Scalar>(r: &ModulusSpec<T>, tol: &CheckTolerances) -> ConditionReport<T> {
    slope_ratio_report(ConditionId::RIi, r, tol)
}

/// Classifies a sequence of positive partial-integral increments.
fn divergence_verdict<T: Scalar>(increments: &[T], tol: &CheckTolerances) -> Verdict {
    let from = tol.divergence_from.saturating_sub(1).min(increments.len());
    let tail = &increments[from..];
    if tail.iter().all(|&d| d >= T::lit(tol.tol_div)) {
        return Verdict::Pass;
    }
    let geometric = tail.len() >= 2
        && tail
            .windows(2)
            .all(|w| w[0] > T::zero() && w[1] <= T::lit(tol.geometric_ratio) * w[0]);
    if geometric {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    }
}

/// Origin condition (iii): `∫_t^{c0} ds/(s r(s))` grows without bound as `t → 0`.
///
/// Increments over decades `[c0·10^-(m+1), c0·10^-m]` are integrated in the
/// variable `u = log s`, where the integrand is `1/r(e^u)`.
pub fn check_integral_divergence<T: Scalar>(r: &ModulusSpec<T>, tol: &CheckTolerances) -> ConditionReport<T> {
    let id = ConditionId::RIii;
    let Domain::Origin { c0 } = r.domain() else {
        return ConditionReport::inconclusive(id, vec![], "modulus is not defined at the origin".into());
    };
    let qt = Tolerance::relative(quad_rel::<T>(tol.quad_rel_tol));
    let ten = T::lit(10.0);
    let mut evidence = Vec::with_capacity(tol.decades);
    let mut increments = Vec::with_capacity(tol.decades);
    let mut upper = c0;
    let mut cumulative = T::zero();
    for _ in 1..=tol.decades {
        let lower = upper / ten;
        let piece = integrate(|u: T| Ok(T::one() / r.eval(u.exp().min(c0))?), lower.ln(), upper.ln(), qt);
        match piece {
            Ok(p) => {
                if !evidence.is_empty() {
                    increments.push(p.value);
                }
                cumulative = cumulative + p.value;
                evidence.push(Evidence { s: lower, value: cumulative });
            }
            Err(e) => return ConditionReport::inconclusive(id, evidence, format!("quadrature failed: {e}")),
        }
        upper = lower;
    }
    let verdict = divergence_verdict(&increments, tol);
    let summary = increments.last().copied().unwrap_or_else(T::nan);
    ConditionReport::new(id, verdict, summary, evidence, EVIDENCE_NOTE)
}

/// The three conditions of the non-explosion criterion, checked at infinity.
pub fn check_growth_conditions<T: Scalar>(rho: &ModulusSpec<T>, tol: &CheckTolerances) -> Vec<ConditionReport<T>> {
    let Domain::Infinity { start } = rho.domain() else {
        let why = "growth modulus must be defined on [K, ∞)".to_string();
        return vec![
            ConditionReport::inconclusive(ConditionId::RhoI, vec![], why.clone()),
            ConditionReport::inconclusive(ConditionId::RhoIi, vec![], why.clone()),
            ConditionReport::inconclusive(ConditionId::RhoIii, vec![], why),
        ];
    };
    vec![
        growth_unbounded(rho, tol),
        slope_ratio_report(ConditionId::RhoIi, rho, tol),
        growth_integral(rho, start, tol),
    ]
}

fn growth_unbounded<T: Scalar>(rho: &ModulusSpec<T>, tol: &CheckTolerances) -> ConditionReport<T> {
    let id = ConditionId::RhoI;
    let mut evidence = Vec::new();
    for s in rho.probes() {
        match rho.eval(s) {
            Ok(value) => evidence.push(Evidence { s, value }),
            Err(e) => {
                evidence.push(Evidence { s, value: T::nan() });
                return ConditionReport::inconclusive(id, evidence, format!("evaluation failed: {e}"));
            }
        }
    }
    let first = evidence[0].value;
    let window = &evidence[evidence.len().saturating_sub(tol.growth_window)..];
    let increasing = window.windows(2).all(|w| w[1].value > w[0].value);
    let factor = T::lit(tol.growth_factor);
    let beyond = window.iter().all(|e| e.value > factor * first);
    let last = evidence.last().map(|e| e.value).unwrap_or_else(T::nan);
    ConditionReport::new(id, Verdict::from_bool(increasing && beyond), last, evidence, EVIDENCE_NOTE)
}

/// `∫_K^t ds/(s ρ(s) + 1)` over decades, in `u = log s` with integrand `1/(ρ(e^u) + e^-u)`.
fn growth_integral<T: Scalar>(rho: &ModulusSpec<T>, start: T, tol: &CheckTolerances) -> ConditionReport<T> {
    let id = ConditionId::RhoIii;
    let qt = Tolerance::relative(quad_rel::<T>(tol.quad_rel_tol));
    let ten = T::lit(10.0);
    let mut evidence = Vec::new();
    let mut increments = Vec::new();
    let mut lower = start;
    let mut cumulative = T::zero();
    for _ in 1..=tol.decades {
        let upper = lower * ten;
        let piece = integrate(
            |u: T| {
                let s = u.exp().max(start);
                Ok(T::one() / (rho.eval(s)? + T::one() / s))
            },
            lower.ln(),
            upper.ln(),
            qt,
        );
        match piece {
            Ok(p) => {
                if !evidence.is_empty() {
                    increments.push(p.value);
                }
                cumulative = cumulative + p.value;
                evidence.push(Evidence { s: upper, value: cumulative });
            }
            Err(e) => return ConditionReport::inconclusive(id, evidence, format!("quadrature failed: {e}")),
        }
        lower = upper;
    }
    let verdict = divergence_verdict(&increments, tol);
    let summary = increments.last().copied().unwrap_or_else(T::nan);
    ConditionReport::new(id, verdict, summary, evidence, EVIDENCE_NOTE)
}

/// All three origin conditions.
pub fn check_modulus_conditions<T: Scalar>(r: &ModulusSpec<T>, tol: &CheckTolerances) -> Vec<ConditionReport<T>> {
    vec![
        check_liminf_positive(r, tol),
        check_slope_ratio(r, tol),
        check_integral_divergence(r, tol),
    ]
}

/// `C2 >= sup |1 - r - ζ r'| / r` over the probe grid, inflated by 5%.
pub fn estimate_c2<T: Scalar>(r: &ModulusSpec<T>, probes: &[T]) -> Result<T> {
    let mut worst = T::zero();
    for &z in probes {
        let value = r.eval(z)?;
        let q = (T::one() / value - T::one() - r.elasticity(z)?).abs();
        worst = worst.max(q);
    }
    Ok(worst * T::lit(1.05))
}
