use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::modulus::checks::{check_slope_ratio, quad_rel, CheckTolerances};
use crate::modulus::spec::{Domain, ModulusSpec};
use crate::quadrature::{integrate, Tolerance};
use crate::report::Verdict;
use crate::scalar::Scalar;

/// Half-octave nodes below `c0` at which the potential is tabulated.
const CACHE_NODES: i32 = 120;

/// The Lyapunov pair `φ_δ(ζ) = ∫_0^ζ ds/(s r(s) + δ)` and `Φ_δ = exp(φ_δ)`.
///
/// Values at a fixed geometric node grid are computed once (on first use) and
/// shared; a query integrates only from the nearest node below it.
#[derive(Debug, Clone)]
pub struct PhiFamily<T> {
    modulus: ModulusSpec<T>,
    delta: T,
    quad_rel_tol: T,
    check_derivatives: bool,
    cache: OnceLock<Vec<(T, T)>>,
}

impl<T: Scalar> PhiFamily<T> {
    pub fn new(modulus: ModulusSpec<T>, delta: T) -> Result<Self> {
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(Error::arg(format!("delta must be positive, got {delta}")));
        }
        if !matches!(modulus.domain(), Domain::Origin { .. }) {
            return Err(Error::arg("the Lyapunov family needs a modulus defined on (0, c0]"));
        }
        Ok(Self {
            modulus,
            delta,
            quad_rel_tol: quad_rel::<T>(1e-10),
            check_derivatives: false,
            cache: OnceLock::new(),
        })
    }

    pub fn with_tolerance(mut self, rel: T) -> Self {
        self.quad_rel_tol = rel.max(T::lit(100.0) * T::epsilon());
        self.cache = OnceLock::new();
        self
    }

    /// Cross-check every `Φ'` against a central difference of `Φ` (relative tolerance `1e-4`).
    pub fn with_derivative_check(mut self, on: bool) -> Self {
        self.check_derivatives = on;
        self
    }

    pub fn modulus(&self) -> &ModulusSpec<T> {
        &self.modulus
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn c0(&self) -> T {
        self.modulus.c0()
    }

    fn integrand(&self, s: T) -> Result<T> {
        Ok(T::one() / (self.modulus.s_times_r(s.max(T::zero()))? + self.delta))
    }

    fn segment(&self, a: T, b: T) -> Result<T> {
        Ok(integrate(|s| self.integrand(s), a, b, Tolerance::relative(self.quad_rel_tol))?.value)
    }

    fn nodes(&self) -> Result<&[(T, T)]> {
        if let Some(n) = self.cache.get() {
            return Ok(n);
        }
        let c0 = self.c0();
        let ratio = T::lit(std::f64::consts::SQRT_2);
        let mut zs: Vec<T> = (0..=CACHE_NODES).map(|j| c0 / ratio.powi(j)).collect();
        zs.retain(|z| z.is_normal());
        zs.reverse();
        let mut table = Vec::with_capacity(zs.len() + 1);
        table.push((T::zero(), T::zero()));
        let mut acc = T::zero();
        let mut prev = T::zero();
        for z in zs {
            acc = acc + self.segment(prev, z)?;
            table.push((z, acc));
            prev = z;
        }
        Ok(self.cache.get_or_init(|| table))
    }

    fn check_zeta(&self, zeta: T) -> Result<()> {
        let c0 = self.c0();
        if !(zeta >= T::zero()) || zeta > c0 * (T::one() + T::lit(4.0) * T::epsilon()) {
            return Err(Error::domain(format!("phi_delta on [0, {c0}]"), zeta.to_f64_lossy()));
        }
        Ok(())
    }

    /// `φ_δ(ζ)`, exactly `0` at `ζ = 0`.
    pub fn phi(&self, zeta: T) -> Result<T> {
        self.check_zeta(zeta)?;
        if zeta == T::zero() {
            return Ok(T::zero());
        }
        let zeta = zeta.min(self.c0());
        let nodes = self.nodes()?;
        let k = nodes.partition_point(|n| n.0 <= zeta) - 1;
        let (z0, v0) = nodes[k];
        Ok(v0 + self.segment(z0, zeta)?)
    }

    /// `φ_δ(ζ)` by a single adaptive integral from 0, bypassing the node table.
    pub fn phi_uncached(&self, zeta: T) -> Result<T> {
        self.check_zeta(zeta)?;
        self.segment(T::zero(), zeta.min(self.c0()))
    }

    /// `Φ_δ(ζ) = exp(φ_δ(ζ))`.
    pub fn lyapunov(&self, zeta: T) -> Result<T> {
        Ok(self.phi(zeta)?.exp())
    }

    /// `Φ'_δ(ζ) = Φ_δ(ζ) / (ζ r(ζ) + δ)`.
    pub fn lyapunov_prime(&self, zeta: T) -> Result<T> {
        let value = self.lyapunov(zeta)? / (self.modulus.s_times_r(zeta)? + self.delta);
        if self.check_derivatives && zeta > T::zero() {
            let h = T::lit(1e-4) * zeta;
            let hi = (zeta + h).min(self.c0());
            let lo = zeta - h;
            let numeric = (self.lyapunov(hi)? - self.lyapunov(lo)?) / (hi - lo);
            if ((numeric - value) / value).abs() > T::lit(1e-4) {
                return Err(Error::DerivativeMismatch {
                    at: zeta.to_f64_lossy(),
                    closed: value.to_f64_lossy(),
                    numeric: numeric.to_f64_lossy(),
                });
            }
        }
        Ok(value)
    }

    /// `Φ''_δ(ζ) = (1 - r(ζ) - ζ r'(ζ)) / (ζ r(ζ) + δ)^2 · Φ_δ(ζ)`, for `ζ` in `(0, c0]`.
    pub fn lyapunov_second(&self, zeta: T) -> Result<T> {
        let r = self.modulus.eval(zeta)?;
        let zr_prime = zeta * self.modulus.deriv(zeta)?;
        let denom = zeta * r + self.delta;
        Ok((T::one() - r - zr_prime) / (denom * denom) * self.lyapunov(zeta)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiBoundViolation<T> {
    pub zeta: T,
    pub second: T,
    pub bound: T,
}

/// Outcome of checking `Φ'' <= C2 Φ r / (ζ r + δ)^2` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiBoundAudit<T> {
    pub c2: T,
    pub holds: bool,
    /// Smallest `bound - Φ''` over the grid.
    pub worst_slack: T,
    pub violations: Vec<PhiBoundViolation<T>>,
    /// Verdict of the elasticity condition for this modulus; the inequality is only
    /// guaranteed when it passes.
    pub slope_condition: Verdict,
}

pub fn phi_bound_audit<T: Scalar>(fam: &PhiFamily<T>, grid: &[T], c2: T) -> Result<PhiBoundAudit<T>> {
    let mut worst = T::infinity();
    let mut violations = Vec::new();
    for &z in grid {
        let second = fam.lyapunov_second(z)?;
        let r = fam.modulus.eval(z)?;
        let denom = z * r + fam.delta;
        let bound = c2 * fam.lyapunov(z)? * r / (denom * denom);
        let slack = bound - second;
        worst = worst.min(slack);
        let tol = T::lit(1e-12) * bound.abs().max(second.abs());
        if slack < -tol {
            violations.push(PhiBoundViolation { zeta: z, second, bound });
        }
    }
    Ok(PhiBoundAudit {
        c2,
        holds: violations.is_empty(),
        worst_slack: worst,
        violations,
        slope_condition: check_slope_ratio(&fam.modulus, &CheckTolerances::default()).verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulus::checks::estimate_c2;
    use approx::assert_relative_eq;

    fn fam(m: ModulusSpec<f64>, delta: f64) -> PhiFamily<f64> {
        PhiFamily::new(m, delta).unwrap()
    }

    fn constant_with_c0(c: f64, c0: f64) -> ModulusSpec<f64> {
        ModulusSpec::new(crate::modulus::ModulusFamily::Constant(c), Domain::Origin { c0 }).unwrap()
    }

    #[test]
    fn constant_examples() {
        let f = fam(constant_with_c0(1.0, 1.0), 1.0);
        assert_relative_eq!(f.phi(1.0).unwrap(), 2f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(f.lyapunov(1.0).unwrap(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(f.lyapunov_prime(1.0).unwrap(), 1.0, max_relative = 1e-12);
        assert_eq!(f.lyapunov_second(1.0).unwrap(), 0.0);

        let g = fam(constant_with_c0(2.0, 1.0), 0.5);
        assert_relative_eq!(g.phi(1.0).unwrap(), 0.5 * 5f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn values_at_zero() {
        for delta in [1.0, 0.1, 0.01] {
            let f = fam(ModulusSpec::log(), delta);
            assert_eq!(f.phi(0.0).unwrap(), 0.0);
            assert_eq!(f.lyapunov(0.0).unwrap(), 1.0);
            assert_eq!(f.lyapunov_prime(0.0).unwrap(), 1.0 / delta);
        }
    }

    #[test]
    fn argument_and_domain_errors() {
        assert!(PhiFamily::new(ModulusSpec::<f64>::log(), 0.0).is_err());
        assert!(PhiFamily::new(ModulusSpec::<f64>::log(), -1.0).is_err());
        assert!(PhiFamily::new(ModulusSpec::<f64>::log_growth(), 0.1).is_err());
        let f = fam(ModulusSpec::log(), 0.1);
        assert!(matches!(f.phi(0.2), Err(Error::Domain { .. })));
        assert!(matches!(f.phi(-1e-3), Err(Error::Domain { .. })));
    }

    #[test]
    fn cache_agrees_with_direct_integral() {
        let f = fam(ModulusSpec::log(), 1e-4);
        for &z in &[1e-9, 3.3e-6, 0.0123, 0.1] {
            assert_relative_eq!(f.phi(z).unwrap(), f.phi_uncached(z).unwrap(), max_relative = 1e-9);
        }
    }

    #[test]
    fn log_modulus_against_midpoint_oracle() {
        // Independent route: substitute s = e^u and apply a fine composite midpoint rule
        // on [-60, log ζ], plus the near-constant piece on [0, e^-60].
        let delta = 1e-2;
        let zeta = 0.05f64;
        let (lo, hi) = (-60.0f64, zeta.ln());
        let n = 400_000;
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            let u = lo + (k as f64 + 0.5) * h;
            let s = u.exp();
            acc += s / (s * (-u) + delta);
        }
        let oracle = acc * h + lo.exp() / delta;
        let f = fam(ModulusSpec::log(), delta);
        assert_relative_eq!(f.phi(zeta).unwrap(), oracle, max_relative = 1e-8);
    }

    #[test]
    fn derivative_check_mode() {
        let f = fam(ModulusSpec::log(), 0.01).with_derivative_check(true);
        for &z in &[1e-6, 1e-3, 0.05, 0.1] {
            f.lyapunov_prime(z).unwrap();
        }
    }

    #[test]
    fn second_derivative_matches_difference_of_first() {
        let f = fam(ModulusSpec::log(), 0.01);
        for &z in &[1e-4, 1e-2, 0.07] {
            let h = 1e-5 * z;
            let fd = (f.lyapunov_prime(z + h).unwrap() - f.lyapunov_prime(z - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(f.lyapunov_second(z).unwrap(), fd, max_relative = 1e-4);
        }
    }

    #[test]
    fn bound_audit_fixtures() {
        let c = fam(ModulusSpec::constant(1.0).unwrap(), 0.1);
        let grid: Vec<f64> = (1..=50).map(|k| 0.1 * k as f64 / 50.0).collect();
        let c2 = estimate_c2(c.modulus(), &c.modulus().probes()).unwrap();
        let audit = phi_bound_audit(&c, &grid, c2).unwrap();
        assert!(audit.holds);

        let log = fam(ModulusSpec::log(), 0.1);
        let grid: Vec<f64> = (0..=50).map(|k| 10f64.powf(-6.0 + 5.0 * k as f64 / 50.0)).collect();
        let c2 = estimate_c2(log.modulus(), &log.modulus().probes()).unwrap();
        let audit = phi_bound_audit(&log, &grid, c2).unwrap();
        assert!(audit.holds, "{audit:?}");
        assert!(audit.worst_slack >= 0.0);
        assert_eq!(audit.slope_condition, Verdict::Pass);

        let bad = fam(ModulusSpec::power_law(-0.5).unwrap(), 0.1);
        let c2 = estimate_c2(bad.modulus(), &bad.modulus().probes()).unwrap();
        let audit = phi_bound_audit(&bad, &grid, c2).unwrap();
        assert_eq!(audit.slope_condition, Verdict::Fail);
    }

    #[test]
    fn single_precision_family() {
        let m = ModulusSpec::<f32>::new(crate::modulus::ModulusFamily::Constant(2.0), Domain::Origin { c0: 0.1 }).unwrap();
        let f = PhiFamily::new(m, 0.01f32).unwrap();
        let z = 0.05f32;
        assert_relative_eq!(f.phi(z).unwrap(), 0.5 * (1.0 + 2.0 * z / 0.01).ln(), max_relative = 1e-5);
    }
}
