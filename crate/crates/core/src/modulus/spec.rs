use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Closed-form or tabulated shape of a modulus.
///
/// The logarithmic families are oriented toward their domain end: near the
/// origin `Log` is `log(1/s)`, near infinity it is `log(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "snake_case",
    bound(serialize = "T: Scalar", deserialize = "T: Scalar")
)]
pub enum ModulusFamily<T> {
    Constant(T),
    Log,
    LogLog,
    PowerLaw(T),
    Tabulated(Table<T>),
}

/// Where the modulus lives: `(0, c0]` for the uniqueness modulus, `[start, inf)` for the growth modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain<T> {
    Origin { c0: T },
    Infinity { start: T },
}

/// Geometric probe grid `s_k = s_0 * 2^(∓k)`, truncated to the scalar's normal range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeSchedule {
    pub version: u32,
    pub max_halvings: usize,
}

impl Default for ProbeSchedule {
    fn default() -> Self {
        Self {
            version: 1,
            max_halvings: 200,
        }
    }
}

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant through positive knots.
/// Outside the knot range the end values are held constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "TableKnots<T>",
    into = "TableKnots<T>",
    bound(serialize = "T: Scalar", deserialize = "T: Scalar")
)]
pub struct Table<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    slopes: Vec<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableKnots<T> {
    pub s: Vec<T>,
    pub r: Vec<T>,
}

impl<T: Scalar> TryFrom<TableKnots<T>> for Table<T> {
    type Error = Error;

    fn try_from(k: TableKnots<T>) -> Result<Self> {
        Table::new(k.s, k.r)
    }
}

impl<T> From<Table<T>> for TableKnots<T> {
    fn from(t: Table<T>) -> Self {
        TableKnots { s: t.xs, r: t.ys }
    }
}

impl<T: Scalar> Table<T> {
    pub fn new(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::arg("tabulated modulus needs at least two (s, r) knots of equal length"));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) || xs[0] <= T::zero() {
            return Err(Error::arg("tabulated knots must be positive and strictly increasing"));
        }
        if ys.iter().any(|&y| !(y > T::zero()) || !y.is_finite()) {
            return Err(Error::arg("tabulated modulus values must be positive and finite"));
        }
        let slopes = pchip_slopes(&xs, &ys);
        Ok(Self { xs, ys, slopes })
    }

    pub fn knots(&self) -> (&[T], &[T]) {
        (&self.xs, &self.ys)
    }

    pub fn eval(&self, s: T) -> T {
        let n = self.xs.len();
        if s <= self.xs[0] {
            return self.ys[0];
        }
        if s >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = self.xs.partition_point(|&x| x <= s) - 1;
        let h = self.xs[k + 1] - self.xs[k];
        let t = (s - self.xs[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        h00 * self.ys[k] + h10 * h * self.slopes[k] + h01 * self.ys[k + 1] + h11 * h * self.slopes[k + 1]
    }
}

fn pchip_slopes<T: Scalar>(xs: &[T], ys: &[T]) -> Vec<T> {
    let n = xs.len();
    let h: Vec<T> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<T> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    let mut m = vec![T::zero(); n];
    if n == 2 {
        m[0] = delta[0];
        m[1] = delta[0];
        return m;
    }
    let two = T::lit(2.0);
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > T::zero() {
            let w1 = two * h[k] + h[k - 1];
            let w2 = h[k] + two * h[k - 1];
            m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let end = |h0: T, h1: T, d0: T, d1: T| {
        let mut s = ((two * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            s = T::zero();
        } else if d0.signum() != d1.signum() && s.abs() > (T::lit(3.0) * d0).abs() {
            s = T::lit(3.0) * d0;
        }
        s
    };
    m[0] = end(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    m
}

/// A positive modulus function together with its domain and probe grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct ModulusSpec<T> {
    family: ModulusFamily<T>,
    domain: Domain<T>,
    schedule: ProbeSchedule,
    floor_c1: T,
}

impl<T: Scalar> ModulusSpec<T> {
    pub fn new(family: ModulusFamily<T>, domain: Domain<T>) -> Result<Self> {
        Self::with_schedule(family, domain, ProbeSchedule::default())
    }

    pub fn with_schedule(family: ModulusFamily<T>, domain: Domain<T>, schedule: ProbeSchedule) -> Result<Self> {
        match domain {
            Domain::Origin { c0 } if !(c0 > T::zero()) || !c0.is_finite() => {
                return Err(Error::arg("c0 must be positive and finite"))
            }
            Domain::Infinity { start } if !(start > T::zero()) || !start.is_finite() => {
                return Err(Error::arg("growth modulus start must be positive and finite"))
            }
            _ => {}
        }
        match (&family, domain) {
            (ModulusFamily::Constant(c), _) if !(*c > T::zero()) => {
                return Err(Error::arg("constant modulus must be positive"))
            }
            (ModulusFamily::Log, Domain::Origin { c0 }) if c0 >= T::one() => {
                return Err(Error::arg("log(1/s) is positive only for c0 < 1"))
            }
            (ModulusFamily::LogLog, Domain::Origin { c0 }) if c0 >= T::one() / T::E() => {
                return Err(Error::arg("log(1/s)·loglog(1/s) is positive only for c0 < 1/e"))
            }
            (ModulusFamily::Log, Domain::Infinity { start }) if start <= T::one() => {
                return Err(Error::arg("log(s) is positive only for start > 1"))
            }
            (ModulusFamily::LogLog, Domain::Infinity { start }) if start <= T::E() => {
                return Err(Error::arg("log(s)·loglog(s) is positive only for start > e"))
            }
            _ => {}
        }
        let mut spec = Self {
            family,
            domain,
            schedule,
            floor_c1: T::one(),
        };
        let mut min_r = T::infinity();
        for s in spec.probes() {
            let r = spec.eval(s)?;
            if !(r > T::zero()) || !r.is_finite() {
                return Err(Error::arg(format!(
                    "modulus must be positive and finite on its probe grid; r({}) = {}",
                    s, r
                )));
            }
            min_r = min_r.min(r);
        }
        spec.floor_c1 = T::one() / min_r;
        Ok(spec)
    }

    pub fn log() -> Self {
        Self::new(ModulusFamily::Log, Domain::Origin { c0: T::lit(0.1) }).expect("default log modulus")
    }

    pub fn log_log() -> Self {
        Self::new(ModulusFamily::LogLog, Domain::Origin { c0: T::lit(0.05) }).expect("default loglog modulus")
    }

    pub fn constant(c: T) -> Result<Self> {
        Self::new(ModulusFamily::Constant(c), Domain::Origin { c0: T::lit(0.1) })
    }

    pub fn power_law(p: T) -> Result<Self> {
        Self::new(ModulusFamily::PowerLaw(p), Domain::Origin { c0: T::lit(0.1) })
    }

    /// `log s` on `[e, inf)`.
    pub fn log_growth() -> Self {
        Self::new(ModulusFamily::Log, Domain::Infinity { start: T::E() }).expect("default log growth modulus")
    }

    pub fn family(&self) -> &ModulusFamily<T> {
        &self.family
    }

    pub fn domain(&self) -> Domain<T> {
        self.domain
    }

    pub fn schedule(&self) -> ProbeSchedule {
        self.schedule
    }

    /// Upper end of the origin domain. For growth moduli this is infinity.
    pub fn c0(&self) -> T {
        match self.domain {
            Domain::Origin { c0 } => c0,
            Domain::Infinity { .. } => T::infinity(),
        }
    }

    /// `C1` with `r(s) >= 1/C1` on the probe grid.
    pub fn floor_c1(&self) -> T {
        self.floor_c1
    }

    pub fn name(&self) -> String {
        let base = match &self.family {
            ModulusFamily::Constant(c) => format!("constant({c})"),
            ModulusFamily::Log => "log".to_string(),
            ModulusFamily::LogLog => "log_log".to_string(),
            ModulusFamily::PowerLaw(p) => format!("power_law({p})"),
            ModulusFamily::Tabulated(_) => "tabulated".to_string(),
        };
        match self.domain {
            Domain::Origin { .. } => base,
            Domain::Infinity { .. } => format!("{base}@inf"),
        }
    }

    pub fn probes(&self) -> Vec<T> {
        let two = T::lit(2.0);
        let mut out = Vec::with_capacity(self.schedule.max_halvings + 1);
        match self.domain {
            Domain::Origin { c0 } => {
                let floor = T::min_positive_value() * T::lit(1048576.0);
                let mut s = c0;
                for _ in 0..=self.schedule.max_halvings {
                    if s < floor {
                        break;
                    }
                    out.push(s);
                    s = s / two;
                }
            }
            Domain::Infinity { start } => {
                let ceiling = T::max_value() / T::lit(1048576.0);
                let mut s = start;
                for _ in 0..=self.schedule.max_halvings {
                    if s > ceiling {
                        break;
                    }
                    out.push(s);
                    s = s * two;
                }
            }
        }
        out
    }

    fn check_domain(&self, s: T) -> Result<()> {
        let inside = match self.domain {
            Domain::Origin { c0 } => s > T::zero() && s <= c0 * (T::one() + T::lit(4.0) * T::epsilon()),
            Domain::Infinity { start } => s >= start * (T::one() - T::lit(4.0) * T::epsilon()) && s.is_finite(),
        };
        if inside {
            Ok(())
        } else {
            Err(Error::domain(self.name(), s.to_f64_lossy()))
        }
    }

    fn at_origin(&self) -> bool {
        matches!(self.domain, Domain::Origin { .. })
    }

    /// `L = log(1/s)` near the origin, `log s` near infinity.
    fn log_var(&self, s: T) -> T {
        if self.at_origin() {
            -s.ln()
        } else {
            s.ln()
        }
    }

    pub fn eval(&self, s: T) -> Result<T> {
        self.check_domain(s)?;
        let value = match &self.family {
            ModulusFamily::Constant(c) => *c,
            ModulusFamily::Log => self.log_var(s),
            ModulusFamily::LogLog => {
                let l = self.log_var(s);
                if l <= T::one() {
                    return Err(Error::domain(self.name(), s.to_f64_lossy()));
                }
                l * l.ln()
            }
            ModulusFamily::PowerLaw(p) => s.powf(*p),
            ModulusFamily::Tabulated(t) => t.eval(s),
        };
        Ok(value)
    }

    /// `r'(s)`; analytic for closed forms, central difference for tabulated moduli.
    pub fn deriv(&self, s: T) -> Result<T> {
        self.check_domain(s)?;
        let sign = if self.at_origin() { -T::one() } else { T::one() };
        let value = match &self.family {
            ModulusFamily::Constant(_) => T::zero(),
            ModulusFamily::Log => sign / s,
            ModulusFamily::LogLog => {
                let l = self.log_var(s);
                if l <= T::one() {
                    return Err(Error::domain(self.name(), s.to_f64_lossy()));
                }
                sign * (l.ln() + T::one()) / s
            }
            ModulusFamily::PowerLaw(p) => *p * s.powf(*p - T::one()),
            ModulusFamily::Tabulated(t) => {
                let tiny = T::lit(1e-300).max(T::min_positive_value());
                let h = (T::diff_step() * s).max(tiny);
                let (lo, hi) = match self.domain {
                    Domain::Origin { c0 } => ((s - h).max(s * T::lit(0.5)), (s + h).min(c0)),
                    Domain::Infinity { start } => ((s - h).max(start), s + h),
                };
                (t.eval(hi) - t.eval(lo)) / (hi - lo)
            }
        };
        Ok(value)
    }

    /// Elasticity `s r'(s) / r(s)`, computed without forming `r'` for closed forms.
    pub fn elasticity(&self, s: T) -> Result<T> {
        self.check_domain(s)?;
        let sign = if self.at_origin() { -T::one() } else { T::one() };
        match &self.family {
            ModulusFamily::Constant(_) => Ok(T::zero()),
            ModulusFamily::Log => Ok(sign / self.log_var(s)),
            ModulusFamily::LogLog => {
                let l = self.log_var(s);
                if l <= T::one() {
                    return Err(Error::domain(self.name(), s.to_f64_lossy()));
                }
                let ll = l.ln();
                Ok(sign * (ll + T::one()) / (l * ll))
            }
            ModulusFamily::PowerLaw(p) => Ok(*p),
            ModulusFamily::Tabulated(_) => Ok(s * self.deriv(s)? / self.eval(s)?),
        }
    }

    /// `s r(s)`, extended to `s = 0` by its limit (needed at the left end of the Lyapunov integrand).
    pub fn s_times_r(&self, s: T) -> Result<T> {
        if s == T::zero() && self.at_origin() {
            return Ok(match &self.family {
                ModulusFamily::PowerLaw(p) if *p < -T::one() => T::infinity(),
                ModulusFamily::PowerLaw(p) if *p == -T::one() => T::one(),
                _ => T::zero(),
            });
        }
        if let (ModulusFamily::PowerLaw(p), true) = (&self.family, self.at_origin()) {
            self.check_domain(s)?;
            return Ok(s.powf(*p + T::one()));
        }
        Ok(s * self.eval(s)?)
    }
}
