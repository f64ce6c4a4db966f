//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate meets `max(abs_tol, rel_tol * |I|)`. Nodes are interior, so
//! integrands may be singular (but integrable) at the endpoints.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    pub abs: T,
    pub rel: T,
    pub max_intervals: usize,
}

impl<T: Scalar> Tolerance<T> {
    pub fn relative(rel: T) -> Self {
        Self {
            abs: T::zero(),
            rel,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub abs_err: T,
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Segment<T> {
    a: T,
    b: T,
    value: T,
    err: T,
}

fn kronrod<T: Scalar, F: FnMut(T) -> Result<T>>(f: &mut F, a: T, b: T) -> Result<Segment<T>> {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let f_center = f(center)?;
    let mut res_k = f_center * T::lit(WGK[7]);
    let mut res_g = f_center * T::lit(WG[3]);
    let mut res_abs = res_k.abs();
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];
    for j in 0..7 {
        let x = half_len * T::lit(XGK[j]);
        let f1 = f(center - x)?;
        let f2 = f(center + x)?;
        fv1[j] = f1;
        fv2[j] = f2;
        let w = T::lit(WGK[j]);
        res_k = res_k + w * (f1 + f2);
        res_abs = res_abs + w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g = res_g + T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let mean = res_k * half;
    let mut res_asc = T::lit(WGK[7]) * (f_center - mean).abs();
    for j in 0..7 {
        res_asc = res_asc + T::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half_len.abs();
    let value = res_k * half_len;
    res_abs = res_abs * scale;
    res_asc = res_asc * scale;
    let mut err = ((res_k - res_g) * half_len).abs();
    if res_asc != T::zero() && err != T::zero() {
        let ratio = (T::lit(200.0) * err / res_asc).powf(T::lit(1.5));
        err = if ratio < T::one() { res_asc * ratio } else { res_asc };
    }
    let floor = T::lit(50.0) * T::epsilon() * res_abs;
    if floor > err {
        err = floor;
    }
    if !value.is_finite() || !err.is_finite() {
        return Err(Error::Quadrature {
            a: a.to_f64_lossy(),
            b: b.to_f64_lossy(),
            estimate: value.to_f64_lossy(),
            abs_err: err.to_f64_lossy(),
        });
    }
    Ok(Segment { a, b, value, err })
}

/// Integrates `f` over `[a, b]` adaptively. `a > b` yields the negated integral.
pub fn integrate<T, F>(mut f: F, a: T, b: T, tol: Tolerance<T>) -> Result<Integral<T>>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    if a == b {
        return Ok(Integral {
            value: T::zero(),
            abs_err: T::zero(),
            evaluations: 0,
        });
    }
    if b < a {
        let r = integrate(f, b, a, tol)?;
        return Ok(Integral {
            value: -r.value,
            ..r
        });
    }

    let mut segments = vec![kronrod(&mut f, a, b)?];
    let mut evaluations = 15;
    loop {
        let total: T = segments.iter().map(|s| s.value).sum();
        let total_err: T = segments.iter().map(|s| s.err).sum();
        let target = tol.abs.max(tol.rel * total.abs());
        if total_err <= target {
            return Ok(Integral {
                value: total,
                abs_err: total_err,
                evaluations,
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, s)| if s.err > acc.1 { (i, s.err) } else { acc });
        let seg = segments[worst];
        let mid = T::lit(0.5) * (seg.a + seg.b);
        let width_floor = T::lit(100.0) * T::epsilon() * seg.a.abs().max(seg.b.abs());
        if segments.len() >= tol.max_intervals || seg.b - seg.a <= width_floor || mid <= seg.a || mid >= seg.b {
            return Err(Error::Quadrature {
                a: a.to_f64_lossy(),
                b: b.to_f64_lossy(),
                estimate: total.to_f64_lossy(),
                abs_err: total_err.to_f64_lossy(),
            });
        }
        let left = kronrod(&mut f, seg.a, mid)?;
        let right = kronrod(&mut f, mid, seg.b)?;
        evaluations += 30;
        segments[worst] = left;
        segments.push(right);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ok<T>(g: impl Fn(T) -> T) -> impl FnMut(T) -> Result<T> {
        move |x| Ok(g(x))
    }

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(ok(|x: f64| x.powi(5) - 3.0 * x * x), 0.0, 2.0, Tolerance::relative(1e-12)).unwrap();
        assert_relative_eq!(r.value, 64.0 / 6.0 - 8.0, max_relative = 1e-14);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(ok(|x: f64| 1.0 / x.sqrt()), 0.0, 1.0, Tolerance::relative(1e-10)).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn log_singularity() {
        let r = integrate(ok(|x: f64| x.ln()), 0.0, 1.0, Tolerance::relative(1e-10)).unwrap();
        assert_relative_eq!(r.value, -1.0, max_relative = 1e-9);
    }

    #[test]
    fn reversed_bounds_negate() {
        let fwd = integrate(ok(|x: f64| x.exp()), 0.0, 1.0, Tolerance::relative(1e-12)).unwrap();
        let rev = integrate(ok(|x: f64| x.exp()), 1.0, 0.0, Tolerance::relative(1e-12)).unwrap();
        assert_eq!(fwd.value, -rev.value);
    }

    #[test]
    fn sharp_peak_is_refined() {
        // integrand ~ 1/(x + 1e-8) on [0, 1]
        let d = 1e-8;
        let r = integrate(ok(|x: f64| 1.0 / (x + d)), 0.0, 1.0, Tolerance::relative(1e-10)).unwrap();
        assert_relative_eq!(r.value, ((1.0 + d) / d).ln(), max_relative = 1e-9);
    }

    #[test]
    fn single_precision() {
        let r = integrate(ok(|x: f32| x.cos()), 0.0f32, 1.0, Tolerance::relative(1e-5)).unwrap();
        assert_relative_eq!(r.value, 1.0f32.sin(), max_relative = 1e-5);
    }

    #[test]
    fn nonfinite_integrand_is_error() {
        let r = integrate(ok(|_x: f64| f64::NAN), 0.0, 1.0, Tolerance::relative(1e-10));
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
