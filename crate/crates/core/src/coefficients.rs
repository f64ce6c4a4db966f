//! Coefficient fields `f = (f_1, …, f_d)` and drifts `α`, with sampled verifiers for
//! the extended Lipschitz bound, the growth bound, and the zero-set conditions.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulus::ModulusSpec;
use crate::report::Verdict;
use crate::scalar::{squared_distance, squared_norm, Scalar};

type EvalHook<T> = dyn Fn(&[T], &mut [T]) + Send + Sync;

/// User-supplied coefficient field. Must write nonnegative, finite values.
#[derive(Clone)]
pub struct CompositeFn<T> {
    name: String,
    hook: Arc<EvalHook<T>>,
}

impl<T> CompositeFn<T> {
    pub fn new(name: impl Into<String>, hook: impl Fn(&[T], &mut [T]) + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            hook: Arc::new(hook),
        }
    }
}

impl<T> fmt::Debug for CompositeFn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeFn").field("name", &self.name).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Family<T> {
    /// `f_i(x) = γ_i x_{i-1}`, indices taken cyclically.
    Cyclic { gamma: Vec<T> },
    /// `f_i(x) = V(x_1) + V(x_2) + θ_i` with `V(u) = Σ_{k=1}^{N} |sin ku| / k²` (d = 2).
    SinSeries { theta: Vec<T>, terms: usize },
    Constant { values: Vec<T> },
    /// `f_i(x) = scale · (1 + |x|²)^exponent`; superlinear for `exponent > 1/2`.
    Radial { scale: T, exponent: T },
    Composite(CompositeFn<T>),
}

#[derive(Debug, Clone)]
pub struct CoefficientModel<T> {
    alpha: Vec<T>,
    family: Family<T>,
}

fn all_finite<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl<T: Scalar> CoefficientModel<T> {
    pub fn new(alpha: Vec<T>, family: Family<T>) -> Result<Self> {
        let d = alpha.len();
        if d == 0 {
            return Err(Error::arg("dimension d must be at least 1"));
        }
        if !all_finite(&alpha) {
            return Err(Error::arg("drift α must be finite"));
        }
        match &family {
            Family::Cyclic { gamma } => {
                if gamma.len() != d {
                    return Err(Error::arg(format!("gamma has {} entries, expected d = {d}", gamma.len())));
                }
                if gamma.iter().any(|&g| !(g > T::zero()) || !g.is_finite()) {
                    return Err(Error::arg("gamma entries must be positive and finite"));
                }
            }
            Family::SinSeries { theta, terms } => {
                if d != 2 || theta.len() != 2 {
                    return Err(Error::arg("the sin-series family is defined for d = 2 with two θ values"));
                }
                if theta.iter().any(|&t| !(t > T::zero()) || !t.is_finite()) {
                    return Err(Error::arg("theta entries must be positive and finite"));
                }
                if *terms == 0 {
                    return Err(Error::arg("sin-series truncation must be at least 1"));
                }
            }
            Family::Constant { values } => {
                if values.len() != d {
                    return Err(Error::arg(format!("values has {} entries, expected d = {d}", values.len())));
                }
                if values.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
                    return Err(Error::arg("constant values must be nonnegative and finite"));
                }
            }
            Family::Radial { scale, exponent } => {
                if !(*scale >= T::zero()) || !scale.is_finite() || !exponent.is_finite() {
                    return Err(Error::arg("radial scale must be nonnegative and exponent finite"));
                }
            }
            Family::Composite(_) => {}
        }
        Ok(Self { alpha, family })
    }

    pub fn cyclic(alpha: Vec<T>, gamma: Vec<T>) -> Result<Self> {
        Self::new(alpha, Family::Cyclic { gamma })
    }

    pub fn sin_series(alpha: Vec<T>, theta: Vec<T>, terms: usize) -> Result<Self> {
        Self::new(alpha, Family::SinSeries { theta, terms })
    }

    pub fn constant(alpha: Vec<T>, values: Vec<T>) -> Result<Self> {
        Self::new(alpha, Family::Constant { values })
    }

    pub fn radial(alpha: Vec<T>, scale: T, exponent: T) -> Result<Self> {
        Self::new(alpha, Family::Radial { scale, exponent })
    }

    pub fn composite(alpha: Vec<T>, hook: CompositeFn<T>) -> Result<Self> {
        Self::new(alpha, Family::Composite(hook))
    }

    pub fn d(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn family(&self) -> &Family<T> {
        &self.family
    }

    pub fn name(&self) -> String {
        match &self.family {
            Family::Cyclic { .. } => "cyclic".into(),
            Family::SinSeries { .. } => "sin_series".into(),
            Family::Constant { .. } => "constant".into(),
            Family::Radial { .. } => "radial".into(),
            Family::Composite(c) => c.name.clone(),
        }
    }

    pub fn eval(&self, x: &[T]) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.d()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    /// Checked evaluation into `out`: input must lie in the closed orthant.
    pub fn eval_into(&self, x: &[T], out: &mut [T]) -> Result<()> {
        let d = self.d();
        if x.len() != d || out.len() != d {
            return Err(Error::arg(format!("state has {} components, expected {d}", x.len())));
        }
        if let Some(bad) = x.iter().find(|v| !(**v >= T::zero()) || !v.is_finite()) {
            return Err(Error::arg(format!("coefficients are defined on the nonnegative orthant; got {bad}")));
        }
        self.eval_unchecked(x, out);
        if let Some(bad) = out.iter().find(|v| !(**v >= T::zero()) || !v.is_finite()) {
            return Err(Error::arg(format!("coefficient field returned {bad}")));
        }
        Ok(())
    }

    /// Evaluation without input validation, for the stepping loop.
    pub(crate) fn eval_unchecked(&self, x: &[T], out: &mut [T]) {
        match &self.family {
            Family::Cyclic { gamma } => {
                let d = x.len();
                for i in 0..d {
                    out[i] = gamma[i] * x[(i + d - 1) % d];
                }
            }
            Family::SinSeries { theta, terms } => {
                let v = sin_series_v(x[0], *terms) + sin_series_v(x[1], *terms);
                out[0] = v + theta[0];
                out[1] = v + theta[1];
            }
            Family::Constant { values } => out.copy_from_slice(values),
            Family::Radial { scale, exponent } => {
                let value = *scale * (T::one() + squared_norm(x)).powf(*exponent);
                out.iter_mut().for_each(|o| *o = value);
            }
            Family::Composite(c) => (c.hook)(x, out),
        }
        for o in out.iter_mut() {
            *o = o.max(T::zero());
        }
    }
}

/// `V_N(u) = Σ_{k=1}^{N} |sin ku| / k²`, using the `π`-periodicity of every term.
pub fn sin_series_v<T: Scalar>(u: T, terms: usize) -> T {
    let pi = T::PI();
    let u = u - (u / pi).floor() * pi;
    let (s1, c1) = u.sin_cos();
    let (mut s, mut c) = (s1, c1);
    let mut acc = T::zero();
    for k in 1..=terms {
        if k % 256 == 0 {
            let (sk, ck) = (T::from_usize_lossy(k) * u).sin_cos();
            s = sk;
            c = ck;
        }
        let kf = T::from_usize_lossy(k);
        acc = acc + s.abs() / (kf * kf);
        let next_s = s * c1 + c * s1;
        c = c * c1 - s * s1;
        s = next_s;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LipschitzSampling {
    pub n_pairs: usize,
    pub box_size: f64,
    pub seed: u64,
    /// Pair separations are log-uniform over this many decades below the maximum.
    /// Much smaller separations only measure cancellation error in `f(x) - f(y)`.
    pub radius_decades: f64,
}

impl Default for LipschitzSampling {
    fn default() -> Self {
        Self {
            n_pairs: 100_000,
            box_size: 10.0,
            seed: 0,
            radius_decades: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstPair<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub ratio: T,
}

/// Sampled estimate of the constant in `|f(x)-f(y)|² <= C |x-y|² r(|x-y|²)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport<T> {
    pub c_hat: T,
    pub worst_pair: Option<WorstPair<T>>,
    pub n_samples: usize,
    pub verdict: Verdict,
}

fn unit_direction<T: Scalar>(rng: &mut ChaCha8Rng, d: usize, positive: bool) -> Vec<T> {
    loop {
        let g: Vec<f64> = (0..d)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                if positive {
                    z.abs()
                } else {
                    z
                }
            })
            .collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-12 {
            return g.iter().map(|v| T::lit(v / n)).collect();
        }
    }
}

/// Pairs are `x ~ U[0, B]^d`, `y = x + u` with `|u|` log-uniform in `[10^-k ρ, ρ]`,
/// `ρ = min(c0, sqrt(c0))` so that `|x-y|²` stays in the modulus domain. Components
/// that would leave the orthant are reflected.
pub fn verify_extended_lipschitz<T: Scalar>(
    model: &CoefficientModel<T>,
    r: &ModulusSpec<T>,
    sampling: &LipschitzSampling,
) -> Result<LipschitzReport<T>> {
    if sampling.n_pairs == 0 {
        return Err(Error::arg("n_pairs must be at least 1"));
    }
    let d = model.d();
    let c0 = r.c0();
    let radius_max = c0.min(c0.sqrt()).to_f64_lossy();
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut fx = vec![T::zero(); d];
    let mut fy = vec![T::zero(); d];
    let mut best = T::zero();
    let mut worst_pair = None;
    let mut n_samples = 0;
    for _ in 0..sampling.n_pairs {
        let x: Vec<T> = (0..d).map(|_| T::lit(rng.gen_range(0.0..=sampling.box_size))).collect();
        let dir = unit_direction::<T>(&mut rng, d, false);
        let radius = T::lit(radius_max * 10f64.powf(-sampling.radius_decades * rng.gen::<f64>()));
        let y: Vec<T> = x
            .iter()
            .zip(&dir)
            .map(|(&xi, &ui)| {
                let yi = xi + radius * ui;
                if yi < T::zero() {
                    xi - radius * ui
                } else {
                    yi
                }
            })
            .collect();
        let dist2 = squared_distance(&x, &y);
        if dist2 == T::zero() || dist2 > c0 {
            continue;
        }
        model.eval_into(&x, &mut fx)?;
        model.eval_into(&y, &mut fy)?;
        let ratio = squared_distance(&fx, &fy) / (dist2 * r.eval(dist2)?);
        n_samples += 1;
        if ratio > best || worst_pair.is_none() {
            best = best.max(ratio);
            worst_pair = Some(WorstPair { x, y, ratio });
        }
    }
    Ok(LipschitzReport {
        c_hat: best,
        worst_pair,
        n_samples,
        verdict: Verdict::from_bool(best.is_finite()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthSampling {
    pub radius_min: f64,
    pub radius_max: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for GrowthSampling {
    fn default() -> Self {
        Self {
            radius_min: 2.0,
            radius_max: 1e4,
            n_samples: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthBoundReport<T> {
    pub c: T,
    pub max_ratio: T,
    pub worst_point: Vec<T>,
    pub n_samples: usize,
    pub verdict: Verdict,
}

/// Checks `Σ f_i² <= C (|x|² ρ(|x|²) + 1)` on points with log-uniform radii in the shell.
pub fn verify_growth_bound<T: Scalar>(
    model: &CoefficientModel<T>,
    rho: &ModulusSpec<T>,
    c: T,
    sampling: &GrowthSampling,
) -> Result<GrowthBoundReport<T>> {
    if !(c > T::zero()) {
        return Err(Error::arg("growth constant C must be positive"));
    }
    if !(sampling.radius_min > 0.0 && sampling.radius_max >= sampling.radius_min) {
        return Err(Error::arg("growth shell needs 0 < radius_min <= radius_max"));
    }
    let d = model.d();
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let (lo, hi) = (sampling.radius_min.ln(), sampling.radius_max.ln());
    let mut f = vec![T::zero(); d];
    let mut max_ratio = T::zero();
    let mut worst_point = vec![T::zero(); d];
    for _ in 0..sampling.n_samples {
        let radius = T::lit((lo + (hi - lo) * rng.gen::<f64>()).exp());
        let x: Vec<T> = unit_direction::<T>(&mut rng, d, true).into_iter().map(|u| u * radius).collect();
        let n2 = squared_norm(&x);
        model.eval_into(&x, &mut f)?;
        let ratio = squared_norm(&f) / (n2 * rho.eval(n2)? + T::one());
        if ratio > max_ratio {
            max_ratio = ratio;
            worst_point = x;
        }
    }
    Ok(GrowthBoundReport {
        c,
        max_ratio,
        worst_point,
        n_samples: sampling.n_samples,
        verdict: Verdict::from_bool(max_ratio <= c),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroSetSampling {
    pub n_interior: usize,
    pub n_boundary: usize,
    pub box_size: f64,
    pub seed: u64,
    /// Values at or below this count as zeros.
    pub zero_tol: f64,
    /// Minimum sampled value required to classify as strictly positive.
    pub positivity_floor: f64,
}

impl Default for ZeroSetSampling {
    fn default() -> Self {
        Self {
            n_interior: 10_000,
            n_boundary: 200,
            box_size: 10.0,
            seed: 0,
            zero_tol: 0.0,
            positivity_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroSetClass {
    /// Every `f_i` is strictly positive on the closed orthant.
    Positive,
    /// Zeros occur only on boundary faces, consistently across faces sharing the zero pattern.
    CandidateBoundary,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceEvidence {
    /// Coordinates fixed at zero on this face (0-based).
    pub zero_coords: Vec<usize>,
    pub samples: usize,
    /// Components vanishing at every sample on the face.
    pub vanishing: Vec<usize>,
    /// Components vanishing at some but not all samples.
    pub partially_vanishing: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroSetReport<T> {
    pub class: ZeroSetClass,
    pub min_interior: T,
    pub min_boundary: T,
    pub interior_zeros: usize,
    pub faces: Vec<FaceEvidence>,
    pub face_consistent: bool,
    pub note: String,
}

fn faces_for(d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    if d <= 10 {
        (1u32..(1 << d))
            .map(|mask| (0..d).filter(|i| mask & (1 << i) != 0).collect())
            .collect()
    } else {
        let mut faces: Vec<Vec<usize>> = (0..d).map(|i| vec![i]).collect();
        faces.push((0..d).collect());
        for _ in 0..4 * d {
            let mut f: Vec<usize> = (0..d).filter(|_| rng.gen_bool(0.3)).collect();
            if f.is_empty() {
                f.push(rng.gen_range(0..d));
            }
            faces.push(f);
        }
        faces.sort();
        faces.dedup();
        faces
    }
}

fn positive_coordinate(rng: &mut ChaCha8Rng, b: f64) -> f64 {
    if rng.gen_bool(0.5) {
        loop {
            let v = rng.gen_range(0.0..=b);
            if v > 0.0 {
                return v;
            }
        }
    } else {
        b * 10f64.powf(-8.0 * rng.gen::<f64>())
    }
}

/// Sampled classification of where the coefficients vanish.
pub fn classify_zero_set<T: Scalar>(model: &CoefficientModel<T>, sampling: &ZeroSetSampling) -> Result<ZeroSetReport<T>> {
    let d = model.d();
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let zero_tol = T::lit(sampling.zero_tol);
    let mut f = vec![T::zero(); d];

    let mut min_interior = T::infinity();
    let mut interior_zeros = 0;
    for _ in 0..sampling.n_interior {
        let x: Vec<T> = (0..d).map(|_| T::lit(positive_coordinate(&mut rng, sampling.box_size))).collect();
        model.eval_into(&x, &mut f)?;
        for &v in &f {
            min_interior = min_interior.min(v);
            if v <= zero_tol {
                interior_zeros += 1;
            }
        }
    }

    let mut min_boundary = T::infinity();
    let mut faces = Vec::new();
    // zero pattern per face: counts[i] = samples where f_i vanished
    let mut patterns: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for face in faces_for(d, &mut rng) {
        let mut counts = vec![0usize; d];
        for _ in 0..sampling.n_boundary {
            let x: Vec<T> = (0..d)
                .map(|j| {
                    if face.contains(&j) {
                        T::zero()
                    } else {
                        T::lit(positive_coordinate(&mut rng, sampling.box_size))
                    }
                })
                .collect();
            model.eval_into(&x, &mut f)?;
            for (i, &v) in f.iter().enumerate() {
                min_boundary = min_boundary.min(v);
                if v <= zero_tol {
                    counts[i] += 1;
                }
            }
        }
        let vanishing = (0..d).filter(|&i| sampling.n_boundary > 0 && counts[i] == sampling.n_boundary).collect();
        let partially_vanishing = (0..d).filter(|&i| counts[i] > 0 && counts[i] < sampling.n_boundary).collect();
        patterns.insert(face.clone(), counts);
        faces.push(FaceEvidence {
            zero_coords: face,
            samples: sampling.n_boundary,
            vanishing,
            partially_vanishing,
        });
    }

    // A zero of f_i on face S must persist on S and on every sampled face containing S.
    let mut face_consistent = true;
    for (face, counts) in &patterns {
        for i in 0..d {
            if counts[i] == 0 {
                continue;
            }
            for (other, other_counts) in &patterns {
                if face.iter().all(|j| other.contains(j)) && other_counts[i] != sampling.n_boundary {
                    face_consistent = false;
                }
            }
        }
    }

    let boundary_zero = patterns.values().any(|c| c.iter().any(|&n| n > 0));
    let floor = T::lit(sampling.positivity_floor);
    let class = if interior_zeros == 0 && !boundary_zero && min_interior.min(min_boundary) >= floor {
        ZeroSetClass::Positive
    } else if interior_zeros == 0 && face_consistent {
        ZeroSetClass::CandidateBoundary
    } else {
        ZeroSetClass::Neither
    };
    Ok(ZeroSetReport {
        class,
        min_interior,
        min_boundary,
        interior_zeros,
        faces,
        face_consistent,
        note: "sampled faces only; numerical evidence, not proof".into(),
    })
}
