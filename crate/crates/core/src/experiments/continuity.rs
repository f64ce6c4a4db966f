use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::modulus::ModulusSpec;
use crate::report::Verdict;
use crate::scalar::Scalar;
use crate::sde::SimConfig;
use crate::stats::{compensated_sum, quantile};

use super::gronwall::StoppedPath;
use super::stopping::StoppingBand;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityParams<T> {
    pub epsilon: T,
    /// Gap magnitudes, applied to the first coordinate.
    pub gaps: Vec<T>,
}

impl<T: Scalar> Default for ContinuityParams<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(0.1),
            gaps: [1e-2, 1e-3, 1e-4, 1e-5, 1e-6].iter().map(|&g| T::lit(g)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow<T> {
    pub gap: T,
    pub median: T,
    pub p95: T,
    pub mean: T,
    pub stopped_paths: usize,
    pub stopped_at_zero: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport<T> {
    /// Sorted by decreasing gap.
    pub rows: Vec<GapRow<T>>,
    pub median_monotone: bool,
    pub p95_monotone: bool,
    pub verdict: Verdict,
    pub note: String,
}

/// Distribution of `ζ_{T∧τ∧τ_ε}` across paths for each gap, with common random numbers.
pub fn continuity_experiment<T: Scalar>(
    model: &CoefficientModel<T>,
    r: &ModulusSpec<T>,
    a: &[T],
    params: &ContinuityParams<T>,
    config: &SimConfig<T>,
) -> Result<ContinuityReport<T>> {
    let d = model.d();
    if a.len() != d {
        return Err(Error::arg("initial state must have length d"));
    }
    if params.gaps.is_empty() || params.gaps.iter().any(|g| !(*g >= T::zero())) {
        return Err(Error::arg("gaps must be a nonempty list of nonnegative values"));
    }
    if config.n_paths == 0 {
        return Err(Error::arg("n_paths must be at least 1"));
    }
    let c0 = r.c0();
    let band = StoppingBand::full(params.epsilon, d)?;
    let mut gaps = params.gaps.clone();
    gaps.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    let last_step = config.n_steps();
    let mut rows = Vec::with_capacity(gaps.len());
    for &g in &gaps {
        if g * g > c0 * c0 {
            return Err(Error::arg(format!("gap {g} exceeds c0 = {c0}")));
        }
        let mut ay = a.to_vec();
        ay[0] = ay[0] + g;
        let per_path: Vec<(T, bool, bool)> = (0..config.n_paths as u64)
            .into_par_iter()
            .map(|p| {
                let sp = StoppedPath::simulate(model, a, &ay, &band, c0, config, p)?;
                Ok((sp.stopped_zeta(last_step), sp.stop.is_some(), sp.stop == Some(0)))
            })
            .collect::<Result<_>>()?;
        let zetas: Vec<T> = per_path.iter().map(|v| v.0).collect();
        rows.push(GapRow {
            gap: g,
            median: quantile(&zetas, 0.5),
            p95: quantile(&zetas, 0.95),
            mean: compensated_sum(zetas.iter().copied()) / T::from_usize_lossy(zetas.len()),
            stopped_paths: per_path.iter().filter(|v| v.1).count(),
            stopped_at_zero: per_path.iter().filter(|v| v.2).count(),
        });
    }
    let monotone = |f: fn(&GapRow<T>) -> T| rows.windows(2).all(|w| f(&w[1]) <= f(&w[0]));
    let median_monotone = monotone(|r| r.median);
    let p95_monotone = monotone(|r| r.p95);
    let all_stopped = rows.iter().any(|r| r.gap > T::zero() && r.stopped_at_zero == config.n_paths);
    let (verdict, note) = if all_stopped {
        (Verdict::Inconclusive, "every path left the band at t = 0 for some gap".to_string())
    } else {
        (
            Verdict::from_bool(median_monotone && p95_monotone),
            "common random numbers across gaps; stopping resolved on the record grid".to_string(),
        )
    };
    Ok(ContinuityReport {
        rows,
        median_monotone,
        p95_monotone,
        verdict,
        note,
    })
}
