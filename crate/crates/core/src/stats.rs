//! Order-fixed reductions used to keep Monte Carlo summaries reproducible.

use crate::scalar::Scalar;

/// Neumaier-compensated sum, evaluated left to right.
pub fn compensated_sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut carry = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry = carry + ((sum - t) + v);
        } else {
            carry = carry + ((v - t) + sum);
        }
        sum = t;
    }
    sum + carry
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se<T: Scalar>(values: &[T]) -> (T, T) {
    let n = values.len();
    if n == 0 {
        return (T::nan(), T::nan());
    }
    let nf = T::from_usize_lossy(n);
    let mean = compensated_sum(values.iter().copied()) / nf;
    if n == 1 {
        return (mean, T::zero());
    }
    let ss = compensated_sum(values.iter().map(|&v| (v - mean) * (v - mean)));
    let var = ss / T::from_usize_lossy(n - 1);
    (mean, (var / nf).sqrt())
}

/// `log(sum(exp(v)))`, stable for large magnitudes. Empty input gives `-inf`.
pub fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    max + compensated_sum(values.iter().map(|&v| (v - max).exp())).ln()
}

/// Log of the sample mean of `exp(v)` and the delta-method standard error on log scale.
pub fn log_mean_exp<T: Scalar>(log_values: &[T]) -> (T, T) {
    let n = log_values.len();
    if n == 0 {
        return (T::nan(), T::nan());
    }
    let max = log_values.iter().copied().fold(T::neg_infinity(), T::max);
    let scaled: Vec<T> = log_values.iter().map(|&v| (v - max).exp()).collect();
    let (mean, se) = mean_and_se(&scaled);
    (max + mean.ln(), se / mean)
}

/// Linear-interpolated quantile (Hyndman–Fan type 7) of unsorted data.
pub fn quantile<T: Scalar>(values: &[T], q: f64) -> T {
    if values.is_empty() {
        return T::nan();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let w = T::lit(h - lo as f64);
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + w * (sorted[hi] - sorted[lo])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn log_sum_exp_large_values() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn log_mean_exp_matches_direct() {
        let v = [0.1, 0.5, -0.3, 1.2];
        let direct = (v.iter().map(|x: &f64| x.exp()).sum::<f64>() / 4.0).ln();
        let (lm, se) = log_mean_exp(&v);
        assert!((lm - direct).abs() < 1e-14);
        assert!(se > 0.0);
        let (_, zero_se) = log_mean_exp(&[0.7, 0.7, 0.7]);
        assert_eq!(zero_se, 0.0);
    }

    #[test]
    fn quantiles() {
        let v = [3.0f64, 1.0, 2.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert!((quantile(&v, 0.95) - 4.8).abs() < 1e-12);
    }
}
