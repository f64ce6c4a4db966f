//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar usable by the quadrature, modulus, and simulation code: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Values outside the target range saturate to infinity.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(|| if x > 0.0 { Self::infinity() } else { Self::neg_infinity() })
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }

    /// Relative step for central differences: `1e-8` in double precision, `eps^(1/3)` below that.
    fn diff_step() -> Self {
        if Self::epsilon() < Self::lit(1e-12) {
            Self::lit(1e-8)
        } else {
            Self::epsilon().cbrt()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Euclidean squared distance between two equal-length slices.
pub fn squared_distance<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum()
}

pub fn squared_norm<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&a| a * a).sum()
}
