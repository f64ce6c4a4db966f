//! Counter-based Gaussian increments: every draw is a pure function of
//! `(seed, path, component, step)`, so coupled and parallel paths need no shared state.

use crate::scalar::Scalar;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn key(seed: u64, path: u64, component: u64, step: u64) -> u64 {
    let mut h = mix64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    h = mix64(h ^ path.wrapping_mul(0xd1b5_4a32_d192_ed03));
    h = mix64(h ^ component.wrapping_mul(0xaef1_7502_108e_f2d9));
    mix64(h ^ step.wrapping_mul(0x2545_f491_4f6c_dd1d))
}

/// Uniform on `(0, 1]` from the top 53 bits.
#[inline]
fn unit_open_left(h: u64) -> f64 {
    ((h >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal draw indexed by `(seed, path, component, step)` (Box–Muller, cosine branch).
#[inline]
pub fn standard_normal(seed: u64, path: u64, component: u64, step: u64) -> f64 {
    let h = key(seed, path, component, step);
    let u1 = unit_open_left(h);
    let u2 = unit_open_left(mix64(h ^ 0x6a09_e667_f3bc_c909));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Brownian increments `√dt · Z` for one master seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseStream<T> {
    seed: u64,
    sqrt_dt: T,
}

impl<T: Scalar> NoiseStream<T> {
    pub fn new(seed: u64, dt: T) -> Self {
        Self {
            seed,
            sqrt_dt: dt.sqrt(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn increment(&self, path: u64, component: usize, step: u64) -> T {
        T::lit(standard_normal(self.seed, path, component as u64, step)) * self.sqrt_dt
    }

    /// Increments of all components for one step of one path.
    #[inline]
    pub fn fill(&self, path: u64, step: u64, out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.increment(path, i, step);
        }
    }
}
