//! Simulation and numerical verification for catalytic branching diffusions
//! `dX^i = α_i X^i dt + sqrt(f_i(X) X^i) dB^i` on the nonnegative orthant.

pub mod coefficients;
pub mod error;
pub mod experiments;
pub mod modulus;
pub mod quadrature;
pub mod report;
pub mod scalar;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use report::Verdict;
pub use scalar::Scalar;

/// Double-precision aliases.
pub type Modulus = modulus::ModulusSpec<f64>;
pub type Phi = modulus::PhiFamily<f64>;
pub type Model = coefficients::CoefficientModel<f64>;
pub type Config = sde::SimConfig<f64>;
pub type Path = sde::Trajectory<f64>;
pub type Coupled = sde::CoupledRun<f64>;
pub type Band = experiments::StoppingBand<f64>;

/// Single-precision aliases.
pub mod single {
    pub type Modulus = crate::modulus::ModulusSpec<f32>;
    pub type Phi = crate::modulus::PhiFamily<f32>;
    pub type Model = crate::coefficients::CoefficientModel<f32>;
    pub type Config = crate::sde::SimConfig<f32>;
    pub type Path = crate::sde::Trajectory<f32>;
    pub type Coupled = crate::sde::CoupledRun<f32>;
    pub type Band = crate::experiments::StoppingBand<f32>;
}
