//! Positivity-preserving time stepping with exact absorption at zero.

mod engine;
pub mod export;
mod noise;
mod trajectory;

pub use engine::{
    detect_explosion, simulate_batch, simulate_coupled, simulate_path, step, SimConfig, StepOutcome, TrapMode,
};
pub use noise::{standard_normal, NoiseStream};
pub use trajectory::{CoupledRun, Trajectory};
