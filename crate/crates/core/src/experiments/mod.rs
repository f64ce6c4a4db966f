//! Computable objects of the uniqueness argument: stopping times, the η bound, the
//! Gronwall envelope, trap and martingale facts, one cascade stage, and explosion counts.
//!
//! All Monte Carlo experiments use path indices `0..n_paths` of the configured seed and
//! reduce per-path results in path order.

mod cascade;
mod continuity;
mod eta;
mod explosion;
mod gronwall;
mod martingale;
mod stopping;

pub use cascade::{cascade_demo, CascadeParams, CascadeReport, DeterministicComponents, EnvelopePoint};
pub use continuity::{continuity_experiment, ContinuityParams, ContinuityReport, GapRow};
pub use eta::{eta_bound_audit, eta_factor, EtaAudit, EtaViolation};
pub use explosion::{explosion_experiment, ExplosionReport};
pub use gronwall::{
    estimate_constants, gronwall_constant, gronwall_constant_with_factor, gronwall_experiment, GridPoint,
    GronwallConstants, GronwallParams, GronwallReport,
};
pub use martingale::{martingale_experiment, trap_audit, ComponentMean, MartingaleReport, TrapAuditReport, TrapViolation};
pub use stopping::{detect_tau_c0, detect_tau_eps, tau_c0_index, tau_eps_index, CoefficientSeries, StoppingBand};
