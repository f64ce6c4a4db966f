//! Modulus functions, their condition checkers, and the Lyapunov family built on them.

mod checks;
mod phi;
mod spec;

pub use checks::{
    check_growth_conditions, check_integral_divergence, check_liminf_positive, check_modulus_conditions,
    check_slope_ratio, estimate_c2, CheckTolerances, ConditionId, ConditionReport, Evidence, EVIDENCE_NOTE,
};
pub use phi::{phi_bound_audit, PhiBoundAudit, PhiBoundViolation, PhiFamily};
pub use spec::{Domain, ModulusFamily, ModulusSpec, ProbeSchedule, Table, TableKnots};
